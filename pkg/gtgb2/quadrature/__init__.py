from gtgb2.quadrature.gauss_kronrod import (
  QuadratureConfig, QuadratureError, HalflineBatch, integrate_halfline, integrate_halfline_batch, group_logsumexp
)
from gtgb2.quadrature.waypoints import compound_waypoints, waypoint_matrix, gb2_mode
