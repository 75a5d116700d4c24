from gtgb2.helpers import DEBUG as DEBUG, VERSION as VERSION
