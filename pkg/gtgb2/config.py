from pydantic import BaseModel, ConfigDict, ValidationError


class JsonConfig(BaseModel):
  """Base for every configuration object. Unknown keys are rejected so typos in config files surface early."""

  model_config = ConfigDict(extra="forbid")

  @classmethod
  def from_path(cls, path: str):
    try:
      with open(path, "r") as f:
        config_data = f.read()
    except FileNotFoundError as e:
      raise FileNotFoundError(f"Config file not found at {path}") from e

    try:
      return cls.model_validate_json(config_data)
    except ValidationError as e:
      raise ValueError(f"Error validating {cls.__name__} from {path}: {e}") from e

  def to_path(self, path: str) -> None:
    with open(path, "w") as f:
      f.write(self.model_dump_json(indent=2))
