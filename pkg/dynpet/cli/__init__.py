from .config import ReconConfig, ConfigError, config_version
from .main import main, get_parser
