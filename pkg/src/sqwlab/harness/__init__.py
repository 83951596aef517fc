from .config import ConfigError, ExperimentConfig, parse_config
from .runner import ResultRecord, run, verify_run
from .cli import main
