from .config import ExperimentConfig, RunConfig
