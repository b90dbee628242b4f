"""Configuration-driven experiments: strict configs, seeded runs, result emission."""
from peft_forge.experiment.config import ExperimentConfig, default_config, parse_config, parse_config_text
from peft_forge.experiment.results import emit_results, format_summary, summarize, write_summary
from peft_forge.experiment.runner import ResultRecord, evaluate_checkpoint, run_experiment

__all__ = [
    "ExperimentConfig",
    "ResultRecord",
    "default_config",
    "emit_results",
    "evaluate_checkpoint",
    "format_summary",
    "parse_config",
    "parse_config_text",
    "run_experiment",
    "summarize",
    "write_summary",
]
