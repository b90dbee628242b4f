"""Ablation studies, one module per study."""
from peft_forge.scenarios.scenario1_position_ablation import run_position_ablation
from peft_forge.scenarios.scenario2_structure_ablation import run_structure_ablation
from peft_forge.scenarios.scenario3_configuration_comparison import run_configuration_comparison
from peft_forge.scenarios.scenario4_normalization_study import run_normalization_study
from peft_forge.scenarios.scenario5_regularization_grid import run_regularization_grid
from peft_forge.scenarios.scenario6_failure_analysis import run_failure_analysis

STUDIES = {
    "ablate-position": run_position_ablation,
    "ablate-structure": run_structure_ablation,
    "compare-configs": run_configuration_comparison,
    "study-norm": run_normalization_study,
    "study-reg": run_regularization_grid,
    "study-failure": run_failure_analysis,
}

__all__ = [
    "STUDIES",
    "run_configuration_comparison",
    "run_failure_analysis",
    "run_normalization_study",
    "run_position_ablation",
    "run_regularization_grid",
    "run_structure_ablation",
]
