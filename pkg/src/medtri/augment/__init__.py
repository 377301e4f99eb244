"""Text-level augmentation on normalized reports."""

from .counterfactual import (
    CounterfactualConfig,
    DonorPool,
    EmitSummary,
    HardNegativeRecord,
    emit_hard_negative_set,
    generate_counterfactual,
    report_rng,
)
from .knowledge import (
    DEFAULT_KINDS,
    KnowledgeDictionary,
    KnowledgeEntry,
    default_dictionary,
    expand_knowledge,
)

__all__ = [
    "DEFAULT_KINDS",
    "CounterfactualConfig",
    "DonorPool",
    "EmitSummary",
    "HardNegativeRecord",
    "KnowledgeDictionary",
    "KnowledgeEntry",
    "default_dictionary",
    "emit_hard_negative_set",
    "expand_knowledge",
    "generate_counterfactual",
    "report_rng",
]
