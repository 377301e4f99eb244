"""Raw report -> NormalizedReport backends and distillation-pair building."""

from .distill import (
    Checkpoint,
    DistillationPair,
    DistillSummary,
    Rejected,
    build_distillation_set,
)
from .remote import (
    REPAIR_SUFFIX,
    BackendConfig,
    BackendKind,
    ChatCompletionClient,
    RemoteNormalizer,
    default_prompt_template,
    normalize_remote,
    render_prompt,
)
from .rule import (
    IrrelevanceFilters,
    Modality,
    RawReport,
    RuleBasedNormalizer,
    default_filters,
    normalize_rule_based,
    split_sentences,
)


def make_backend(cfg: BackendConfig, ontology=None, filters=None, tagger=None, **rule_kwargs):
    """Instantiate the backend described by ``cfg``."""
    if cfg.kind is BackendKind.REMOTE_LLM:
        return RemoteNormalizer(cfg, ontology=ontology, tagger=tagger)
    return RuleBasedNormalizer(ontology, filters, tagger, **rule_kwargs)


__all__ = [
    "REPAIR_SUFFIX",
    "BackendConfig",
    "BackendKind",
    "ChatCompletionClient",
    "Checkpoint",
    "DistillSummary",
    "DistillationPair",
    "IrrelevanceFilters",
    "Modality",
    "RawReport",
    "Rejected",
    "RemoteNormalizer",
    "RuleBasedNormalizer",
    "build_distillation_set",
    "default_filters",
    "default_prompt_template",
    "make_backend",
    "normalize_remote",
    "normalize_rule_based",
    "render_prompt",
    "split_sentences",
]
