from ._mergelab import (
    PlanError,
    ProvenanceError,
    ctc_loss,
    default_toy_plan,
    greedy_decode,
    levenshtein,
    plan_digest,
    run_regime,
    validate_plan,
    verify_provenance,
)

__all__ = [
    "PlanError",
    "ProvenanceError",
    "ctc_loss",
    "default_toy_plan",
    "greedy_decode",
    "levenshtein",
    "plan_digest",
    "run_regime",
    "validate_plan",
    "verify_provenance",
]
