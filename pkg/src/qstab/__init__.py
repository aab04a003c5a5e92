"""qstab: harmonic certificates of non-stabilizability for queueing networks.

Build a homogeneous controlled queueing network (push-pull, ring,
re-entrant, or custom), certify non-stabilizability through an exact
rational null-space certificate of the action drift matrix, and
corroborate verdicts by reproducible Monte Carlo simulation of the
embedded chain under non-idling policies.
"""

from .certify import (
    DriftMatrix,
    HarmonicCertificate,
    SignMatrix,
    UnsupportedFamilyError,
    Verdict,
    certify_nonstabilizable,
    check_nondegeneracy_direct,
    check_nondegeneracy_lemma,
    drift_matrix,
    family_alpha,
    is_critical,
    null_space_basis,
    rank,
    reentrant_alpha,
    ring_alpha_even,
    sign_matrix,
    verify_sign_pattern,
    verify_unit_pairing,
)
from .netmodel import (
    ActionSpec,
    ConstructionError,
    IndexSets,
    NetworkSpec,
    SpecFileError,
    available_actions,
    build_custom,
    build_push_pull,
    build_reentrant,
    build_ring,
    build_two_stream_example,
    dump_spec,
    format_rational,
    index_sets,
    load_spec,
    loads_spec,
    parse_rational,
    spec_document,
    transition_distribution,
)
from .simulate import (
    GrowthReport,
    MartingaleReport,
    Policy,
    PolicyError,
    ReturnTimeStats,
    SimConfig,
    TrajectorySummary,
    blowup_probe,
    estimate_return_time,
    make_policy,
    martingale_test,
    run_trajectories,
    step,
    substream_seed,
    trial_rng,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "ConstructionError",
    "DriftMatrix",
    "GrowthReport",
    "HarmonicCertificate",
    "IndexSets",
    "MartingaleReport",
    "NetworkSpec",
    "Policy",
    "PolicyError",
    "ReturnTimeStats",
    "SignMatrix",
    "SimConfig",
    "SpecFileError",
    "TrajectorySummary",
    "UnsupportedFamilyError",
    "Verdict",
    "available_actions",
    "blowup_probe",
    "build_custom",
    "build_push_pull",
    "build_reentrant",
    "build_ring",
    "build_two_stream_example",
    "certify_nonstabilizable",
    "check_nondegeneracy_direct",
    "check_nondegeneracy_lemma",
    "drift_matrix",
    "dump_spec",
    "estimate_return_time",
    "family_alpha",
    "format_rational",
    "index_sets",
    "is_critical",
    "load_spec",
    "loads_spec",
    "make_policy",
    "martingale_test",
    "null_space_basis",
    "parse_rational",
    "rank",
    "reentrant_alpha",
    "ring_alpha_even",
    "run_trajectories",
    "sign_matrix",
    "spec_document",
    "step",
    "substream_seed",
    "transition_distribution",
    "trial_rng",
    "verify_sign_pattern",
    "verify_unit_pairing",
    "__version__",
]
