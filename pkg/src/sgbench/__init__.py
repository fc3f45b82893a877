"""Trapdoor subgroup benchmark suite for SL(3, Z) and SL(2, Z).

Instances are built from secrets (a congruence level N and a planted
mod-N subgroup K, or a planted invariant form at one prime) so that the
published question has a closed-form answer; solvers only ever see the
scrambled generators.  Scoring is four-way, separating correct and
incorrect commitments from correct and incorrect abstentions.
"""

from .analyze import (
    UNKNOWN,
    FoldedGraph,
    FormCertificate,
    detect_congruence_level,
    detect_coxeter_s4,
    detect_invariant_form,
    detect_transvection,
    mod_p_image_order,
    nielsen_descent,
    nielsen_reduce_pair,
    sanov_decompose,
    sl2_word_decompose,
    solve_family5,
    solve_instance,
    stallings_fold,
)
from .construct import (
    FAMILIES,
    SCRAMBLE_PRESETS,
    ConstructionError,
    FreenessCapExceeded,
    GroundTruth,
    Instance,
    ScrambleBudgetError,
    ScrambleMove,
    ScramblePreset,
    TrapdoorSecret,
    build_family1,
    build_family2,
    build_family3,
    build_family4,
    build_family5,
    freeness_bfs,
    gamma_generators,
    invert_log,
    nielsen_scramble,
    replay_log,
    rewrite_word_through_log,
    shear,
)
from .harness import (
    ABSTAIN,
    AnswerRecord,
    Scorecard,
    ScoreOutcome,
    aggregate,
    audit_public_payload,
    parse_answer,
    read_answers,
    read_instance,
    read_secret,
    render_prompt,
    score,
    write_answers,
    write_instance,
)
from .linalg import (
    BigMatrix,
    ModMatrix,
    lift_to_sl,
    nullspace_mod_p,
    reduce_mod,
    smith_normal_form,
)
from .verify import (
    INFINITE,
    OVERFLOW,
    SanityReport,
    VerificationError,
    ground_truth,
    sanity_mod_image,
    sl2_index_catalog,
    sl3_order,
    subgroup_closure,
    verify_instance,
)
from .words import evaluate_word, free_reduce, invert_word, random_word, syllables

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN", "AnswerRecord", "BigMatrix", "ConstructionError", "FAMILIES",
    "FoldedGraph", "FormCertificate", "FreenessCapExceeded", "GroundTruth",
    "INFINITE", "Instance", "ModMatrix", "OVERFLOW", "SCRAMBLE_PRESETS",
    "SanityReport", "Scorecard", "ScoreOutcome", "ScrambleBudgetError",
    "ScrambleMove", "ScramblePreset", "TrapdoorSecret", "UNKNOWN",
    "VerificationError", "aggregate", "audit_public_payload", "build_family1",
    "build_family2", "build_family3", "build_family4", "build_family5",
    "detect_congruence_level", "detect_coxeter_s4", "detect_invariant_form",
    "detect_transvection", "evaluate_word", "free_reduce", "freeness_bfs",
    "gamma_generators", "ground_truth", "invert_log", "invert_word",
    "lift_to_sl", "mod_p_image_order", "nielsen_descent", "nielsen_reduce_pair",
    "nielsen_scramble", "nullspace_mod_p", "parse_answer", "random_word",
    "read_answers", "read_instance", "read_secret", "reduce_mod",
    "render_prompt", "replay_log", "rewrite_word_through_log", "sanity_mod_image",
    "sanov_decompose", "score", "shear", "sl2_index_catalog",
    "sl2_word_decompose", "sl3_order", "smith_normal_form", "solve_family5",
    "solve_instance", "stallings_fold", "subgroup_closure", "syllables",
    "verify_instance", "write_answers", "write_instance",
]
