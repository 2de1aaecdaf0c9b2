"""Connecting-phrase domain adaptation for phrase-based MT assets."""

from ._core import (  # noqa: F401
    AffixIndex,
    FormatError,
    InputError,
    NgramLm,
    NnConfig,
    NnModel,
    NumericalError,
    Phrase,
    PhrasePair,
    Vocab,
    __version__,
    augment_lm,
    brute_force_is_connecting,
    build_affix_index,
    classify_pair,
    cond_logprob,
    d_minus,
    d_minus_lm,
    gradient_check,
    insert_ngrams,
    interpolate_lm_qin,
    is_connecting,
    occurring_probability,
    pair_op_score,
    parse_arpa,
    parse_arpa_text,
    parse_entry,
    parse_phrase,
    q_score,
    q_score_lm,
    renormalize,
    run_pipeline,
    sequence_logprob,
    serialize_arpa,
    serialize_entry,
    serialize_phrase,
    train_addk_lm,
    train_model,
)

__all__ = sorted(name for name in dir() if not name.startswith("_")) + ["__version__"]
