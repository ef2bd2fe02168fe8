"""Program induction: grammar, derivations, candidate samplers, corpus weights."""
from .grammar import (BOOL, DEFAULT_RULE_WEIGHTS, DEFAULT_WHITELIST, PRIMITIVE_SIGNATURES, REAL,
                      RULE_NAMES, RULES, TYPES, Derivation, ForeignDerivationError, GrammarConfig,
                      GrammarError, derivation_from_expr, derivation_log_prior, mutate_derivation,
                      productions)
from .typecheck import TypeCheckError, check_candidate, infer_type
from .candidate import (CALL_CAP, CandidateAbort, CandidateSampler, compile_candidate,
                        compile_source)
from .corpus import corpus_rule_weights, count_rules, load_corpus, read_manifest

__all__ = [
    "BOOL", "REAL", "TYPES", "RULES", "RULE_NAMES", "PRIMITIVE_SIGNATURES", "DEFAULT_WHITELIST",
    "DEFAULT_RULE_WEIGHTS", "GrammarConfig", "GrammarError", "ForeignDerivationError",
    "Derivation", "productions", "derivation_log_prior", "mutate_derivation",
    "derivation_from_expr", "TypeCheckError", "check_candidate", "infer_type", "CALL_CAP",
    "CandidateAbort", "CandidateSampler", "compile_candidate", "compile_source",
    "corpus_rule_weights", "count_rules", "load_corpus", "read_manifest",
]
