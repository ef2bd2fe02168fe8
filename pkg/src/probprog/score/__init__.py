"""Statistics, ABC targets and the synthesis search."""
from .stats import (LOG_SCORE_FLOOR, Moments, g_test_log_score, g_test_p_value, g_test_statistic,
                    kolmogorov_sf, ks_statistic, ks_two_sample_p_value, moment_log_penalty,
                    moments)
from .targets import (GTestBernoulli, KSTwoSample, MomentsTarget, PosteriorCompile, ScoreReport,
                      resolve_target, score_candidate)
from .search import (LeaderboardEntry, SearchConfig, SynthesisResult, rank_entries, rescore,
                     run_chain, synthesize)

__all__ = [
    "LOG_SCORE_FLOOR", "Moments", "moments", "moment_log_penalty", "g_test_statistic",
    "g_test_p_value", "g_test_log_score", "ks_statistic", "kolmogorov_sf",
    "ks_two_sample_p_value", "MomentsTarget", "GTestBernoulli", "KSTwoSample",
    "PosteriorCompile", "ScoreReport", "score_candidate", "resolve_target", "SearchConfig",
    "LeaderboardEntry", "SynthesisResult", "synthesize", "rescore", "rank_entries", "run_chain",
]
