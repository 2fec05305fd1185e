"""Interval-passing reconstruction and analysis of its failing sets."""

__version__ = "0.1.0"

from .tanner import (MeasurementMatrix, TannerGraph, binarize, build_graph, builtin_instance,
                     gen_array_ldpc, gen_protograph_lift, measure)
from .ipa import IntervalState, IpaResult, RecoveryTrace, ipa, ipa_recovered_positions, recovery_trace
from .failsets import (TermatikoAnalysis, TermatikoClass, companion_set, full_failure_check,
                       is_stopping_set, is_termatiko_graph, is_termatiko_ipa, prune_inactive)
from .search import (Budget, SizeSpectrum, brute_force_termatiko, enumerate_stopping_sets,
                     ensemble_stats, heuristic_termatiko, iter_stopping_sets)
