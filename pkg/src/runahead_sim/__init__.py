"""Runahead execution model for scalar in-order cores."""

from .analyzer import AccessAnalysis, RunaheadPlan, analyze, analyze_basic
from .cache import CacheConfig, CacheModel, MissClass
from .executor import Episode, EpisodeKind, SimReport, run
from .policy import Policy, RunaheadConfig
from .workload import GenParams, MemoryAccess, Trace, generate

__all__ = [
    "AccessAnalysis", "CacheConfig", "CacheModel", "Episode", "EpisodeKind",
    "GenParams", "MemoryAccess", "MissClass", "Policy", "RunaheadConfig",
    "RunaheadPlan", "SimReport", "Trace", "analyze", "analyze_basic",
    "generate", "run",
]
