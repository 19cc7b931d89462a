"""Proxy-guided Bayesian optimisation for architecture search on tabular benchmarks."""
from .bench import BenchmarkTable, SyntheticSpec, generate_synthetic, load_table, save_table, spearman
from .engine import RunTrace, SearchRun, run, run_many
from .guidance import influence, sample_next
from .proxies import ProxyContext, make_scorers
from .space import ArchEncoding, SearchSpaceSpec

__all__ = [
    "ArchEncoding",
    "BenchmarkTable",
    "ProxyContext",
    "RunTrace",
    "SearchRun",
    "SearchSpaceSpec",
    "SyntheticSpec",
    "generate_synthetic",
    "influence",
    "load_table",
    "make_scorers",
    "run",
    "run_many",
    "sample_next",
    "save_table",
    "spearman",
]
__version__ = "0.1.0"
