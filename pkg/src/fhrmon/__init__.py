"""Fetal heart-rate monitoring pipeline on a bit-level float32 datapath.

The package chains four units: a software float32 arithmetic unit
(:mod:`fhrmon.fpu`), a streaming preprocessing chain (:mod:`fhrmon.preprocess`),
an LMS adaptive noise canceller with serial and parallel cycle-accurate
datapath models (:mod:`fhrmon.lms`), and a fetal R-peak / heart-rate detector
(:mod:`fhrmon.fhr`).  Recording ingestion and the synthetic signal generator
live in :mod:`fhrmon.io`; :mod:`fhrmon.pipeline` wires everything end to end.
"""

from .fhr import FhrResult, Metrics, PeakSet
from .io import Recording, SynthSpec, generate_synthetic
from .lms import CycleStats, LmsConfig
from .numeric import Float64Backend, SoftF32Backend, make_backend
from .pipeline import RunConfig, RunReport, compare_architectures, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "CycleStats",
    "FhrResult",
    "Float64Backend",
    "LmsConfig",
    "Metrics",
    "PeakSet",
    "Recording",
    "RunConfig",
    "RunReport",
    "SoftF32Backend",
    "SynthSpec",
    "compare_architectures",
    "generate_synthetic",
    "make_backend",
    "run_pipeline",
    "__version__",
]
