"""Shared fixtures and the acceptance-summary reporter."""

from __future__ import annotations

import numpy as np
import pytest

from fhrmon import pipeline
from fhrmon.io import SynthSpec
from fhrmon.pipeline import RunConfig


@pytest.fixture(scope="session")
def default_synth_spec() -> SynthSpec:
    return SynthSpec()


@pytest.fixture(scope="session")
def default_config(default_synth_spec) -> RunConfig:
    return RunConfig(synth=default_synth_spec, arch="parallel", backend="soft")


@pytest.fixture(scope="session")
def soft_artifacts(default_config):
    """One full soft-datapath pass over the default synthetic recording."""
    return pipeline.execute(default_config, "parallel")


@pytest.fixture(scope="session")
def ref_artifacts(default_config):
    """The same pass on the double-precision reference backend."""
    cfg = default_config.replaced(backend="float64")
    return pipeline.execute(cfg, "parallel")


def decoded(backend, words) -> np.ndarray:
    return np.array([backend.decode(w) for w in words])


# ---- acceptance criteria summary -------------------------------------------

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE_RESULTS.append((name, f"{status}{' - ' + detail if detail else ''}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{name}: {status}")
