"""LMS adaptive noise canceller and its two datapath realizations.

One sample step of the filter, with ``m`` taps, window ``x`` (most recent
first), weights ``w``, step size ``mu`` and ``beta = 2*mu``:

    y = sum_k scale(x[k]) * w[k]          (accumulated left to right)
    e = scale_d(d) - y
    w[k] += beta * e * scale(x[k])        (k ascending)

Three interchangeable implementations produce bit-identical results:

* :func:`lms_step` — the plain recurrence on an :class:`LmsState`.
* :class:`SeriesDatapath` — one multiply-accumulate lane reused across
  ``2m + 1`` cycles per sample (few arithmetic units, long latency).
* :class:`ParallelDatapath` — every operation of a sample issued in a
  single cycle (one-cycle latency, many concurrent units).

Both datapaths deliberately accumulate the dot product in the same fixed
left-to-right order, so cross-architecture equality is exact and testable.
Cycle and operation accounting rides along in :class:`CycleStats`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numeric import quantized

DEFAULT_ORDER = 19
DEFAULT_STEP_SIZE = 7e-5

# Arithmetic-unit budgets: the serial schedule never issues more than
# SERIES_FPU_INSTANCES operations in one cycle; the parallel datapath needs
# one unit per operation of the whole sample step (5m + 3).
SERIES_FPU_INSTANCES = 9


def parallel_fpu_instances(order: int) -> int:
    """Concurrent arithmetic units the one-cycle datapath instantiates."""
    return 5 * order + 3


@dataclass
class LmsConfig:
    order: int = DEFAULT_ORDER
    step_size: float = DEFAULT_STEP_SIZE
    input_scale: float = 1.0  # reference-channel factor
    desired_scale: float = 1.0  # primary-channel factor

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"filter order must be >= 1, got {self.order}")
        if self.step_size <= 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")

    @property
    def beta(self) -> float:
        """Weight-update gain 2*mu (exact doubling in binary floating point)."""
        return 2.0 * self.step_size


@dataclass
class CycleStats:
    cycles_per_sample: int
    fpu_instances: int
    total_cycles: int = 0
    fpu_ops_issued: int = 0
    samples_processed: int = 0
    max_ops_per_cycle: int = 0

    def account(self, ops_per_cycle: list[int]) -> None:
        self.total_cycles += len(ops_per_cycle)
        self.fpu_ops_issued += sum(ops_per_cycle)
        self.samples_processed += 1
        peak = max(ops_per_cycle)
        if peak > self.max_ops_per_cycle:
            self.max_ops_per_cycle = peak

    def to_dict(self) -> dict:
        return {
            "cycles_per_sample": self.cycles_per_sample,
            "total_cycles": self.total_cycles,
            "fpu_instances": self.fpu_instances,
            "fpu_ops_issued": self.fpu_ops_issued,
            "samples_processed": self.samples_processed,
            "max_ops_per_cycle": self.max_ops_per_cycle,
        }


class LmsState:
    """Tap window, weight vector and desired-sample register."""

    def __init__(self, cfg: LmsConfig, backend):
        self.cfg = cfg
        self.backend = backend
        self.input_scale = backend.encode(quantized(cfg.input_scale))
        self.desired_scale = backend.encode(quantized(cfg.desired_scale))
        self.beta = backend.encode(quantized(cfg.beta))
        self.reset()

    def reset(self) -> None:
        z = self.backend.zero
        self.window = [z] * self.cfg.order
        self.weights = [z] * self.cfg.order
        self.desired = z
        self.staged = z  # incoming sample's slot during the serial shift


def scale(backend, sample, factor):
    """Channel scaling: one multiply on the datapath."""
    return backend.mul(sample, factor)


def lms_step(state: LmsState, x_new, d_new):
    """Plain one-sample update; returns ``(e, y)`` in backend encoding."""
    bk = state.backend
    mul, add, sub = bk.mul, bk.add, bk.sub

    state.window = [x_new] + state.window[:-1]
    state.desired = d_new

    sx = [mul(x, state.input_scale) for x in state.window]
    y = bk.zero
    for k in range(state.cfg.order):
        y = add(y, mul(sx[k], state.weights[k]))
    e = sub(mul(d_new, state.desired_scale), y)
    be = mul(state.beta, e)
    for k in range(state.cfg.order):
        state.weights[k] = add(state.weights[k], mul(be, sx[k]))
    return e, y


class SeriesDatapath:
    """Serial schedule: 2m + 1 cycles per sample, one MAC lane.

    Cycle walk for one sample (m = order):

    * cycles 1..m — scale one window tap, multiply by its weight, add into
      the running output; the tap is copied forward one slot (3 ops/cycle).
    * cycle m+1 — scale the desired sample, form the error, compute the
      update gain ``beta*e`` and the first new weight (5 ops).
    * cycles m+2..2m — one multiply-add per remaining weight (2 ops/cycle).
    * cycle 2m+1 — store the last weight; the staged input enters the window
      (no arithmetic).
    """

    def __init__(self, cfg: LmsConfig, backend):
        self.state = LmsState(cfg, backend)
        self.stats = CycleStats(
            cycles_per_sample=2 * cfg.order + 1,
            fpu_instances=SERIES_FPU_INSTANCES,
        )

    def step(self, x_new, d_new):
        st = self.state
        bk = st.backend
        mul, add, sub = bk.mul, bk.add, bk.sub
        m = st.cfg.order
        ops: list[int] = []

        st.staged = x_new
        window = [x_new] + st.window[:-1]

        y = bk.zero
        sx = []
        for k in range(m):  # MAC cycles, window shifting underneath
            xk = mul(window[k], st.input_scale)
            sx.append(xk)
            y = add(y, mul(xk, st.weights[k]))
            ops.append(3)

        d_s = mul(d_new, st.desired_scale)  # error + first-update cycle
        e = sub(d_s, y)
        be = mul(st.beta, e)
        new_w = [add(st.weights[0], mul(be, sx[0]))]
        ops.append(5)

        for k in range(1, m):  # remaining weight updates
            new_w.append(add(st.weights[k], mul(be, sx[k])))
            ops.append(2)

        ops.append(0)  # final store/load cycle
        st.window = window
        st.weights = new_w
        st.desired = d_new
        self.stats.account(ops)
        return e, self.stats


class ParallelDatapath:
    """Fully unrolled schedule: every operation of a sample in one cycle."""

    def __init__(self, cfg: LmsConfig, backend):
        self.state = LmsState(cfg, backend)
        self.stats = CycleStats(
            cycles_per_sample=1,
            fpu_instances=parallel_fpu_instances(cfg.order),
        )

    def step(self, x_new, d_new):
        st = self.state
        bk = st.backend
        mul, add, sub = bk.mul, bk.add, bk.sub
        m = st.cfg.order
        issued = 0

        st.window = [x_new] + st.window[:-1]
        st.desired = d_new

        sx = [mul(x, st.input_scale) for x in st.window]
        issued += m
        y = bk.zero
        for k in range(m):
            y = add(y, mul(sx[k], st.weights[k]))
        issued += 2 * m
        e = sub(mul(d_new, st.desired_scale), y)
        issued += 2
        be = mul(st.beta, e)
        issued += 1
        for k in range(m):
            st.weights[k] = add(st.weights[k], mul(be, sx[k]))
        issued += 2 * m

        self.stats.account([issued])
        return e, self.stats


def make_datapath(arch: str, cfg: LmsConfig, backend):
    if arch == "series":
        return SeriesDatapath(cfg, backend)
    if arch == "parallel":
        return ParallelDatapath(cfg, backend)
    raise ValueError(f"unknown architecture: {arch!r}")


def choose_scale_factor(samples: np.ndarray, target: float = 16.0) -> float:
    """Power-of-two factor bringing the 99th-percentile magnitude near target.

    Powers of two keep the scaling multiplication lossless in binary floating
    point.  ``target`` trades adaptation speed against headroom: the default
    puts QRS deflections around +/-10, fast enough for the fixed step size to
    settle within the convergence budget while staying far from saturation.
    """
    mags = np.abs(np.asarray(samples, dtype=float))
    p99 = float(np.percentile(mags, 99.0)) if len(mags) else 0.0
    if p99 <= 0.0:
        return 1.0
    return 2.0 ** round(math.log2(target / p99))


def run_canceller(
    datapath,
    x_samples,
    d_samples,
    flag_watch: bool = True,
):
    """Drive a datapath over full channels; returns (e_words, first_flag_index).

    ``x_samples``/``d_samples`` are backend-encoded sequences.  When
    ``flag_watch`` is set, the index of the first sample that raised a
    saturation/flush flag is reported (or None).
    """
    backend = datapath.state.backend
    flags = backend.flags
    first_flag = None
    errors = []
    step = datapath.step
    for i, (x, d) in enumerate(zip(x_samples, d_samples)):
        e, _ = step(x, d)
        errors.append(e)
        if flag_watch and first_flag is None and flags.any():
            first_flag = i
    return errors, first_flag
