"""Standard, two-step adaptive and known-state tomography on simulated data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .bounds import WeightingSpec, scheme_for
from .estimation import mle
from .qubit import STANDARD_AXES, BlochState, MeasurementRecord, PauliAxis, sample_counts

Allocation = Literal["deterministic", "multinomial"]
MleData = Literal["both-steps", "step2-only"]
KINDS = ("standard", "adaptive", "known-state")


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "standard"
    N: int = 9000
    N1: int | None = None
    weighting: WeightingSpec = field(default_factory=WeightingSpec.mse)
    allocation: Allocation = "deterministic"
    mle_data: MleData = "both-steps"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if int(self.N) != self.N or self.N <= 0:
            raise ValueError("N must be a positive integer")
        if self.kind == "adaptive":
            if self.N1 is None or int(self.N1) != self.N1 or not 0 < self.N1 < self.N:
                raise ValueError("adaptive strategy needs an integer 0 < N1 < N")
        if self.kind == "standard" and self.N < 3:
            raise ValueError("standard tomography needs N >= 3")
        if self.allocation not in ("deterministic", "multinomial"):
            raise ValueError(f"unknown allocation policy {self.allocation!r}")
        if self.mle_data not in ("both-steps", "step2-only"):
            raise ValueError(f"unknown mle_data option {self.mle_data!r}")

    @property
    def N2(self) -> int:
        return self.N - (self.N1 or 0) if self.kind == "adaptive" else self.N

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "N": self.N, "weighting": self.weighting.to_dict(),
             "allocation": self.allocation, "mle_data": self.mle_data}
        if self.N1 is not None:
            d["N1"] = self.N1
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StrategyConfig:
        d = dict(d)
        allowed = {"kind", "N", "N1", "weighting", "allocation", "mle_data"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown strategy key: {sorted(extra)[0]}")
        if "weighting" in d:
            d["weighting"] = WeightingSpec.from_dict(d["weighting"])
        return cls(**d)


@dataclass
class TrialResult:
    estimate: BlochState
    records: MeasurementRecord
    effective_axes: list[PauliAxis]
    step1_estimate: BlochState | None = None
    step2_probabilities: tuple[float, float, float] | None = None


def allocate_counts(probabilities: Sequence[float], n: int, policy: Allocation = "deterministic",
                    rng: np.random.Generator | None = None) -> tuple[int, ...]:
    """Split ``n`` copies over the axes.

    ``deterministic`` floors ``n p_j`` and hands the leftover copies to the
    largest fractional parts (ties to the earlier axis); ``multinomial``
    draws the split.
    """
    p = np.asarray(probabilities, dtype=float)
    n = int(n)
    if n < 0:
        raise ValueError("n must be non-negative")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must be non-negative and sum to 1")
    if policy == "multinomial":
        if rng is None:
            raise ValueError("multinomial allocation needs an rng")
        return tuple(int(c) for c in rng.multinomial(n, p / p.sum()))
    if policy != "deterministic":
        raise ValueError(f"unknown allocation policy {policy!r}")
    exact = n * p
    counts = np.floor(exact).astype(int)
    residue = n - int(counts.sum())
    frac = exact - counts
    order = sorted(range(len(p)), key=lambda j: (-frac[j], j))
    for j in order[:residue]:
        counts[j] += 1
    return tuple(int(c) for c in counts)


def _equal_split(n: int) -> tuple[int, int, int]:
    base, rem = divmod(int(n), 3)
    return tuple(base + (1 if j < rem else 0) for j in range(3))


def _measure(state, axes, counts, rng) -> MeasurementRecord:
    rec = MeasurementRecord()
    for ax, n in zip(axes, counts):
        if n > 0:
            rec.add(ax, *sample_counts(state, ax, n, rng))
    return rec


def run_standard(true_state, N: int, rng: np.random.Generator) -> TrialResult:
    """Measure x, y, z on N/3 copies each (leftovers to x, then y) and take the MLE."""
    if N < 3:
        raise ValueError("standard tomography needs N >= 3")
    counts = _equal_split(N)
    rec = MeasurementRecord()
    for ax, n in zip(STANDARD_AXES, counts):
        rec.add(ax, *sample_counts(true_state, ax, n, rng))
    return TrialResult(estimate=mle(rec), records=rec, effective_axes=list(STANDARD_AXES))


def _designed_step(design_state, weighting, n, allocation, true_state, rng):
    scheme = scheme_for(weighting, design_state)
    counts = allocate_counts(scheme.probabilities, n, allocation, rng)
    return scheme, _measure(true_state, scheme.axes, counts, rng)


def run_adaptive(true_state, config: StrategyConfig, rng: np.random.Generator) -> TrialResult:
    """Two-step strategy: standard tomography on N1 copies, then the scheme optimal at that estimate."""
    if config.kind != "adaptive":
        raise ValueError("run_adaptive needs an adaptive StrategyConfig")
    first = run_standard(true_state, config.N1, rng)
    scheme, rec2 = _designed_step(first.estimate, config.weighting, config.N2,
                                  config.allocation, true_state, rng)
    rec = MeasurementRecord(list(first.records.entries) + list(rec2.entries))
    estimate = mle(rec) if config.mle_data == "both-steps" else mle(rec2)
    return TrialResult(estimate=estimate, records=rec, effective_axes=list(scheme.axes),
                       step1_estimate=first.estimate, step2_probabilities=scheme.probabilities)


def run_known_state(true_state, N: int, weighting: WeightingSpec, rng: np.random.Generator,
                    allocation: Allocation = "deterministic") -> TrialResult:
    """Benchmark: the scheme is designed at the true state, the estimate still comes from the data."""
    if N < 1:
        raise ValueError("N must be positive")
    scheme, rec = _designed_step(true_state, weighting, N, allocation, true_state, rng)
    return TrialResult(estimate=mle(rec), records=rec, effective_axes=list(scheme.axes),
                       step2_probabilities=scheme.probabilities)


def run_trial(true_state, config: StrategyConfig, rng: np.random.Generator) -> TrialResult:
    if config.kind == "standard":
        return run_standard(true_state, config.N, rng)
    if config.kind == "adaptive":
        return run_adaptive(true_state, config, rng)
    return run_known_state(true_state, config.N, config.weighting, rng, config.allocation)
