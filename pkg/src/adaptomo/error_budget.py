"""First-order systematic-error budget of a QWP -> HWP -> PBS measurement chain.

A wave plate with fast axis at ``theta`` and retardance ``delta`` acts as
``R(theta) diag(1, exp(i delta)) R(-theta)``. Light passes the quarter-wave
plate (``theta1``, ``delta1``) first, then the half-wave plate
(``theta2``, ``delta2``), then the PBS whose transmitted (H) port is the
``+1`` outcome. The measured axis is the Bloch vector of the back-propagated
H projector, with the circular component signed so that
``(theta1, theta2) = (0, 22.5 deg)`` gives ``+y``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .qubit import BlochState, PauliAxis, born_probabilities

IDEAL_DELTA1 = math.pi / 2
IDEAL_DELTA2 = math.pi
SOURCES = ("beta", "eta", "phases", "angles")

# (axis, (theta1, theta2)) for the three calibration settings
TABLE_SETTINGS = (
    ((1.0, 0.0, 0.0), (math.radians(45.0), math.radians(22.5))),
    ((0.0, 1.0, 0.0), (0.0, math.radians(22.5))),
    ((0.0, 0.0, 1.0), (0.0, 0.0)),
)

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, 1j], [-1j, 0]], dtype=complex),  # sign fixes the handedness convention
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class ClippedStateWarning(UserWarning):
    """A calibrated Bloch vector fell outside the ball and was scaled back."""


def waveplate(theta: float, delta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([1.0, np.exp(1j * delta)]) @ rot.T


def waveplate_axis(theta1: float, theta2: float, delta1: float = IDEAL_DELTA1,
                   delta2: float = IDEAL_DELTA2) -> PauliAxis:
    """Measured axis ``r`` for plate angles ``theta1`` (QWP) and ``theta2`` (HWP)."""
    chain = waveplate(theta2, delta2) @ waveplate(theta1, delta1)
    psi = chain.conj().T @ np.array([1.0, 0.0])
    r = np.array([np.real(np.vdot(psi, p @ psi)) for p in _PAULI])
    return PauliAxis(r / np.linalg.norm(r))


def axis_derivative_magnitudes(theta1: float, theta2: float) -> tuple[float, float, float, float]:
    """Squared norms of ``dr/d delta1, dr/d delta2, dr/d theta1, dr/d theta2`` at ideal phases."""
    a = 2 * theta1 - 4 * theta2
    return (math.sin(a) ** 2, math.sin(2 * theta2) ** 2, 4 + 4 * math.cos(a) ** 2, 16.0)


def axis_derivatives_fd(theta1: float, theta2: float, delta1: float = IDEAL_DELTA1,
                        delta2: float = IDEAL_DELTA2, step: float = 1e-6) -> np.ndarray:
    """Central-difference derivatives of the axis, rows ordered (delta1, delta2, theta1, theta2)."""
    base = np.array([delta1, delta2, theta1, theta2])

    def axis_at(p):
        return waveplate_axis(p[2], p[3], p[0], p[1]).r

    rows = []
    for k in range(4):
        hi, lo = base.copy(), base.copy()
        hi[k] += step
        lo[k] -= step
        rows.append((axis_at(hi) - axis_at(lo)) / (2 * step))
    return np.array(rows)


def imperfect_expectation(state, axis, beta: float, eta: float) -> float:
    """Measured ``<r.sigma>`` with PBS leakage ``beta`` and efficiency unbalance ``eta`` (first order)."""
    m = float(np.dot(np.asarray(state, dtype=float), np.asarray(axis, dtype=float)))
    p_plus, p_minus = born_probabilities(state, axis)
    return m - 2 * m * beta + 2 * p_plus * p_minus * eta


def measured_expectation(state, theta1, theta2, delta1=IDEAL_DELTA1, delta2=IDEAL_DELTA2,
                         beta=0.0, eta=0.0) -> float:
    """Outcome-frequency difference of the full chain, without the first-order expansion."""
    r = waveplate_axis(theta1, theta2, delta1, delta2).r
    m = float(np.dot(np.asarray(state, dtype=float), r))
    p_plus = 0.5 * (1 + (1 - 2 * beta) * m)
    p_minus = 1 - p_plus
    n_plus = p_plus * (1 + eta)  # eta_+ / eta_- = 1 + eta
    return (n_plus - p_minus) / (n_plus + p_minus)


@dataclass(frozen=True)
class OpticsParams:
    """Chain parameters and their uncertainties (angles and phases in radians)."""

    beta: float = 0.0
    eta: float = 0.0
    delta1: float = IDEAL_DELTA1
    delta2: float = IDEAL_DELTA2
    theta1: float = 0.0
    theta2: float = 0.0
    beta_unc: float = 0.0
    eta_unc: float = 0.0
    delta1_unc: float = 0.0
    delta2_unc: float = 0.0
    theta1_unc: float = 0.0
    theta2_unc: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta < 0.5:
            raise ValueError("beta must lie in [0, 0.5)")
        for name in ("beta_unc", "eta_unc", "delta1_unc", "delta2_unc", "theta1_unc", "theta2_unc"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a non-negative finite number")

    @classmethod
    def reference_defaults(cls) -> OpticsParams:
        """Calibrated setup: extinction ratio 8000, 0.002 unbalance, 0.3 deg phases, 0.1 deg axes."""
        return cls(
            beta=1 / 8000,
            delta1=math.radians(88.7),
            delta2=math.radians(179.9),
            beta_unc=1 / 8000,
            eta_unc=0.002,
            delta1_unc=math.radians(0.3),
            delta2_unc=math.radians(0.3),
            theta1_unc=math.radians(0.1),
            theta2_unc=math.radians(0.1),
        )


@dataclass
class BudgetReport:
    contributions: dict[str, float]
    assumptions: dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return math.fsum(self.contributions.values())


def _setting_sums(settings) -> np.ndarray:
    return np.sum([axis_derivative_magnitudes(*angles) for _, angles in settings], axis=0)


def systematic_budget(params: OpticsParams, s_len: float, settings=TABLE_SETTINGS) -> BudgetReport:
    """Worst-case contributions ``M_zeta^2 (Delta zeta)^2`` summed over the calibration settings."""
    if not 0.0 <= s_len <= 1.0:
        raise ValueError("s_len must lie in [0, 1]")
    sums = _setting_sums(settings)
    k = len(settings)
    contributions = {
        "beta": float(4 * s_len**2 * params.beta_unc**2),
        "eta": float(0.25 * k * params.eta_unc**2),
        "phases": float(sums[0] * params.delta1_unc**2 + sums[1] * params.delta2_unc**2),
        "angles": float(sums[2] * params.theta1_unc**2 + sums[3] * params.theta2_unc**2),
    }
    assumptions = {
        "beta": "M_beta^2 = 4|s|^2 (orthonormal calibration axes)",
        "eta": "(m_eta)^2 = 4 (p+ p-)^2 <= 1/4 per setting",
        "phases": f"(s.r_delta)^2 <= |r_delta|^2; sum over settings = ({sums[0]:g}, {sums[1]:g})",
        "angles": f"(s.r_theta)^2 <= |r_theta|^2; sum over settings = ({sums[2]:g}, {sums[3]:g})",
    }
    return BudgetReport(contributions, assumptions)


def projected_budget(params: OpticsParams, state, settings=TABLE_SETTINGS) -> BudgetReport:
    """State-specific first-order contributions, keeping the ``s . r_zeta`` projections."""
    s = np.asarray(state, dtype=float)
    beta = eta = phases = angles = 0.0
    for _, (t1, t2) in settings:
        r = waveplate_axis(t1, t2).r
        m = float(s @ r)
        p_plus, p_minus = born_probabilities(s, r)
        beta += 4 * m * m * params.beta_unc**2
        eta += 4 * (p_plus * p_minus) ** 2 * params.eta_unc**2
        d = axis_derivatives_fd(t1, t2) @ s
        phases += d[0] ** 2 * params.delta1_unc**2 + d[1] ** 2 * params.delta2_unc**2
        angles += d[2] ** 2 * params.theta1_unc**2 + d[3] ** 2 * params.theta2_unc**2
    values = {"beta": beta, "eta": eta, "phases": phases, "angles": angles}
    return BudgetReport({k: float(v) for k, v in values.items()},
                        {"all": "projected first-order derivatives at the given state"})


def calibrated_state(m_hats, axes=None) -> BlochState:
    """Bloch vector ``sum_j m_j r_j`` from expectations on orthonormal axes, clipped into the ball."""
    m = np.asarray(m_hats, dtype=float)
    r = np.eye(3) if axes is None else np.array([np.asarray(a, dtype=float) for a in axes])
    if m.shape != (3,) or r.shape != (3, 3):
        raise ValueError("need three expectations on three axes")
    if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-9:
        raise ValueError("calibration axes must be orthonormal")
    v = r.T @ m
    norm = np.linalg.norm(v)
    if norm > 1.0:
        warnings.warn(f"calibrated Bloch vector has norm {norm:.6g}; clipped to the sphere",
                      ClippedStateWarning, stacklevel=2)
        v = v / norm
    return BlochState(v)


def monte_carlo_error(params: OpticsParams, state, source: str, draws: int,
                      rng: np.random.Generator, settings=TABLE_SETTINGS) -> tuple[float, float]:
    """Mean and standard error of ``|s_cal - s|^2`` when only ``source`` is perturbed.

    Parameters are drawn from zero-mean Gaussians of the stated widths around
    the ideal chain; the full (not linearized) chain model produces the data.
    """
    s = np.asarray(state, dtype=float)
    axes = [np.array(a) for a, _ in settings]
    errs = np.empty(draws)
    for i in range(draws):
        beta = eta = 0.0
        d1, d2 = IDEAL_DELTA1, IDEAL_DELTA2
        if source == "beta":
            beta = rng.normal(0, params.beta_unc)
        elif source == "eta":
            eta = rng.normal(0, params.eta_unc)
        elif source == "phases":
            d1 += rng.normal(0, params.delta1_unc)
            d2 += rng.normal(0, params.delta2_unc)
        elif source != "angles":
            raise ValueError(f"unknown source {source!r}")
        m_hat = []
        for _, (t1, t2) in settings:
            if source == "angles":
                t1 = t1 + rng.normal(0, params.theta1_unc)
                t2 = t2 + rng.normal(0, params.theta2_unc)
            m_hat.append(measured_expectation(s, t1, t2, d1, d2, beta=beta, eta=eta))
        est = np.array(axes).T @ np.array(m_hat)
        errs[i] = float(np.sum((est - s) ** 2))
    return float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(draws))
