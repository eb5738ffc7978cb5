"""Fisher information, the Gill-Massar trace and constrained maximum likelihood."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .qubit import BlochState, MeasurementRecord, PauliAxis

BOUNDARY_TOL = 1e-9
FEASIBLE_RADIUS = 1.0 - 1e-12
INIT_RADIUS = 0.999
GRAD_TOL = 1e-10
MAX_ITER = 10_000


class BoundaryStateError(ValueError):
    """Raised when the quantum Fisher matrix is requested on the pure-state sphere."""


class DeterministicOutcomeError(ValueError):
    """Raised when a weighted axis has a (numerically) certain outcome."""


class EmptyRecordError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Axes measured with probabilities ``weights``.

    Sub-normalized ensembles (``sum(weights) < 1``) describe discarded copies.
    """

    axes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        axes = np.array([np.asarray(a, dtype=float) for a in self.axes], dtype=float).reshape(-1, 3)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(axes) != len(weights):
            raise ValueError("axes and weights differ in length")
        if np.any(np.abs(np.linalg.norm(axes, axis=1) - 1.0) > 1e-12):
            raise ValueError("ensemble axes must be unit vectors")
        if np.any(weights < 0):
            raise ValueError("ensemble weights must be non-negative")
        if weights.sum() > 1.0 + 1e-12:
            raise ValueError(f"ensemble weights sum to {weights.sum()!r} > 1")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[PauliAxis, float]]) -> MeasurementEnsemble:
        return cls([np.asarray(a, dtype=float) for a, _ in pairs], [w for _, w in pairs])

    @classmethod
    def mub(cls) -> MeasurementEnsemble:
        return cls(np.eye(3), np.full(3, 1 / 3))

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


def quantum_fisher(state) -> np.ndarray:
    """SLD quantum Fisher matrix in Bloch coordinates, ``J = I + s s^T / (1 - |s|^2)``."""
    s = np.asarray(state, dtype=float)
    s2 = float(s @ s)
    if np.sqrt(s2) >= 1.0 - BOUNDARY_TOL:
        raise BoundaryStateError(f"quantum Fisher information diverges at |s| = {np.sqrt(s2)!r}")
    return np.eye(3) + np.outer(s, s) / (1.0 - s2)


def inverse_quantum_fisher(state) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    return np.eye(3) - np.outer(s, s)


def fisher_information(state, ensemble: MeasurementEnsemble) -> np.ndarray:
    """Classical Fisher matrix per copy: ``sum_k q_k r_k r_k^T / (1 - (s . r_k)^2)``."""
    s = np.asarray(state, dtype=float)
    out = np.zeros((3, 3))
    for r, q in zip(ensemble.axes, ensemble.weights):
        if q == 0:
            continue
        m = float(s @ r)
        if abs(m) >= 1.0 - BOUNDARY_TOL:
            raise DeterministicOutcomeError(f"axis {r.tolist()} has s.r = {m!r}")
        out += q * np.outer(r, r) / (1.0 - m * m)
    return out


def gm_trace(state, ensemble: MeasurementEnsemble) -> float:
    """``tr(J^-1 I)``; at most ``d - 1 = 1`` for any single-copy qubit measurement."""
    info = fisher_information(state, ensemble)
    return float(np.trace(inverse_quantum_fisher(state) @ info))


# ---------------------------------------------------------------------------
# maximum likelihood


def log_likelihood(s, record: MeasurementRecord) -> float:
    axes, n_plus, n_minus = record.arrays()
    return _loglik(np.asarray(s, dtype=float), axes, n_plus, n_minus)


def _loglik(s, axes, n_plus, n_minus) -> float:
    m = axes @ s
    total = 0.0
    for npl, nmi, mk in zip(n_plus, n_minus, m):
        if npl:
            total += npl * np.log(0.5 * (1.0 + mk))
        if nmi:
            total += nmi * np.log(0.5 * (1.0 - mk))
    return float(total)


@dataclass
class MLEResult:
    state: BlochState
    log_likelihood: float
    iterations: int
    converged: bool
    projected_gradient_norm: float
    history: list[float] = field(default_factory=list)


def _measured_basis(axes: np.ndarray) -> np.ndarray:
    """Orthonormal basis (3, k) of the span of the measured axes."""
    _, sv, vt = np.linalg.svd(axes, full_matrices=False)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
    return vt[:rank].T


def _linear_inversion(axes, n_plus, n_minus) -> np.ndarray:
    n = n_plus + n_minus
    sw = np.sqrt(n)
    m_hat = (n_plus - n_minus) / n
    # minimum-norm weighted least squares: unmeasured directions come out zero
    sol, *_ = np.linalg.lstsq(axes * sw[:, None], m_hat * sw, rcond=1e-10)
    norm = np.linalg.norm(sol)
    if norm > INIT_RADIUS:
        sol *= INIT_RADIUS / norm
    return sol


def _project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    n = np.linalg.norm(x)
    return x if n <= radius else x * (radius / n)


def _ball_newton_point(x, g, neg_h, radius):
    """Maximizer of the quadratic model ``g.(y-x) - (y-x)^T neg_h (y-x) / 2`` over the ball."""
    c = g + neg_h @ x
    mu, vecs = np.linalg.eigh(neg_h)
    coeff = vecs.T @ c
    y0 = vecs @ (coeff / mu)
    if np.linalg.norm(y0) <= radius:
        return y0

    def excess(lam):
        return float(np.linalg.norm(coeff / (mu + lam))) - radius

    hi = max(1.0, float(np.linalg.norm(c)) / radius)
    while excess(hi) > 0:
        hi *= 2.0
    lam = brentq(excess, 0.0, hi, xtol=1e-14 * hi, rtol=4e-16, maxiter=200)
    y = vecs @ (coeff / (mu + lam))
    return _project_ball(y, radius)


def _projected_gradient_norm(x, g, radius) -> float:
    n = np.linalg.norm(x)
    if n >= radius * (1.0 - 1e-9) and n > 0:
        u = x / n
        outward = float(g @ u)
        if outward > 0:
            return float(np.linalg.norm(g - outward * u))
    return float(np.linalg.norm(g))


def maximize_likelihood(
    record: MeasurementRecord,
    *,
    grad_tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> MLEResult:
    """Maximize the two-outcome multinomial log-likelihood over the Bloch ball.

    Each iteration proposes the ball-constrained Newton point of the local
    quadratic model and falls back to a radially projected gradient step;
    either proposal is accepted only through a backtracking search that
    never lowers the likelihood. Directions outside the span of the
    measured axes are fixed at zero.
    """
    axes, n_plus, n_minus = record.arrays()
    keep = (n_plus + n_minus) > 0
    if not np.any(keep):
        raise EmptyRecordError("measurement record holds no counts")
    axes, n_plus, n_minus = axes[keep], n_plus[keep], n_minus[keep]

    basis = _measured_basis(axes)
    a = axes @ basis  # axes expressed in the measured subspace
    radius = FEASIBLE_RADIUS

    def value(x):
        return _loglik(x, a, n_plus, n_minus)

    def grad_hess(x):
        m = a @ x
        up, dn = 1.0 + m, 1.0 - m
        w1 = n_plus / up - n_minus / dn
        w2 = n_plus / up**2 + n_minus / dn**2
        return a.T @ w1, (a * w2[:, None]).T @ a

    x = basis.T @ _linear_inversion(axes, n_plus, n_minus)
    x = _project_ball(x, radius)
    f = value(x)
    history = [f]
    pg = np.inf
    converged = False
    stalled = 0
    it = 0
    for it in range(1, max_iter + 1):
        g, neg_h = grad_hess(x)
        pg = _projected_gradient_norm(x, g, radius)
        if pg <= grad_tol:
            converged = True
            it -= 1
            break
        accepted = False
        proposals = []
        try:
            proposals.append(_ball_newton_point(x, g, neg_h, radius))
        except (np.linalg.LinAlgError, ValueError):
            pass
        step = 1.0 / max(float(np.linalg.eigvalsh(neg_h)[-1]), 1e-300)
        proposals.append(_project_ball(x + step * g, radius))
        for y in proposals:
            d = y - x
            slope = float(g @ d)
            if not np.all(np.isfinite(d)) or slope <= 0:
                continue
            t = 1.0
            for _ in range(60):
                x_new = x + t * d
                f_new = value(x_new)
                gain = 1e-4 * t * slope
                roundoff = 8 * np.finfo(float).eps * max(1.0, abs(f))
                if f_new >= f + gain or (gain < roundoff and f_new >= f):
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            # no feasible ascent left at working precision
            converged = pg <= max(grad_tol, 1e-8 * max(1.0, float(np.sum(n_plus + n_minus))))
            break
        stalled = stalled + 1 if f_new <= f else 0
        x, f = x_new, f_new
        history.append(f)
        if callback is not None:
            callback(it, basis @ x, f)
        if stalled >= 3:
            converged = pg <= max(grad_tol, 1e-8 * max(1.0, float(np.sum(n_plus + n_minus))))
            break

    s = basis @ x
    return MLEResult(
        state=BlochState(s),
        log_likelihood=f,
        iterations=it,
        converged=converged,
        projected_gradient_norm=pg,
        history=history,
    )


def mle(record: MeasurementRecord) -> BlochState:
    """Maximum-likelihood Bloch vector for ``record``."""
    return maximize_likelihood(record).state
