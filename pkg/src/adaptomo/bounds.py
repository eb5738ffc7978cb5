"""Gill-Massar precision limits and the measurements that attain them.

All bounds are *scaled*: the weighted mean square error of ``N`` copies is
bounded by ``bound / N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .estimation import MeasurementEnsemble, quantum_fisher
from .qubit import PauliAxis, rotation_to_z

PSD_CLIP = 1e-12
RADIAL_CLIP = 1.0 - 1e-9


class SingularFisherError(ValueError):
    pass


def _check_radius(s: float, *, open_top: bool = False) -> float:
    s = float(s)
    if not (0.0 <= s <= 1.0) or (open_top and s >= 1.0):
        rng = "[0, 1)" if open_top else "[0, 1]"
        raise ValueError(f"Bloch radius must lie in {rng}, got {s!r}")
    return s


def _sym_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    if np.any(vals < -PSD_CLIP * max(1.0, np.max(np.abs(vals)))):
        raise ValueError(f"matrix is not positive semidefinite (eigenvalues {vals})")
    return np.clip(vals, 0.0, None), vecs


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = _sym_eig(m)
    return (vecs * np.sqrt(vals)) @ vecs.T


def _inv_sqrt(j: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(0.5 * (j + j.T))
    if vals[0] <= 1e-14 * max(1.0, vals[-1]):
        raise SingularFisherError("quantum Fisher matrix is singular")
    root = np.sqrt(vals)
    return (vecs * root) @ vecs.T, (vecs / root) @ vecs.T


def gm_bound_general(weight: np.ndarray, j: np.ndarray, d: int = 2) -> float:
    """``(tr sqrt(J^-1/2 W J^-1/2))**2 / (d - 1)``."""
    _, j_isqrt = _inv_sqrt(np.asarray(j, dtype=float))
    inner = psd_sqrt(j_isqrt @ np.asarray(weight, dtype=float) @ j_isqrt)
    return float(np.trace(inner)) ** 2 / (d - 1)


def gm_fisher_target(weight: np.ndarray, j: np.ndarray, d: int = 2) -> np.ndarray:
    """Fisher matrix a measurement must produce to attain :func:`gm_bound_general`."""
    j_sqrt, j_isqrt = _inv_sqrt(np.asarray(j, dtype=float))
    inner = psd_sqrt(j_isqrt @ np.asarray(weight, dtype=float) @ j_isqrt)
    tr = float(np.trace(inner))
    if tr <= 0:
        raise ValueError("weighting matrix must be non-zero")
    out = (d - 1) * j_sqrt @ inner @ j_sqrt / tr
    return 0.5 * (out + out.T)


def gm_bound_mse(s: float) -> float:
    """Scaled GM bound for the plain mean square error, ``(2 + sqrt(1 - s^2))^2``."""
    s = _check_radius(s)
    return (2.0 + np.sqrt(1.0 - s * s)) ** 2


def standard_mse_theory(s: float) -> float:
    """Scaled MSE of x/y/z tomography with equal shares, ``3 (3 - s^2)``."""
    s = _check_radius(s)
    return 3.0 * (3.0 - s * s)


def optimal_probabilities_diagonal(w, s: float) -> tuple[float, float, float]:
    """Optimal shares for ``W = diag(w)`` in the frame where the Bloch vector is the third axis."""
    s = _check_radius(s)
    w = np.asarray(w, dtype=float)
    if w.shape != (3,) or np.any(w < 0):
        raise ValueError("weights must be three non-negative numbers")
    if not np.any(w > 0):
        raise ValueError("weights must not all be zero")
    amp = np.sqrt(w * np.array([1.0, 1.0, 1.0 - s * s]))
    p = amp / amp.sum()
    return float(p[0]), float(p[1]), float(p[2])


def mc_function(n: int, t: float) -> float:
    """Morozova-Chentsov function ``f_n(t) = ((1 + t^(1/n)) / 2)^n``."""
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return ((1.0 + t ** (1.0 / n)) / 2.0) ** n


def metric_weighting(s: float, n: int) -> tuple[float, float, float]:
    """Diagonal weights of the ``f_n`` monotone metric, Bloch vector on the third axis."""
    s = _check_radius(s, open_top=True)
    t = (1.0 - s) / (1.0 + s)
    transverse = 0.25 / ((1.0 + s) * mc_function(n, t))
    return transverse, transverse, 0.25 / (1.0 - s * s)


def metric_h(s: float, n: int) -> float:
    """``h = [((1+s)^(1/n) + (1-s)^(1/n)) / 2]^(n/2)``, equal to ``sqrt((1+s) f_n(t))``."""
    s = _check_radius(s, open_top=True)
    return (((1.0 + s) ** (1.0 / n) + (1.0 - s) ** (1.0 / n)) / 2.0) ** (n / 2.0)


@dataclass(frozen=True)
class OptimalScheme:
    axes: tuple[PauliAxis, PauliAxis, PauliAxis]
    probabilities: tuple[float, float, float]
    bound: float
    rank_deficient: bool = False

    def ensemble(self) -> MeasurementEnsemble:
        return MeasurementEnsemble([a.r for a in self.axes], list(self.probabilities))


def _frame_axes(state) -> tuple[PauliAxis, PauliAxis, PauliAxis]:
    rot = rotation_to_z(np.asarray(state, dtype=float))
    return tuple(PauliAxis(row / np.linalg.norm(row)) for row in rot)  # rows of R are R^T e_j


def gm_scheme_metric(s: float, n: int, state=None) -> OptimalScheme:
    """Optimal scheme and bound ``(2/h + 1)^2 / 4`` for the ``f_n`` metric at radius ``s``.

    ``state`` (a Bloch vector of length ``s``) only fixes the axes; by
    default the Bloch vector is taken along +z.
    """
    h = metric_h(s, n)
    p = (1.0 / (2.0 + h), 1.0 / (2.0 + h), h / (2.0 + h))
    axes = _frame_axes(state if state is not None else [0.0, 0.0, s])
    return OptimalScheme(axes=axes, probabilities=p, bound=0.25 * (2.0 / h + 1.0) ** 2)


WeightKind = Literal["mse", "metric", "explicit"]


@dataclass(frozen=True)
class WeightingSpec:
    """Figure of merit used to design a measurement.

    ``kind`` is ``"mse"`` (identity weighting), ``"metric"`` (the ``f_n``
    monotone metric with integer ``n``; ``n = 1`` is Bures) or
    ``"explicit"`` with a symmetric PSD matrix ``W`` in lab coordinates.
    """

    kind: WeightKind = "mse"
    n: int | None = None
    W: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "mse":
            pass
        elif self.kind == "metric":
            if self.n is None or int(self.n) != self.n or self.n < 1:
                raise ValueError("metric weighting needs a positive integer n")
            object.__setattr__(self, "n", int(self.n))
        elif self.kind == "explicit":
            w = np.asarray(self.W, dtype=float)
            if w.shape != (3, 3):
                raise ValueError("explicit weighting must be 3x3")
            if np.max(np.abs(w - w.T)) > 1e-12:
                raise ValueError("explicit weighting must be symmetric")
            if np.linalg.eigvalsh(w)[0] < -1e-10:
                raise ValueError("explicit weighting must be positive semidefinite")
            w = w.copy()
            w.setflags(write=False)
            object.__setattr__(self, "W", w)
        else:
            raise ValueError(f"unknown weighting kind {self.kind!r}")

    @classmethod
    def mse(cls) -> WeightingSpec:
        return cls("mse")

    @classmethod
    def bures(cls) -> WeightingSpec:
        return cls("metric", n=1)

    @classmethod
    def metric(cls, n: int) -> WeightingSpec:
        return cls("metric", n=n)

    @classmethod
    def explicit(cls, w) -> WeightingSpec:
        return cls("explicit", W=np.asarray(w, dtype=float))

    def matrix(self, state) -> np.ndarray:
        """Weighting matrix in lab coordinates at the Bloch vector ``state``."""
        if self.kind == "mse":
            return np.eye(3)
        if self.kind == "explicit":
            return np.array(self.W)
        s = np.asarray(state, dtype=float)
        rot = rotation_to_z(s)
        w = np.array(metric_weighting(float(np.linalg.norm(s)), self.n))
        return (rot.T * w) @ rot

    def to_dict(self) -> dict:
        if self.kind == "mse":
            return {"kind": "mse"}
        if self.kind == "metric":
            return {"kind": "metric", "n": self.n}
        return {"kind": "explicit", "W": np.asarray(self.W).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> WeightingSpec:
        d = dict(d)
        kind = d.pop("kind", "mse")
        allowed = {"mse": set(), "metric": {"n"}, "explicit": {"W"}}.get(kind)
        if allowed is None:
            raise ValueError(f"unknown weighting kind {kind!r}")
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown weighting key: {sorted(extra)[0]}")
        if kind == "explicit":
            return cls.explicit(d.get("W"))
        return cls(kind, n=d.get("n"))


def scheme_probabilities(weighting: WeightingSpec, s: float) -> tuple[float, float, float]:
    """Shares for the axes ``R^T e_j`` (Bloch vector on the third axis). Not for explicit W."""
    s = min(float(s), RADIAL_CLIP)
    if weighting.kind == "mse":
        return optimal_probabilities_diagonal((1.0, 1.0, 1.0), s)
    if weighting.kind == "metric":
        return gm_scheme_metric(s, weighting.n).probabilities
    raise ValueError("explicit weightings have no fixed-frame probabilities; use gm_scheme_general")


def _closest_basis(vecs: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span(vecs) closest (Frobenius) to the coordinate axes it overlaps most."""
    k = vecs.shape[1]
    if k == 3:
        return np.eye(3)
    weight = np.sum(vecs**2, axis=1)  # squared projection of each e_j onto the subspace
    chosen = np.sort(np.argsort(-weight, kind="stable")[:k])
    target = np.eye(3)[:, chosen]
    u, _, vt = np.linalg.svd(vecs.T @ target)
    return vecs @ (u @ vt)


def _order_axes(vecs: np.ndarray) -> np.ndarray:
    """Order columns to their best matching coordinate axes and make that overlap positive."""
    best_perm, best_score = None, -1.0
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        score = sum(vecs[j, perm[j]] ** 2 for j in range(3))
        if score > best_score + 1e-13:
            best_perm, best_score = perm, score
    out = vecs[:, best_perm].copy()
    for j in range(3):
        if out[j, j] < 0 or (out[j, j] == 0 and out[np.argmax(np.abs(out[:, j])), j] < 0):
            out[:, j] = -out[:, j]
    return out


def gm_scheme_general(weighting: WeightingSpec, state, degeneracy_tol: float = 1e-8) -> OptimalScheme:
    """Attaining three-axis scheme for any weighting at ``state``.

    The axes are the eigenvectors ``r_j`` of the target Fisher matrix
    ``I_W`` (eigenvalues ``a_j``), measured with probabilities
    ``a_j (1 - (s . r_j)^2)``. Within degenerate eigenspaces the basis is
    taken as close as possible to the coordinate axes.
    """
    s = np.asarray(state, dtype=float)
    j = quantum_fisher(s)
    w = weighting.matrix(s)
    target = gm_fisher_target(w, j)
    bound = gm_bound_general(w, j)
    vals, vecs = np.linalg.eigh(target)
    scale = max(1.0, float(np.max(np.abs(vals))))
    groups: list[list[int]] = []
    for i in range(3):
        if groups and abs(vals[i] - vals[groups[-1][-1]]) <= degeneracy_tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    basis = np.empty((3, 3))
    for g in groups:
        basis[:, g] = _closest_basis(vecs[:, g])
    basis = _order_axes(basis)
    a = np.einsum("ij,ik,kj->j", basis, target, basis)
    overlaps = basis.T @ s
    p = np.clip(a * (1.0 - overlaps**2), 0.0, None)
    p = p / p.sum()
    axes = tuple(PauliAxis(basis[:, k] / np.linalg.norm(basis[:, k])) for k in range(3))
    rank_deficient = bool(np.any(p <= 1e-12))
    return OptimalScheme(axes=axes, probabilities=tuple(float(x) for x in p), bound=bound,
                         rank_deficient=rank_deficient)


def scheme_for(weighting: WeightingSpec, state) -> OptimalScheme:
    """Scheme to use in step 2 or known-state runs; closed forms where they exist."""
    s = np.asarray(state, dtype=float)
    radius = float(np.linalg.norm(s))
    if weighting.kind == "explicit":
        if radius > RADIAL_CLIP:
            s = s * (RADIAL_CLIP / radius)
        return gm_scheme_general(weighting, s)
    probs = scheme_probabilities(weighting, radius)
    r = min(radius, RADIAL_CLIP)
    if weighting.kind == "mse":
        bound = gm_bound_mse(r)
    else:
        bound = gm_scheme_metric(r, weighting.n).bound
    return OptimalScheme(axes=_frame_axes(s), probabilities=probs, bound=bound)


def gm_bound_for(weighting: WeightingSpec, state) -> float:
    s = np.asarray(state, dtype=float)
    if weighting.kind == "mse":
        return gm_bound_mse(float(np.linalg.norm(s)))
    if weighting.kind == "metric":
        return gm_scheme_metric(float(np.linalg.norm(s)), weighting.n).bound
    return gm_bound_general(weighting.matrix(s), quantum_fisher(s))
