"""Bloch-vector model of a single qubit.

States are real 3-vectors ``s`` with ``|s| <= 1`` standing for
``rho = (1 + s . sigma) / 2``; a two-outcome projective measurement of
``r . sigma`` is described by its unit axis ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

BALL_SLACK = 1e-12
AXIS_TOL = 1e-12
_ROT_TOL = 1e-12


def _as_vec3(value) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a real 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite components")
    return v


@dataclass(frozen=True)
class BlochState:
    """Qubit state in Bloch form; construction rejects ``|s| > 1 + 1e-12``."""

    vector: np.ndarray

    def __post_init__(self):
        v = _as_vec3(self.vector).copy()
        norm = float(np.linalg.norm(v))
        if norm > 1.0 + BALL_SLACK:
            raise ValueError(f"Bloch vector norm {norm!r} exceeds 1")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.vector, dtype=dtype)

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.vector))

    def density_matrix(self) -> np.ndarray:
        x, y, z = self.vector
        return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])

    def __eq__(self, other):
        if not isinstance(other, BlochState):
            return NotImplemented
        return bool(np.array_equal(self.vector, other.vector))

    def __hash__(self):
        return hash(self.vector.tobytes())

    def __repr__(self):
        return f"BlochState({self.vector.tolist()!r})"


@dataclass(frozen=True)
class PauliAxis:
    """Unit vector ``r`` of the observable ``r . sigma``."""

    r: np.ndarray

    def __post_init__(self):
        v = _as_vec3(self.r).copy()
        if abs(np.linalg.norm(v) - 1.0) > AXIS_TOL:
            raise ValueError(f"axis must be a unit vector, got norm {np.linalg.norm(v)!r}")
        v.setflags(write=False)
        object.__setattr__(self, "r", v)

    @classmethod
    def normalized(cls, v) -> PauliAxis:
        v = _as_vec3(v)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / n)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.r, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, PauliAxis):
            return NotImplemented
        return bool(np.array_equal(self.r, other.r))

    def __hash__(self):
        return hash(self.r.tobytes())

    def __repr__(self):
        return f"PauliAxis({self.r.tolist()!r})"


X = PauliAxis([1.0, 0.0, 0.0])
Y = PauliAxis([0.0, 1.0, 0.0])
Z = PauliAxis([0.0, 0.0, 1.0])
STANDARD_AXES = (X, Y, Z)


@dataclass
class MeasurementRecord:
    """Count triples ``(axis, n_plus, n_minus)``; sufficient statistics for the likelihood."""

    entries: list[tuple[PauliAxis, int, int]] = field(default_factory=list)

    def __post_init__(self):
        checked = []
        for entry in self.entries:
            checked.append(self._check(*entry))
        self.entries = checked

    @staticmethod
    def _check(axis, n_plus, n_minus):
        if not isinstance(axis, PauliAxis):
            axis = PauliAxis(axis)
        n_plus, n_minus = int(n_plus), int(n_minus)
        if n_plus < 0 or n_minus < 0:
            raise ValueError("counts must be non-negative")
        return axis, n_plus, n_minus

    def add(self, axis, n_plus: int, n_minus: int) -> None:
        self.entries.append(self._check(axis, n_plus, n_minus))

    def extend(self, other: MeasurementRecord) -> None:
        self.entries.extend(other.entries)

    def __iter__(self) -> Iterator[tuple[PauliAxis, int, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> int:
        return sum(p + m for _, p, m in self.entries)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(axes (k, 3), n_plus (k,), n_minus (k,))`` as float arrays."""
        if not self.entries:
            return np.zeros((0, 3)), np.zeros(0), np.zeros(0)
        axes = np.array([e[0].r for e in self.entries])
        n_plus = np.array([e[1] for e in self.entries], dtype=float)
        n_minus = np.array([e[2] for e in self.entries], dtype=float)
        return axes, n_plus, n_minus


def born_probabilities(state, axis) -> tuple[float, float]:
    """Outcome probabilities ``p_pm = (1 +- s . r) / 2``."""
    m = float(np.dot(np.asarray(state, dtype=float), np.asarray(axis, dtype=float)))
    m = min(1.0, max(-1.0, m))
    p_plus = 0.5 * (1.0 + m)
    return p_plus, 1.0 - p_plus


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2`` of two qubit states."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = max(0.0, 1.0 - float(a @ a))
    nb = max(0.0, 1.0 - float(b @ b))
    f = 0.5 * (1.0 + float(a @ b) + np.sqrt(na * nb))
    return min(1.0, max(0.0, f))


def bures_distance_sq(a, b) -> float:
    """Squared Bures distance ``2 (1 - sqrt(F))``.

    The fidelity is evaluated through a symmetric expression so that
    swapping the arguments cannot change a single bit of the result.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = float(np.sum(a * b))
    na = max(0.0, 1.0 - float(np.sum(a * a)))
    nb = max(0.0, 1.0 - float(np.sum(b * b)))
    f = min(1.0, max(0.0, 0.5 * (1.0 + dot + np.sqrt(na * nb))))
    return max(0.0, 2.0 * (1.0 - np.sqrt(f)))


def rotation_to_z(v) -> np.ndarray:
    """Rotation matrix ``R`` in SO(3) with ``R @ v_hat = z_hat``.

    Uses the smallest rotation, about ``v_hat x z_hat``. The Rodrigues term
    ``K^2 / (1 + cos)`` is evaluated as ``K^2 (1 - cos) / sin^2`` so that it
    stays accurate right up to the poles. Vectors with no transverse part
    map to the identity (+z) or to a half turn about x (-z); the zero vector
    maps to the identity.
    """
    v = _as_vec3(v)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return np.eye(3)
    u = v / norm
    sin2 = u[0] * u[0] + u[1] * u[1]
    if sin2 == 0.0:
        return np.eye(3) if u[2] > 0 else np.diag([1.0, -1.0, -1.0])
    c = float(u[2])
    k = np.array([[0.0, 0.0, -u[0]], [0.0, 0.0, -u[1]], [u[0], u[1], 0.0]])  # [u x z]_x
    one_minus_c = 1.0 - c if c <= 0 else sin2 / (1.0 + c)
    return np.eye(3) + k + (k @ k) * (one_minus_c / sin2)


def is_rotation(r: np.ndarray, tol: float = _ROT_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        return False
    ortho = np.max(np.abs(r.T @ r - np.eye(3)))
    return bool(ortho <= tol and abs(np.linalg.det(r) - 1.0) <= tol)


def sample_counts(state, axis, n: int, rng: np.random.Generator) -> tuple[int, int]:
    """Draw ``(n_plus, n_minus)`` for ``n`` copies measured along ``axis``."""
    n = int(n)
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0, 0
    p_plus, _ = born_probabilities(state, axis)
    n_plus = int(rng.binomial(n, p_plus))
    return n_plus, n - n_plus


def random_state(rng: np.random.Generator, max_radius: float = 1.0) -> BlochState:
    """Uniform sample from the ball of the given radius."""
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return BlochState(v * max_radius * rng.uniform() ** (1 / 3))


def random_axis(rng: np.random.Generator) -> PauliAxis:
    v = rng.normal(size=3)
    return PauliAxis.normalized(v)


def axes_matrix(axes: Iterable) -> np.ndarray:
    return np.array([np.asarray(a, dtype=float) for a in axes]).reshape(-1, 3)


def standard_record(counts: Sequence[tuple[int, int]]) -> MeasurementRecord:
    """Record with ``counts[j]`` on the j-th standard axis (x, y, z)."""
    return MeasurementRecord([(ax, p, m) for ax, (p, m) in zip(STANDARD_AXES, counts)])
