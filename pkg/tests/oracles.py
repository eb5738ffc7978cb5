"""Brute-force reference computations, independent of the package internals."""

import numpy as np


def born(s, r):
    m = float(np.dot(s, r))
    return np.array([(1 + m) / 2, (1 - m) / 2])


def fd_fisher(s, axes, weights, step=1e-5):
    """Fisher matrix from central differences of the outcome probabilities."""
    s = np.asarray(s, dtype=float)
    out = np.zeros((3, 3))
    for r, q in zip(axes, weights):
        p = born(s, r)
        grads = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            grads.append((born(s + e, r) - born(s - e, r)) / (2 * step))
        g = np.array(grads)  # (3 params, 2 outcomes)
        out += q * (g / p) @ g.T
    return out


def loglik(s, axes, counts):
    total = 0.0
    for r, (n_plus, n_minus) in zip(axes, counts):
        m = float(np.dot(s, r))
        if n_plus:
            total += n_plus * np.log((1 + m) / 2)
        if n_minus:
            total += n_minus * np.log((1 - m) / 2)
    return total


def _axis_term(n_plus, n_minus, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(n_plus > 0, n_plus * np.log((1 + m) / 2), 0.0)
        b = np.where(n_minus > 0, n_minus * np.log((1 - m) / 2), 0.0)
    return a + b


def grid_max_loglik(axes, counts, step=1e-3):
    """Largest log-likelihood over feasible points of a grid.

    The first two expectations ``m_k = s . r_k`` run over a grid of spacing
    ``step``; the third is set to its best feasible value given the first
    two (the likelihood is concave in it and the feasible set is an
    interval). Axes must be three linearly independent vectors, so the map
    ``s -> m`` is invertible. Every point examined lies in the ball of
    radius ``1 - 1e-12``, so the result is a lower bound for the true maximum.
    """
    a = np.asarray(axes, dtype=float)
    counts = np.asarray(counts, dtype=float)
    inv = np.linalg.inv(a)  # s = inv @ m
    grid = np.arange(-1.0, 1.0 + step / 2, step)
    grid = np.clip(grid, -1.0, 1.0)
    m1, m2 = np.meshgrid(grid, grid, indexing="ij")
    # |inv @ m|^2 <= rho^2 is a quadratic in m3: A m3^2 + 2 B m3 + C <= 0
    rho = 1.0 - 1e-12
    c0, c1, c2 = inv[:, 0], inv[:, 1], inv[:, 2]
    qa = c2 @ c2
    qb = m1 * (c0 @ c2) + m2 * (c1 @ c2)
    qc = m1 * m1 * (c0 @ c0) + 2 * m1 * m2 * (c0 @ c1) + m2 * m2 * (c1 @ c1) - rho * rho
    disc = qb * qb - qa * qc
    ok = disc >= 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    lo = (-qb - root) / qa
    hi = (-qb + root) / qa
    n3p, n3m = counts[2]
    tot = n3p + n3m
    unconstrained = (n3p - n3m) / tot if tot > 0 else 0.0
    m3 = np.clip(np.clip(unconstrained, lo, hi), -rho, rho)
    t1 = _axis_term(counts[0, 0], counts[0, 1], grid)
    t2 = _axis_term(counts[1, 0], counts[1, 1], grid)
    ll = t1[:, None] + t2[None, :] + _axis_term(n3p, n3m, m3)
    ok &= np.abs(m1) < 1.0
    ok &= np.abs(m2) < 1.0
    ll = np.where(ok, ll, -np.inf)
    i = np.unravel_index(int(np.argmax(ll)), ll.shape)
    s = inv @ np.array([m1[i], m2[i], m3[i]])
    assert np.linalg.norm(s) <= 1.0
    return float(ll[i])


def sphere_max_loglik(axes, counts, step=1e-3):
    """Maximum over the unit sphere on a (polar, azimuth) grid of spacing ``step`` radians."""
    theta = np.arange(0, np.pi + step / 2, step)
    phi = np.arange(0, 2 * np.pi, step)
    best = -np.inf
    arg = None
    for t in np.array_split(theta, 20):
        tt, pp = np.meshgrid(t, phi, indexing="ij")
        s = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], -1).reshape(-1, 3)
        s *= 1 - 1e-12
        m = s @ np.asarray(axes, dtype=float).T
        ll = sum(_axis_term(n_p, n_m, m[:, k]) for k, (n_p, n_m) in enumerate(counts))
        i = int(np.argmax(ll))
        if ll[i] > best:
            best, arg = float(ll[i]), s[i]
    return best, arg
