"""Shared test helpers: the brute-force min-norm oracle."""

import itertools

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _simplex_grid(n: int, resolution: int):
    """All weight vectors with entries k/resolution summing to 1."""
    for comp in itertools.combinations(range(resolution + n - 1), n - 1):
        parts = []
        prev = -1
        for c in comp:
            parts.append(c - prev - 1)
            prev = c
        parts.append(resolution + n - 2 - prev)
        yield np.array(parts, dtype=float) / resolution


def brute_force_min_norm(atoms: np.ndarray, resolution: int = 200,
                         n_samples: int = 2000, seed: int = 0) -> float:
    """Independent min-norm oracle: simplex-grid starts + accelerated
    projected-gradient polish.

    The objective ||sum_i w_i a_i||^2 is convex in w, so the polish reaches
    the global minimum from any start; the grid (exact for n <= 3, Dirichlet
    samples above that) only speeds it up.  The polish runs in chunks until
    the objective stops moving, so degenerate hulls still settle.
    """
    P = np.asarray(atoms, dtype=float)
    n = P.shape[0]
    if n == 1:
        return float(np.linalg.norm(P[0]))

    cands = [np.eye(n)[i] for i in range(n)] + [np.full(n, 1.0 / n)]
    if n <= 3:
        cands.extend(_simplex_grid(n, min(resolution, 200)))
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        cands.extend(rng.dirichlet(np.ones(n), size=n_samples))
    C = np.stack(cands)
    vals = np.sum((C @ P) ** 2, axis=1)
    w = C[int(np.argmin(vals))].copy()

    G = P @ P.T
    L = 2.0 * float(np.linalg.eigvalsh(G)[-1]) + 1e-300
    scale2 = max(float(np.max(np.diag(G))), 1e-300)
    # FISTA on the simplex, chunked until the objective settles
    y = w.copy()
    t = 1.0
    q_prev = float(w @ G @ w)
    for _ in range(30):
        for _ in range(150):
            grad = 2.0 * (G @ y)
            w_new = project_simplex(y - grad / L)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = w_new + ((t - 1.0) / t_new) * (w_new - w)
            w, t = w_new, t_new
        q = float(w @ G @ w)
        if q_prev - q <= 1e-12 * scale2:
            break
        q_prev = q
    return float(np.linalg.norm(w @ P))
