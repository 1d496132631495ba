"""Laplacian spectra of bipartite topologies.

The eigensolvers here are self-contained: a cyclic Jacobi rotation method for
small matrices and, for the layer-sized Laplacians (up to ~1300 vertices),
Householder tridiagonalisation followed by Sturm-sequence bisection.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from sparsenet.topology import BipartiteTopology

JACOBI_MAX_N = 64


class EigenError(ArithmeticError):
    pass


class NotSymmetricError(EigenError, ValueError):
    pass


class NoConvergenceError(EigenError):
    pass


def build_laplacian(t: BipartiteTopology) -> np.ndarray:
    """L = D - A on the union graph; left vertices first, right vertices offset by n."""
    size = t.n + t.m
    lap = np.zeros((size, size))
    e = t.edges()
    left, right = e[:, 0], e[:, 1] + t.n
    lap[left, right] = -1.0
    lap[right, left] = -1.0
    idx = np.arange(size)
    lap[idx, idx] = np.concatenate([t.row_degrees(), t.col_degrees()]).astype(float)
    return lap


def _check_symmetric(M) -> np.ndarray:
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size and np.max(np.abs(M - M.T)) > 1e-12:
        raise NotSymmetricError("matrix is not symmetric within 1e-12")
    return 0.5 * (M + M.T)


def jacobi_eigenvalues(M, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Cyclic Jacobi: sweep all (p, q) pairs until the off-diagonal norm < tol * ||M||_F."""
    a = _check_symmetric(M)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    target = tol * np.linalg.norm(a)
    for _ in range(max_sweeps):
        # summed directly; sum(a*a) - sum(diag**2) cancels catastrophically
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= target:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
    raise NoConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def tridiagonalize(M) -> tuple:
    """Householder reduction of a symmetric matrix to (diagonal, off-diagonal)."""
    a = _check_symmetric(M)
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm2 = v @ v
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        sub = a[k + 1 :, k + 1 :]
        p = beta * (sub @ v)
        w = p - (0.5 * beta * (v @ p)) * v
        sub -= np.outer(v, w)
        sub -= np.outer(w, v)
        a[k + 1, k] = a[k, k + 1] = alpha
        a[k + 2 :, k] = 0.0
        a[k, k + 2 :] = 0.0
    return np.diag(a).copy(), np.diag(a, 1).copy()


def _sturm_count(diag, off2, x) -> np.ndarray:
    """Number of eigenvalues of the tridiagonal matrix strictly below each entry of x."""
    count = np.zeros(x.shape, dtype=np.int64)
    # pivot floor as in LAPACK's dstebz; keeps off2 / d finite
    pivmin = np.finfo(float).tiny * max(1.0, float(off2.max()) if off2.size else 1.0)
    d = diag[0] - x
    d = np.where(np.abs(d) < pivmin, -pivmin, d)
    count += d < 0
    for i in range(1, diag.size):
        d = (diag[i] - x) - off2[i - 1] / d
        d = np.where(np.abs(d) < pivmin, -pivmin, d)
        count += d < 0
    return count


def tridiagonal_eigenvalues(diag, off, rtol: float = 1e-15) -> np.ndarray:
    """All eigenvalues of a symmetric tridiagonal matrix by vectorised bisection."""
    diag = np.asarray(diag, dtype=np.float64)
    off = np.asarray(off, dtype=np.float64)
    n = diag.size
    if n == 0:
        return np.zeros(0)
    radius = np.abs(np.concatenate([[0.0], off])) + np.abs(np.concatenate([off, [0.0]]))
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    scale = max(abs(lo), abs(hi), 1.0)
    lo -= 1e-12 * scale
    hi += 1e-12 * scale
    off2 = off * off
    lower = np.full(n, lo)
    upper = np.full(n, hi)
    index = np.arange(n)
    stop = 4.0 * np.finfo(float).eps * scale + rtol * scale
    for _ in range(200):
        if np.max(upper - lower) <= stop:
            break
        mid = 0.5 * (lower + upper)
        below = _sturm_count(diag, off2, mid)
        # eigenvalue #index lies below mid iff more than index eigenvalues are below mid
        go_left = below > index
        upper = np.where(go_left, mid, upper)
        lower = np.where(go_left, lower, mid)
    else:
        raise NoConvergenceError("bisection did not converge")
    return 0.5 * (lower + upper)


def eigenvalues_symmetric(M, method: str = "auto") -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix.

    ``method`` is ``"jacobi"``, ``"tridiagonal"`` or ``"auto"`` (Jacobi up to
    64 x 64, tridiagonal bisection above).
    """
    a = _check_symmetric(M)
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_N else "tridiagonal"
    if method == "jacobi":
        return jacobi_eigenvalues(a)
    if method == "tridiagonal":
        d, e = tridiagonalize(a)
        return tridiagonal_eigenvalues(d, e)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple
    algebraic_connectivity_standard: float
    largest_nonzero: float
    second_largest_nonzero: float
    component_count: int
    zero_tolerance: float

    def to_dict(self, with_eigenvalues: bool = False) -> dict:
        d = asdict(self)
        if not with_eigenvalues:
            d.pop("eigenvalues")
        return d


def report_from_eigenvalues(eigs) -> SpectralReport:
    eigs = np.sort(np.asarray(eigs, dtype=np.float64))
    top = float(eigs[-1]) if eigs.size else 0.0
    tol = 1e-8 * (top if top > 0 else 1.0)
    nonzero = eigs[eigs > tol]
    lam2 = float(eigs[1]) if eigs.size > 1 else 0.0
    components = int(np.sum(eigs < tol))
    if components > 1:
        # round-off from a repeated zero eigenvalue is not connectivity
        lam2 = 0.0
    return SpectralReport(
        eigenvalues=tuple(float(v) for v in eigs),
        algebraic_connectivity_standard=lam2,
        largest_nonzero=float(nonzero[-1]) if nonzero.size else 0.0,
        second_largest_nonzero=float(nonzero[-2]) if nonzero.size > 1 else 0.0,
        component_count=components,
        zero_tolerance=tol,
    )


def analyze(t: BipartiteTopology, method: str = "auto") -> SpectralReport:
    return report_from_eigenvalues(eigenvalues_symmetric(build_laplacian(t), method=method))


REPORT_CSV_COLUMNS = (
    "construction",
    "n",
    "m",
    "k",
    "seed",
    "component_count",
    "lambda2",
    "second_largest_nonzero",
    "largest_nonzero",
)


def report_csv_row(t: BipartiteTopology, r: SpectralReport) -> dict:
    return {
        "construction": t.construction,
        "n": t.n,
        "m": t.m,
        "k": "" if t.k is None else t.k,
        "seed": "" if t.seed is None else t.seed,
        "component_count": r.component_count,
        "lambda2": repr(r.algebraic_connectivity_standard),
        "second_largest_nonzero": repr(r.second_largest_nonzero),
        "largest_nonzero": repr(r.largest_nonzero),
    }
