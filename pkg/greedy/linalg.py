"""
Small dense kernels kept in-repo so oracle values are bit-reproducible.

  householder_qr       — thin QR that skips numerically dependent columns
  back_substitute      — upper-triangular solve
  solve_partial_pivot  — Gaussian elimination with row pivoting
  jacobi_eigh          — cyclic Jacobi eigen-decomposition of a symmetric matrix
  jacobi_svd           — one-sided (Hestenes) Jacobi SVD

Sizes in this project are tiny (≤ 64), so clarity wins over blocking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from greedy.errors import SingularSystemError

logger = logging.getLogger(__name__)

_RANK_TOL      = 1e-10
_PIVOT_TOL     = 1e-12
_JACOBI_TOL    = 1e-15
_SVD_TOL       = 1e-14
_MAX_SWEEPS    = 100


@dataclass
class QRResult:
    q:           np.ndarray          # (m, r) orthonormal columns
    r:           np.ndarray          # (r, r) upper triangular
    independent: List[int]           # original column indices kept, in order
    dependent:   List[int]           # columns dropped as dependent

    @property
    def rank(self) -> int:
        return len(self.independent)


def householder_qr(a: np.ndarray, tol: float = _RANK_TOL) -> QRResult:
    """
    Thin Householder QR of the columns of *a*, processed left to right.

    A column whose component orthogonal to the already accepted columns is
    at most ``tol`` times its own norm is reported as dependent and gets no
    reflector, so ``a[:, independent] = q @ r``.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2:
        raise ValueError("householder_qr expects a 2-D array")
    m, k = a.shape
    work = a.copy()
    reflectors: list[tuple[int, np.ndarray]] = []
    keep: list[int] = []
    drop: list[int] = []
    row = 0

    for j in range(k):
        col_norm = float(np.linalg.norm(a[:, j]))
        if row >= m or col_norm == 0.0:
            drop.append(j)
            continue
        x = work[row:, j]
        alpha = float(np.linalg.norm(x))
        if alpha <= tol * col_norm:
            drop.append(j)
            continue
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        work[row:, j:] -= 2.0 * np.outer(v, v @ work[row:, j:])
        reflectors.append((row, v))
        keep.append(j)
        row += 1

    q = np.eye(m)[:, :row]
    for start, v in reversed(reflectors):
        q[start:, :] -= 2.0 * np.outer(v, v @ q[start:, :])
    r = np.triu(work[:row, keep]) if keep else np.zeros((0, 0))
    return QRResult(q=q, r=r, independent=keep, dependent=drop)


def back_substitute(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve r x = b for upper-triangular *r*."""
    n = r.shape[0]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1:] @ x[i + 1:]) / r[i, i]
    return x


def solve_partial_pivot(
    a: np.ndarray,
    b: np.ndarray,
    pivot_tol: float = _PIVOT_TOL,
) -> np.ndarray:
    """
    Solve a x = b by Gaussian elimination with partial pivoting.

    Raises
    ------
    SingularSystemError
        When the largest available pivot in some column is below *pivot_tol*.
    """
    m = np.array(a, dtype=float, copy=True)
    rhs = np.array(b, dtype=float, copy=True)
    n = m.shape[0]
    if m.shape != (n, n) or rhs.shape[0] != n:
        raise ValueError(f"incompatible system shapes {m.shape} and {rhs.shape}")

    for col in range(n):
        piv = col + int(np.argmax(np.abs(m[col:, col])))
        pivot = m[piv, col]
        if abs(pivot) < pivot_tol:
            raise SingularSystemError(
                f"pivot {abs(pivot):.3e} below {pivot_tol:.0e} in column {col}",
                pivot=abs(pivot),
            )
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
            rhs[[col, piv]] = rhs[[piv, col]]
        factors = m[col + 1:, col] / pivot
        m[col + 1:, col:] -= np.outer(factors, m[col, col:])
        rhs[col + 1:] -= factors * rhs[col]

    return back_substitute(m, rhs)


def jacobi_eigh(
    s: np.ndarray,
    tol: float = _JACOBI_TOL,
    max_sweeps: int = _MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns
    -------
    (eigenvalues ascending, eigenvectors as columns)
    """
    a = np.array(s, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)

    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    else:
        logger.warning("jacobi_eigh: no convergence after %d sweeps", max_sweeps)

    eig = np.diag(a).copy()
    order = np.argsort(eig, kind="stable")
    return eig[order], v[:, order]


def jacobi_svd(
    a: np.ndarray,
    tol: float = _SVD_TOL,
    max_sweeps: int = _MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Thin SVD a = u diag(s) vt by one-sided Jacobi rotations on columns.

    Singular values are returned in descending order.  Columns of ``u``
    belonging to zero singular values are zero.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] < a.shape[1]:
        u, s, vt = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return vt.T, s, u.T

    w = a.copy()
    n = w.shape[1]
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = float(w[:, i] @ w[:, i])
                beta = float(w[:, j] @ w[:, j])
                gamma = float(w[:, i] @ w[:, j])
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                wi = w[:, i].copy()
                wj = w[:, j].copy()
                w[:, i] = c * wi - sn * wj
                w[:, j] = sn * wi + c * wj
                vi = v[:, i].copy()
                vj = v[:, j].copy()
                v[:, i] = c * vi - sn * vj
                v[:, j] = sn * vi + c * vj
        if not rotated:
            break
    else:
        logger.warning("jacobi_svd: no convergence after %d sweeps", max_sweeps)

    s = np.linalg.norm(w, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    cutoff = (s[0] if s.size else 0.0) * np.finfo(float).eps * max(a.shape)
    nz = s > cutoff
    u[:, nz] = w[:, nz] / s[nz]
    s = np.where(nz, s, 0.0)
    return u, s, v.T
