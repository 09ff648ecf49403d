"""Dense-matrix primitives underneath every selector in the package.

Matrices are plain float64 numpy arrays. External input is normalized to
column-major (Fortran) layout because every algorithm here sweeps columns;
the layout is an internal detail and never part of the API. All functions
are pure: results are fresh arrays, safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OracleCapError, ValidationError

EPS = float(np.finfo(np.float64).eps)

# Largest min(rows, cols) accepted by jacobi_svd. The one-sided Jacobi sweep
# is a desk-scale verifier, not a production SVD.
JACOBI_CAP = 512


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate external input and return it as a 2-D float64 Fortran array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return np.asfortranarray(arr)


@dataclass(frozen=True)
class QrResult:
    """Economy QR factorization: ``a = q @ r`` with q orthonormal columns.

    q is m x p and r is p x n for p = min(m, n); r is upper triangular with
    nonnegative diagonal.
    """

    q: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class SvdResult:
    """Singular values (nonincreasing, >= 0) and optional singular vectors."""

    singular_values: np.ndarray
    u: np.ndarray | None = None
    vt: np.ndarray | None = None


def _reflect_column(q: np.ndarray, r: np.ndarray, c: int) -> None:
    """Zero r[c+1:, c] with a Householder reflector, forcing r[c, c] >= 0.

    The reflector is absorbed into q from the right so q @ r is invariant.
    """
    x = r[c:, c]
    norm_x = float(np.linalg.norm(x))
    if norm_x > 0.0:
        v = x.copy()
        v[0] += norm_x if v[0] >= 0.0 else -norm_x
        vnorm = float(np.linalg.norm(v))
        if vnorm > 0.0:
            w = v / vnorm
            r[c:, c:] -= np.outer(2.0 * w, w @ r[c:, c:])
            q[:, c:] -= np.outer(q[:, c:] @ w, 2.0 * w)
    r[c + 1:, c] = 0.0
    if r[c, c] < 0.0:
        r[c, c:] *= -1.0
        q[:, c] *= -1.0


def _triangularize(q: np.ndarray, r: np.ndarray, start: int = 0) -> None:
    """Triangularize r in place from column ``start`` on, accumulating into q."""
    rows, cols = r.shape
    for c in range(start, min(rows, cols)):
        _reflect_column(q, r, c)


def householder_qr(a) -> QrResult:
    """Economy QR by Householder reflections with nonnegative R diagonal."""
    a = as_matrix(a)
    m, n = a.shape
    p = min(m, n)
    q = np.eye(m, order="F")
    r = a.copy(order="F")
    _triangularize(q, r)
    return QrResult(q=np.ascontiguousarray(q[:, :p]), r=np.ascontiguousarray(r[:p, :]))


def column_pivoted_qr(a) -> tuple[QrResult, np.ndarray]:
    """QR with greedy column pivoting: ``a[:, perm] = q @ r``.

    At every step the pivot maximizes the residual column norm (ties broken
    by the lowest column index), so the diagonal of r is nonincreasing in
    magnitude. Residual norms are recomputed rather than downdated; accuracy
    over asymptotics at this scale.
    """
    a = as_matrix(a)
    m, n = a.shape
    p = min(m, n)
    q = np.eye(m, order="F")
    r = a.copy(order="F")
    perm = np.arange(n)
    for c in range(p):
        norms = np.linalg.norm(r[c:, c:], axis=0)
        piv = c + int(np.argmax(norms))
        if piv != c:
            r[:, [c, piv]] = r[:, [piv, c]]
            perm[[c, piv]] = perm[[piv, c]]
        _reflect_column(q, r, c)
    return QrResult(q=np.ascontiguousarray(q[:, :p]), r=np.ascontiguousarray(r[:p, :])), perm


def jacobi_svd(a, compute_vectors: bool = True, cap: int = JACOBI_CAP,
               tol: float = 1e-15, max_sweeps: int = 60) -> SvdResult:
    """One-sided Jacobi SVD, used as the verification oracle.

    Slow but simple and accurate; refuses inputs with min(m, n) > cap.
    Columns with zero singular value get zero vectors in u.
    """
    a = as_matrix(a)
    m, n = a.shape
    if min(m, n) > cap:
        raise OracleCapError(
            f"jacobi_svd is a desk-scale verifier: min(m, n) = {min(m, n)} exceeds cap {cap}")
    transposed = m < n
    work = np.asfortranarray(a.T.copy()) if transposed else a.copy(order="F")
    wn = work.shape[1]
    v = np.eye(wn, order="F")
    for _ in range(max_sweeps):
        rotated = False
        for i in range(wn - 1):
            for j in range(i + 1, wn):
                ci = work[:, i]
                cj = work[:, j]
                aii = float(ci @ ci)
                ajj = float(cj @ cj)
                aij = float(ci @ cj)
                if abs(aij) <= tol * np.sqrt(aii * ajj):
                    continue
                tau = (ajj - aii) / (2.0 * aij)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + float(np.hypot(1.0, tau)))
                cs = 1.0 / float(np.hypot(1.0, t))
                sn = cs * t
                gi = cs * ci - sn * cj
                gj = sn * ci + cs * cj
                work[:, i] = gi
                work[:, j] = gj
                vi = cs * v[:, i] - sn * v[:, j]
                vj = sn * v[:, i] + cs * v[:, j]
                v[:, i] = vi
                v[:, j] = vj
                rotated = True
        if not rotated:
            break
    sv = np.linalg.norm(work, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    if not compute_vectors:
        return SvdResult(singular_values=sv)
    work = work[:, order]
    v = v[:, order]
    safe = np.where(sv > 0.0, sv, 1.0)
    u_side = work / safe
    u_side[:, sv == 0.0] = 0.0
    if transposed:
        return SvdResult(singular_values=sv, u=v, vt=np.ascontiguousarray(u_side.T))
    return SvdResult(singular_values=sv, u=np.ascontiguousarray(u_side),
                     vt=np.ascontiguousarray(v.T))


def pseudoinverse(a, rel_cutoff: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rel_cutoff`` times the largest are treated as
    zero, which keeps nearly rank-deficient inputs stable.
    """
    a = as_matrix(a)
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = rel_cutoff * (float(sv[0]) if sv.size else 0.0)
    inv = np.where(sv > cutoff, 1.0 / np.where(sv > cutoff, sv, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def numerical_rank(a) -> int:
    """Count singular values above max(m, n) * eps * sigma_1."""
    sv = jacobi_svd(a, compute_vectors=False).singular_values
    if sv.size == 0 or sv[0] <= 0.0:
        return 0
    return int(np.count_nonzero(sv > max(np.asarray(a).shape) * EPS * sv[0]))


def kahan_matrix(n: int, c: float) -> np.ndarray:
    """The standard Kahan upper-triangular family.

    Row i is scaled by s**i with s = sqrt(1 - c**2); the unscaled rows carry
    1 on the diagonal and -c to its right. Every column has unit norm, which
    is what defeats greedy column pivoting.
    """
    if n < 2:
        raise ValidationError(f"kahan_matrix needs n >= 2, got {n}")
    if not 0.0 < c < 1.0:
        raise ValidationError(f"kahan_matrix needs c in (0, 1), got {c}")
    s = np.sqrt(1.0 - c * c)
    base = np.triu(np.full((n, n), -c), 1) + np.eye(n)
    return np.asfortranarray(s ** np.arange(n)[:, None] * base)


def solve_upper_triangular(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back-substitution for a nonsingular upper-triangular r, vectorized over
    the columns of b. Callers are responsible for checking the diagonal."""
    k = r.shape[0]
    x = np.array(b, dtype=np.float64, copy=True)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    for i in range(k - 1, -1, -1):
        if i + 1 < k:
            x[i] -= r[i, i + 1:] @ x[i + 1:]
        x[i] /= r[i, i]
    return x[:, 0] if single else x
