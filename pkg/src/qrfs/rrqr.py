"""Strong rank-revealing QR and the feature selector built on its permutation.

The factorization starts from column-pivoted QR and then performs
determinant-increasing column swaps between the leading k-column block and
the trailing block until no swap can raise |det(R11)| by more than the bound
f. The first k entries of the permutation are the selected features.

A note on the swap criterion: with omega defined as the row norms of
R11^-1 and gamma as the column norms of R22, the squared determinant ratio
for swapping columns i and k+j is

    (R11^-1 R12)[i, j]**2 + (gamma[j] * omega[i])**2

i.e. the product of gamma and omega, which is what makes the criterion equal
the determinant ratio exactly (the identity is enforced by tests).

Per-swap work is O(m n k); swaps re-triangularize from the first disturbed
column instead of applying rank-one updates, trading asymptotic speed for
straight-line correctness at this scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonterminationError, RankDeficiencyError, ValidationError
from .matrix import (as_matrix, column_pivoted_qr, numerical_rank,
                     solve_upper_triangular, _triangularize)


@dataclass(frozen=True)
class RrqrConfig:
    """Knobs for strong_rrqr.

    f must be strictly greater than 1: at f = 1 the swap loop can cycle.
    max_swaps defaults to 4 * n * k at run time.
    """

    k: int
    f: float = 1.1
    max_swaps: int | None = None
    tol_zero: float = 1e-14

    def validate(self, rows: int, cols: int) -> None:
        if not self.f > 1.0:
            raise ValidationError(f"swap bound f must be > 1, got {self.f}")
        if not 1 <= self.k <= min(rows, cols):
            raise ValidationError(
                f"k must satisfy 1 <= k <= min(rows, cols) = {min(rows, cols)}, got {self.k}")
        if self.tol_zero <= 0.0:
            raise ValidationError("tol_zero must be positive")


@dataclass(frozen=True)
class RrqrFactorization:
    """``a[:, perm] = q @ r`` with the strong-RRQR certificate.

    certificate is the largest swap-criterion value over all (i, j) at
    termination; it is <= f**2 (up to roundoff) by construction.
    logdet_trace records log|det(R11)| after initialization and after each
    accepted swap; each swap raises it by more than log(f).
    """

    q: np.ndarray
    r: np.ndarray
    perm: np.ndarray
    k: int
    f: float
    swaps_performed: int
    certificate: float
    logdet_trace: tuple[float, ...]

    @property
    def r11(self) -> np.ndarray:
        return self.r[:self.k, :self.k]

    @property
    def r12(self) -> np.ndarray:
        return self.r[:self.k, self.k:]

    @property
    def r22(self) -> np.ndarray:
        return self.r[self.k:, self.k:]


@dataclass(frozen=True)
class SelectionResult:
    """Ranked feature indices with scores and the method that produced them."""

    selected: tuple[int, ...]
    scores: tuple[float, ...]
    method: str
    params: dict = field(default_factory=dict)
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "scores": list(self.scores),
            "method": self.method,
            "params": dict(self.params),
            "truncated": self.truncated,
        }


def _check_r11_diagonal(r11: np.ndarray, tol_zero: float, partial=None) -> None:
    diag = np.abs(np.diag(r11))
    bad = np.flatnonzero(diag <= tol_zero)
    if bad.size:
        raise RankDeficiencyError(
            f"R11 is numerically singular at diagonal index {int(bad[0])}",
            index=int(bad[0]), partial=partial)


def omega(r11: np.ndarray, tol_zero: float = 1e-14) -> np.ndarray:
    """Euclidean norm of each row of R11^-1.

    Computed by back-substitution against unit vectors; no generic inverse
    routine is involved.
    """
    r11 = np.asarray(r11, dtype=np.float64)
    if r11.ndim != 2 or r11.shape[0] != r11.shape[1]:
        raise ValidationError(f"omega needs a square matrix, got shape {r11.shape}")
    if r11.shape[0] and np.max(np.abs(np.tril(r11, -1))) > 0.0:
        raise ValidationError("omega needs an upper-triangular matrix")
    _check_r11_diagonal(r11, tol_zero)
    inv = solve_upper_triangular(r11, np.eye(r11.shape[0]))
    return np.linalg.norm(inv, axis=1)


def gamma(r22: np.ndarray) -> np.ndarray:
    """Euclidean norm of each column of R22 (zero-row blocks give zeros)."""
    r22 = np.asarray(r22, dtype=np.float64)
    if r22.ndim != 2:
        raise ValidationError(f"gamma needs a 2-D block, got shape {r22.shape}")
    if not np.all(np.isfinite(r22)):
        raise ValidationError("gamma input contains NaN or Inf entries")
    if r22.shape[0] == 0:
        return np.zeros(r22.shape[1])
    return np.linalg.norm(r22, axis=0)


def _criterion_matrix(r: np.ndarray, k: int, tol_zero: float, partial=None) -> np.ndarray:
    """Swap-criterion values for all (i, j); shape (k, n - k)."""
    r11 = r[:k, :k]
    _check_r11_diagonal(r11, tol_zero, partial=partial)
    b = solve_upper_triangular(r11, r[:k, k:])
    om = omega(r11, tol_zero)
    ga = gamma(r[k:, k:])
    return b ** 2 + np.outer(om, ga) ** 2


def swap_criterion(fact: RrqrFactorization, i: int, j: int,
                   tol_zero: float = 1e-14) -> float:
    """Criterion value for swapping column i of the leading block with column
    k + j of the trailing block; its square root equals |det(R11')| / |det(R11)|."""
    k = fact.k
    n = fact.r.shape[1]
    if not 0 <= i < k:
        raise ValidationError(f"i must lie in [0, k), got {i}")
    if not 0 <= j < n - k:
        raise ValidationError(f"j must lie in [0, n - k), got {j}")
    r11 = fact.r11
    _check_r11_diagonal(r11, tol_zero)
    b_col = solve_upper_triangular(r11, fact.r12[:, j])
    om_i = float(omega(r11, tol_zero)[i])
    ga_j = float(gamma(fact.r22)[j]) if fact.r22.shape[1] else 0.0
    return float(b_col[i] ** 2 + (ga_j * om_i) ** 2)


def _logdet_r11(r: np.ndarray, k: int) -> float:
    return float(np.sum(np.log(np.abs(np.diag(r)[:k]))))


def strong_rrqr(a, cfg: RrqrConfig) -> RrqrFactorization:
    """Strong rank-revealing QR by greedy determinant-increasing swaps.

    Starts from column-pivoted QR. While some pair (i, j) has criterion
    value above f**2, the pair with the largest value (ties broken by
    smallest i, then j) is swapped and the factorization re-triangularized
    from the disturbed column. Every accepted swap multiplies |det(R11)| by
    more than f, so the loop is finite; max_swaps is a roundoff safety cap.
    """
    a = as_matrix(a)
    m, n = a.shape
    cfg.validate(m, n)
    k = cfg.k
    f2 = cfg.f * cfg.f
    max_swaps = cfg.max_swaps if cfg.max_swaps is not None else 4 * n * k

    qres, perm = column_pivoted_qr(a)
    q = qres.q.copy(order="F")
    r = qres.r.copy(order="F")
    swaps = 0
    logdet_trace = [_logdet_r11(r, k)]

    def partial():
        return {"q": q, "r": r, "perm": perm, "swaps_performed": swaps}

    while True:
        if k == n:
            certificate = 0.0
            break
        crit = _criterion_matrix(r, k, cfg.tol_zero, partial=partial())
        flat = int(np.argmax(crit))
        i, j = divmod(flat, crit.shape[1])
        best = float(crit[i, j])
        if best <= f2:
            certificate = best
            break
        if swaps >= max_swaps:
            raise NonterminationError(
                f"strong_rrqr exceeded max_swaps = {max_swaps}; "
                f"f = {cfg.f} may be too close to 1 under roundoff")
        u, v = i, k + j
        r[:, [u, v]] = r[:, [v, u]]
        perm[[u, v]] = perm[[v, u]]
        _triangularize(q, r, start=u)
        swaps += 1
        logdet_trace.append(_logdet_r11(r, k))

    return RrqrFactorization(q=q, r=r, perm=perm, k=k, f=cfg.f,
                             swaps_performed=swaps, certificate=certificate,
                             logdet_trace=tuple(logdet_trace))


def select_features_rrqr(data, k: int, f: float = 1.1) -> SelectionResult:
    """Select k features as the first k indices of the strong-RRQR permutation.

    Rows are samples and columns are features. When k exceeds the numerical
    rank the selection is truncated to the rank and flagged, since the extra
    columns carry no independent information. Scores are the magnitudes of
    the corresponding R11 diagonal entries, in factorization order.
    """
    a = as_matrix(data, "data")
    if not 1 <= k <= a.shape[1]:
        raise ValidationError(f"k must lie in [1, n_features], got {k}")
    rank = numerical_rank(a)
    kk = min(k, rank)
    params = {"k": k, "f": f, "effective_k": kk, "rank": rank}
    if kk == 0:
        return SelectionResult(selected=(), scores=(), method="rrqr",
                               params=params, truncated=True)
    fact = strong_rrqr(a, RrqrConfig(k=kk, f=f))
    selected = tuple(int(p) for p in fact.perm[:kk])
    scores = tuple(float(abs(d)) for d in np.diag(fact.r11))
    return SelectionResult(selected=selected, scores=scores, method="rrqr",
                           params=params, truncated=kk < k)
