"""Unsupervised feature selection by QR-coupled nonnegative factorization.

The objective combines a reconstruction term ||A - A W H||_F^2 with a graph
Laplacian structure penalty on the projected samples, a nonconvex row-sparsity
penalty applied through a diagonal reweighting matrix, and a soft orthogonality
penalty on W. W is driven by a multiplicative update; H is the least-squares
representation (A W)^+ A recomputed each iteration, seeded from the economy QR
of the data. Feature ranking is by descending row norm of W.

Cost per run is O(k n m) for the QR seed, O(n m^2) for the Laplacian and
O(T k m n) for T update iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStateError, NumericalFailureError, ValidationError
from .matrix import as_matrix, householder_qr, numerical_rank, pseudoinverse
from .rrqr import SelectionResult

DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class NmfQrConfig:
    """Weights and loop controls.

    gamma_sparse is the sparsity coefficient (named to avoid clashing with the
    column-norm function of the rrqr module). kernel_bandwidth defaults to the
    mean squared pairwise distance between samples; rank_k defaults to the
    numerical rank of the data. There is no early-stop tolerance: the loop
    always runs max_iters and emits the objective trace for callers to judge.
    """

    alpha: float = 1.0
    beta: float = 100.0
    gamma_sparse: float = 1.0
    epsilon: float = 1e-8
    knn_k: int = 5
    kernel_bandwidth: float | None = None
    max_iters: int = 200
    seed: int = 0
    rank_k: int | None = None

    def validate(self) -> None:
        if min(self.alpha, self.beta, self.gamma_sparse) < 0.0:
            raise ValidationError("alpha, beta and gamma_sparse must be >= 0")
        if self.epsilon <= 0.0:
            raise ValidationError("epsilon must be > 0")
        if self.knn_k < 1:
            raise ValidationError("knn_k must be >= 1")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.kernel_bandwidth is not None and self.kernel_bandwidth <= 0.0:
            raise ValidationError("kernel_bandwidth must be > 0")


@dataclass
class NmfQrState:
    """Final iterate plus per-iteration diagnostics.

    objective_trace holds the monitored objective (multiplier term excluded).
    recon_before_h / recon_after_h bracket each least-squares H update;
    the after value can never exceed the before value. w_min_trace and
    row_norm_error_trace record the nonnegativity and normalization
    invariants per iteration.
    """

    w: np.ndarray
    h: np.ndarray
    phi: np.ndarray
    laplacian: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    recon_before_h: list[float] = field(default_factory=list)
    recon_after_h: list[float] = field(default_factory=list)
    w_min_trace: list[float] = field(default_factory=list)
    row_norm_error_trace: list[float] = field(default_factory=list)
    iteration: int = 0


def _pairwise_sq_dists(a: np.ndarray) -> np.ndarray:
    # direct subtraction, row by row: no Gram-trick cancellation, exactly
    # symmetric, and memory stays at one m x n block
    m = a.shape[0]
    d2 = np.empty((m, m))
    for i in range(m):
        diff = a - a[i]
        d2[i] = np.sum(diff * diff, axis=1)
    return d2


def affinity_matrix(data, knn_k: int, bandwidth: float) -> np.ndarray:
    """Heat-kernel affinity over mutual-or k-nearest neighborhoods.

    Entry (i, j) is exp(-||a_i - a_j||^2 / bandwidth) when j is among the
    knn_k nearest neighbors of i or vice versa, zero otherwise; the diagonal
    is zero (a sample is not its own neighbor). Neighbor ties break on the
    lower sample index. Duplicate samples are fine: distance zero, weight one.
    """
    a = as_matrix(data, "data")
    m = a.shape[0]
    if m < 2:
        raise ValidationError("affinity_matrix needs at least 2 samples")
    if bandwidth <= 0.0:
        raise ValidationError("bandwidth must be > 0")
    if knn_k < 1:
        raise ValidationError("knn_k must be >= 1")
    d2 = _pairwise_sq_dists(a)
    ranked = d2.copy()
    np.fill_diagonal(ranked, np.inf)
    kk = min(knn_k, m - 1)
    order = np.argsort(ranked, axis=1, kind="stable")[:, :kk]
    neighbor = np.zeros((m, m), dtype=bool)
    rows = np.repeat(np.arange(m), kk)
    neighbor[rows, order.ravel()] = True
    keep = neighbor | neighbor.T
    aff = np.where(keep, np.exp(-d2 / bandwidth), 0.0)
    np.fill_diagonal(aff, 0.0)
    return aff


def graph_laplacian(gamma_aff) -> np.ndarray:
    """Laplacian D - Gamma of a symmetric nonnegative affinity matrix.

    The degree D is built from the same stored affinity, so row sums of the
    result vanish to summation roundoff.
    """
    g = np.asarray(gamma_aff, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError(f"affinity must be square, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValidationError("affinity contains NaN or Inf entries")
    if g.size and np.max(np.abs(g - g.T)) > 1e-12:
        raise ValidationError("affinity must be symmetric to 1e-12")
    if g.size and np.min(g) < 0.0:
        raise ValidationError("affinity must be nonnegative")
    lap = -g.copy()
    degrees = np.sum(g, axis=1)
    lap[np.diag_indices_from(lap)] += degrees
    return lap


def phi_matrix(w: np.ndarray, epsilon: float) -> np.ndarray:
    """Diagonal of the row-sparsity reweighting: 1 / (4 (||w_i|| + eps)^1.5)."""
    if epsilon <= 0.0:
        raise ValidationError("epsilon must be > 0")
    row_norms = np.linalg.norm(np.atleast_2d(w), axis=1)
    return 1.0 / (4.0 * (row_norms + epsilon) ** 1.5)


def _row_normalize(w: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(w, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    return w / safe[:, None]


def _update_terms(a, w, h, lap, phi, cfg: NmfQrConfig) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator of the multiplicative step.

    H and the data carry signs, so each data-dependent product is split into
    its positive and negative parts across the ratio, the usual device for
    multiplicative updates with signed factors. Both sides come out
    elementwise nonnegative, numerator minus denominator equals the negated
    objective gradient exactly, and on all-nonnegative instances the split
    collapses back to the plain one-lump form. Products are grouped so the
    n x n Gram matrix is never materialized.
    """
    aw = a @ w
    attract = a.T @ (a @ h.T)
    repel = a.T @ (aw @ (h @ h.T))
    structure = a.T @ (lap @ aw)
    numer = (np.maximum(attract, 0.0) + np.maximum(-repel, 0.0)
             + cfg.alpha * np.maximum(-structure, 0.0)
             + cfg.beta * w)
    denom = (np.maximum(-attract, 0.0) + np.maximum(repel, 0.0)
             + cfg.alpha * np.maximum(structure, 0.0)
             + cfg.gamma_sparse * phi[:, None] * w
             + cfg.beta * (w @ (w.T @ w)))
    return numer, denom


def _w_update(a, w, h, lap, phi, cfg: NmfQrConfig) -> np.ndarray:
    """One multiplicative step. Numerator and denominator are nonnegative by
    construction; the denominator floor only guards the 0/0 of zero rows, so
    W stays entrywise nonnegative and zero entries stay zero."""
    numer, denom = _update_terms(a, w, h, lap, phi, cfg)
    return w * numer / np.maximum(denom, DENOM_FLOOR)


def update_w(state: NmfQrState, data, cfg: NmfQrConfig) -> np.ndarray:
    """Multiplicative W update against the current state; raises on non-finite
    intermediates, carrying the iteration index."""
    a = as_matrix(data, "data")
    out = _w_update(a, state.w, state.h, state.laplacian, state.phi, cfg)
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError(
            f"non-finite W entries at iteration {state.iteration}",
            iteration=state.iteration)
    return out


def _update_h(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Least-squares H = (A W)^+ A; errors out if the projected basis collapsed."""
    aw = a @ w
    scale = np.linalg.norm(a) * np.linalg.norm(w)
    top = float(np.linalg.svd(aw, compute_uv=False)[0]) if aw.size else 0.0
    if top <= 1e-14 * max(scale, 1.0):
        raise DegenerateStateError(
            "all singular values of A @ W fell below the cutoff; "
            "try a smaller rank_k or a different seed")
    return pseudoinverse(aw) @ a


def _objective(a, w, h, lap, phi, cfg: NmfQrConfig) -> float:
    aw = a @ w
    recon = 0.5 * np.linalg.norm(a - aw @ h) ** 2
    structure = 0.5 * cfg.alpha * float(np.sum(aw * (lap @ aw)))
    sparsity = 0.5 * cfg.gamma_sparse * float(np.sum(phi * np.sum(w * w, axis=1)))
    wtw = w.T @ w
    ortho = 0.25 * cfg.beta * np.linalg.norm(wtw - np.eye(wtw.shape[0])) ** 2
    return float(recon + structure + sparsity + ortho)


def default_bandwidth(data) -> float:
    """Mean squared pairwise distance between distinct samples (1.0 if all
    samples coincide)."""
    a = as_matrix(data, "data")
    m = a.shape[0]
    if m < 2:
        return 1.0
    d2 = _pairwise_sq_dists(a)
    off = d2[~np.eye(m, dtype=bool)]
    mean = float(np.mean(off))
    return mean if mean > 0.0 else 1.0


def nmfqr_run(data, cfg: NmfQrConfig) -> NmfQrState:
    """Run the full iteration and return the final state with diagnostics.

    The data is normalized to unit RMS entry up front, which makes the
    ranking exactly invariant under positive rescaling of the input and
    keeps the trade-off weights meaningful across datasets; state matrices
    and traces refer to the normalized data.
    """
    cfg.validate()
    a = as_matrix(data, "data")
    m, n = a.shape
    rms = float(np.linalg.norm(a)) / np.sqrt(m * n)
    if rms > 0.0:
        a = a / rms
    rank_k = cfg.rank_k if cfg.rank_k is not None else numerical_rank(a)
    if not 1 <= rank_k <= min(m, n):
        raise ValidationError(
            f"rank_k must lie in [1, min(m, n)] = [1, {min(m, n)}], got {rank_k}")

    rng = np.random.default_rng(cfg.seed)
    w = _row_normalize(rng.uniform(size=(n, rank_k)))
    h = householder_qr(a).r[:rank_k, :]

    bandwidth = cfg.kernel_bandwidth if cfg.kernel_bandwidth is not None else default_bandwidth(a)
    lap = graph_laplacian(affinity_matrix(a, cfg.knn_k, bandwidth))

    state = NmfQrState(w=w, h=h, phi=phi_matrix(w, cfg.epsilon), laplacian=lap)
    for it in range(cfg.max_iters):
        state.iteration = it
        state.w = _row_normalize(state.w)
        nonzero = np.linalg.norm(state.w, axis=1) > 0.0
        norm_err = (float(np.max(np.abs(np.linalg.norm(state.w[nonzero], axis=1) - 1.0)))
                    if np.any(nonzero) else 0.0)
        state.row_norm_error_trace.append(norm_err)
        state.phi = phi_matrix(state.w, cfg.epsilon)
        state.w = update_w(state, a, cfg)
        state.w_min_trace.append(float(np.min(state.w)))
        state.recon_before_h.append(0.5 * float(np.linalg.norm(a - a @ state.w @ state.h)) ** 2)
        state.h = _update_h(a, state.w)
        state.recon_after_h.append(0.5 * float(np.linalg.norm(a - a @ state.w @ state.h)) ** 2)
        state.objective_trace.append(_objective(a, state.w, state.h, lap, state.phi, cfg))
    return state


def nmfqr_select(data, cfg: NmfQrConfig, top_k: int) -> SelectionResult:
    """Rank features by descending row norm of W and return the top_k.

    Deterministic for a fixed (data, cfg, seed); row-norm ties break on the
    lower feature index.
    """
    a = as_matrix(data, "data")
    if not 1 <= top_k <= a.shape[1]:
        raise ValidationError(f"top_k must lie in [1, n_features], got {top_k}")
    state = nmfqr_run(a, cfg)
    norms = np.linalg.norm(state.w, axis=1)
    order = np.argsort(-norms, kind="stable")[:top_k]
    params = {
        "alpha": cfg.alpha, "beta": cfg.beta, "gamma_sparse": cfg.gamma_sparse,
        "epsilon": cfg.epsilon, "knn_k": cfg.knn_k,
        "kernel_bandwidth": cfg.kernel_bandwidth, "max_iters": cfg.max_iters,
        "seed": cfg.seed, "rank_k": cfg.rank_k, "top_k": top_k,
    }
    return SelectionResult(selected=tuple(int(i) for i in order),
                           scores=tuple(float(norms[i]) for i in order),
                           method="nmfqr", params=params)
