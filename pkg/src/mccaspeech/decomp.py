"""MAXVAR multiview CCA, two-view CCA and the PCA baseline.

Views are F x c matrices whose rows are shared features (frequency bins) and
whose columns are time frames. The shared representation ``S`` is F x t with
orthonormal columns; it is given by the top-t eigenvectors of::

    K = sum_m X_m (X_m^T X_m + eps I)^{-1} X_m^T          (F x F)

and each view's projector is the ridge solution
``U_m = (X_m^T X_m + eps I)^{-1} X_m^T S``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from . import _eigkernels
from .errors import ArgumentError, NumericError, ValidationError
from .matrixio import FeatureMatrix, Kind, as_array, read_fmx, write_fmx
from .segmentation import ViewSet, chunk_views

DEFAULT_EPSILON = 1e-4
JACOBI_MAX_N = 64
JACOBI_SWEEPS = 100
QL_ITERATIONS = 60
# relative eigenvalue gap under which eigenpairs count as degenerate
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True, eq=False)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax returns the first index on ties
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[idx, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return vectors * signs


def sym_eig(a, k: int | None = None) -> EigenResult:
    """Top-``k`` eigenpairs of the symmetric matrix ``a``, values descending.

    Each eigenvector is signed so that its largest-magnitude entry is
    positive (first such entry on ties). Eigenvalues closer than
    ``1e-12 * ||a||`` are treated as degenerate and their vectors are ordered
    lexicographically, largest first.

    Uses cyclic Jacobi for ``n <= 64`` and Householder tridiagonalisation
    with implicit QL above that.
    """
    a = np.array(as_array(a), dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ArgumentError(f"expected a non-empty square matrix, got shape {a.shape}")
    n = a.shape[0]
    if k is None:
        k = n
    if not 1 <= k <= n:
        raise ArgumentError(f"k must be in [1, {n}], got {k}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("matrix has non-finite entries")
    scale = np.max(np.abs(a))
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ArgumentError("matrix is not symmetric")
    a = 0.5 * (a + a.T)

    if n <= JACOBI_MAX_N:
        values, vectors, status = _eigkernels.jacobi_eig(a, JACOBI_SWEEPS)
        if status:
            raise NumericError(f"Jacobi eigensolver did not converge within {JACOBI_SWEEPS} sweeps")
    else:
        values, vectors, status = _eigkernels.tridiag_ql_eig(a, QL_ITERATIONS)
        if status:
            raise NumericError(
                f"tridiagonal QL did not converge within {QL_ITERATIONS} iterations per eigenvalue"
            )

    vectors = _fix_signs(vectors)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]

    tol = DEGENERATE_GAP * max(np.max(np.abs(values)), np.finfo(float).tiny)
    start = 0
    for i in range(1, n + 1):
        if i == n or values[i - 1] - values[i] >= tol:
            if i - start > 1:
                block = vectors[:, start:i]
                # lexsort keys run last-to-first, so feed rows reversed, negated
                perm = np.lexsort(-block[::-1])
                vectors[:, start:i] = block[:, perm]
                values[start:i] = values[start:i][perm]
            start = i
    return EigenResult(values[:k].copy(), np.ascontiguousarray(vectors[:, :k]))


# --- MAXVAR MCCA -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MccaModel:
    shared: np.ndarray  # F x t, orthonormal columns
    projectors: list[np.ndarray]  # M matrices, c x t
    eigenvalues: np.ndarray  # t, descending, each in [0, M]
    epsilon: float = DEFAULT_EPSILON
    centered: bool = False

    @property
    def m_chunks(self) -> int:
        return len(self.projectors)

    @property
    def components(self) -> int:
        return self.shared.shape[1]

    def shared_matrix(self, source_id: str = "") -> FeatureMatrix:
        return FeatureMatrix(self.shared, Kind.REDUCED, source_id)


def _view_arrays(views) -> list[np.ndarray]:
    if isinstance(views, ViewSet):
        arrays = views.arrays()
    else:
        arrays = [as_array(v) for v in views]
    if not arrays:
        raise ArgumentError("at least one view is required")
    f = arrays[0].shape[0]
    for x in arrays:
        if x.ndim != 2 or x.shape[0] != f:
            raise ArgumentError("all views must be 2-D with the same number of rows")
        if not np.all(np.isfinite(x)):
            raise ValidationError("views contain non-finite values")
    return arrays


def _regularized_cholesky(x: np.ndarray, epsilon: float) -> np.ndarray:
    gram = x.T @ x
    gram[np.diag_indices_from(gram)] += epsilon
    try:
        return linalg.cholesky(gram, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"regularized Gram matrix is not positive definite: {exc}") from exc


def optimal_projectors(views, shared, epsilon: float = DEFAULT_EPSILON) -> list[np.ndarray]:
    """Ridge-optimal ``U_m = (X_m^T X_m + eps I)^{-1} X_m^T S`` for each view."""
    arrays = _view_arrays(views)
    s = as_array(shared)
    out = []
    for x in arrays:
        chol = _regularized_cholesky(x, epsilon)
        out.append(linalg.cho_solve((chol, True), x.T @ s))
    return out


def fit_mcca(views, t: int, epsilon: float = DEFAULT_EPSILON, center: bool = False) -> MccaModel:
    """Fit MAXVAR MCCA to a set of views sharing their row (feature) axis.

    ``t`` must not exceed the number of rows or the narrowest view width.
    """
    if epsilon <= 0:
        raise ArgumentError(f"epsilon must be positive, got {epsilon}")
    arrays = _view_arrays(views)
    if center:
        arrays = [x - x.mean(axis=0, keepdims=True) for x in arrays]
    f = arrays[0].shape[0]
    width = min(x.shape[1] for x in arrays)
    if not isinstance(t, (int, np.integer)) or not 1 <= t <= min(f, width):
        raise ArgumentError(f"components must be in [1, min(F={f}, c={width})], got {t}")

    chols = [_regularized_cholesky(x, epsilon) for x in arrays]
    # Whitened views X_m L_m^{-T}; K = sum_m W_m W_m^T. Terms are accumulated
    # in a canonical (content-defined) order so that permuting the views
    # leaves K bit-for-bit unchanged.
    whitened = [
        linalg.solve_triangular(chol, x.T, lower=True).T for chol, x in zip(chols, arrays)
    ]
    order = sorted(range(len(arrays)), key=lambda i: arrays[i].tobytes())
    stacked = np.hstack([whitened[i] for i in order])
    k_mat = stacked @ stacked.T
    k_mat = 0.5 * (k_mat + k_mat.T)

    eig = sym_eig(k_mat, t)
    shared = eig.vectors
    projectors = [linalg.cho_solve((chol, True), x.T @ shared) for chol, x in zip(chols, arrays)]
    values = np.clip(eig.values, 0.0, float(len(arrays)))
    return MccaModel(shared, projectors, values, float(epsilon), center)


def mcca_reduce(segment, m: int, t: int, epsilon: float = DEFAULT_EPSILON, center: bool = False):
    """Reduce an F x T segment to its F x t MCCA representation over ``m`` chunks."""
    views = chunk_views(segment, m)
    model = fit_mcca(views, t, epsilon, center)
    source = segment.source_id if isinstance(segment, FeatureMatrix) else ""
    return model.shared_matrix(source)


def mcca_objective(views, projectors, shared) -> float:
    """``sum_m ||X_m U_m - S||_F^2``; ``S`` must have orthonormal columns."""
    arrays = _view_arrays(views)
    s = as_array(shared)
    if len(projectors) != len(arrays):
        raise ArgumentError(f"{len(arrays)} views but {len(projectors)} projectors")
    if s.ndim != 2 or s.shape[0] != arrays[0].shape[0]:
        raise ArgumentError(f"shared matrix shape {s.shape} does not match views")
    t = s.shape[1]
    if np.max(np.abs(s.T @ s - np.eye(t))) > 1e-6:
        raise ArgumentError("shared matrix columns are not orthonormal")
    total = 0.0
    for x, u in zip(arrays, projectors):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (x.shape[1], t):
            raise ArgumentError(f"projector shape {u.shape} != {(x.shape[1], t)}")
        r = x @ u - s
        total += float(np.sum(r * r))
    return total


# --- two-view CCA -----------------------------------------------------------

def _inverse_sqrt(gram: np.ndarray) -> np.ndarray:
    eig = sym_eig(gram)
    vals = eig.values
    if vals[-1] <= 0:
        raise NumericError("regularized Gram matrix is not positive definite")
    return (eig.vectors / np.sqrt(vals)) @ eig.vectors.T


def cca2(x1, x2, t: int, epsilon: float = DEFAULT_EPSILON):
    """Two-view CCA between F x t1 and F x t2 matrices.

    Returns ``(U1, U2, rho)`` with ``U_m^T (X_m^T X_m + eps I) U_m = I`` and
    canonical correlations ``rho`` sorted descending in [0, 1].
    """
    a1, a2 = as_array(x1), as_array(x2)
    if a1.ndim != 2 or a2.ndim != 2 or a1.shape[0] != a2.shape[0]:
        raise ArgumentError("views must be 2-D with the same number of rows")
    t1, t2, f = a1.shape[1], a2.shape[1], a1.shape[0]
    if not 1 <= t <= min(t1, t2, f):
        raise ArgumentError(f"components must be in [1, {min(t1, t2, f)}], got {t}")

    w1 = _inverse_sqrt(a1.T @ a1 + epsilon * np.eye(t1))
    w2 = _inverse_sqrt(a2.T @ a2 + epsilon * np.eye(t2))
    c = w1 @ (a1.T @ a2) @ w2

    left = sym_eig(c @ c.T, t)
    rho = np.sqrt(np.clip(left.values, 0.0, None))
    a = left.vectors
    b = np.zeros((t2, t))
    floor = 1e-8 * max(rho[0], 1.0)
    strong = rho > floor
    b[:, strong] = (c.T @ a[:, strong]) / rho[strong]
    if not np.all(strong):
        # zero correlations: any orthonormal completion is optimal
        fill = sym_eig(c.T @ c).vectors[:, ::-1]
        basis = b[:, strong]
        j = 0
        for col in np.flatnonzero(~strong):
            while True:
                v = fill[:, j].copy()
                j += 1
                v -= basis @ (basis.T @ v)
                nv = np.linalg.norm(v)
                if nv > 1e-6:
                    break
            b[:, col] = v / nv
            basis = np.column_stack([basis, b[:, col]])
    return w1 @ a, w2 @ b, np.clip(rho, 0.0, 1.0)


# --- PCA baseline -----------------------------------------------------------

def pca_reduce(segment, t: int) -> FeatureMatrix:
    """Top-``t`` eigenvectors of the uncentered ``X X^T`` (F x t)."""
    x = as_array(segment)
    f, n_cols = x.shape
    if not isinstance(t, (int, np.integer)) or not 1 <= t <= min(f, n_cols):
        raise ArgumentError(f"components must be in [1, {min(f, n_cols)}], got {t}")
    gram = x @ x.T
    gram = 0.5 * (gram + gram.T)
    source = segment.source_id if isinstance(segment, FeatureMatrix) else ""
    return FeatureMatrix(sym_eig(gram, t).vectors, Kind.REDUCED, source)


def reduce_segment(segment, method: str, m: int, t: int, epsilon: float = DEFAULT_EPSILON,
                   center: bool = False) -> FeatureMatrix:
    """Dispatch on ``method`` in {"mcca", "pca", "none"}."""
    if method == "mcca":
        return mcca_reduce(segment, m, t, epsilon, center)
    if method == "pca":
        return pca_reduce(segment, t)
    if method == "none":
        return segment if isinstance(segment, FeatureMatrix) else FeatureMatrix(segment)
    raise ArgumentError(f"unknown reduction method {method!r}")


# --- persistence --------------------------------------------------------------

def save_mcca_model(model: MccaModel, path) -> None:
    """Write ``S`` stacked over ``U_1..U_M`` as FMX1 plus a JSON sidecar of scalars."""
    path = Path(path)
    stacked = np.vstack([model.shared, *model.projectors])
    write_fmx(FeatureMatrix(stacked, Kind.REDUCED, path.stem), path)
    meta = {
        "rows_shared": int(model.shared.shape[0]),
        "view_widths": [int(u.shape[0]) for u in model.projectors],
        "m_chunks": model.m_chunks,
        "components": model.components,
        "epsilon": model.epsilon,
        "centered": model.centered,
        "eigenvalues": [float(v) for v in model.eigenvalues],
    }
    path.with_name(path.name + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_mcca_model(path) -> MccaModel:
    path = Path(path)
    stacked = read_fmx(path).data
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    f = meta["rows_shared"]
    shared = stacked[:f]
    projectors = []
    row = f
    for width in meta["view_widths"]:
        projectors.append(stacked[row:row + width].copy())
        row += width
    return MccaModel(
        shared.copy(), projectors, np.array(meta["eigenvalues"]), meta["epsilon"], meta["centered"]
    )
