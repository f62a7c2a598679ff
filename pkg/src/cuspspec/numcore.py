"""Shared discretization and eigenvalue machinery.

1D grids with boundary-condition tags, second-order tridiagonal assembly
(lumped-mass symmetrization so Neumann ends stay symmetric), eigenvalue
extraction by Sturm-count bisection, Richardson extrapolation, and sparse
symmetric generalized eigensolves for the 2D problems.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class BoundaryCondition(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    # Dirichlet imposed at a finite endpoint standing in for an infinite end;
    # the tag records that the endpoint was chosen from a decay estimate.
    DECAY_TRUNCATION = "decay_truncation"


def _is_essential(bc: BoundaryCondition) -> bool:
    return bc in (BoundaryCondition.DIRICHLET, BoundaryCondition.DECAY_TRUNCATION)


class RejectedInputError(ValueError):
    """Raised when an operation's preconditions are violated."""


class EigensolveError(RuntimeError):
    """Iterative eigensolve failed to reach the requested residual tolerance."""

    def __init__(self, message, eigenvalues=None, residuals=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.residuals = residuals


@dataclass(frozen=True)
class Grid1D:
    left: float
    right: float
    n_cells: int
    bc_left: BoundaryCondition = BoundaryCondition.DIRICHLET
    bc_right: BoundaryCondition = BoundaryCondition.DIRICHLET

    def __post_init__(self):
        if not self.left < self.right:
            raise RejectedInputError(f"need left < right, got [{self.left}, {self.right}]")
        if self.n_cells < 2:
            raise RejectedInputError("n_cells must be at least 2")

    @property
    def spacing(self) -> float:
        return (self.right - self.left) / self.n_cells

    def nodes(self) -> np.ndarray:
        return np.linspace(self.left, self.right, self.n_cells + 1)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix acting on nodal values of a Grid1D."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float)
        e = np.asarray(self.off_diagonal, dtype=float)
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "off_diagonal", e)
        if d.ndim != 1 or e.ndim != 1 or e.size != max(d.size - 1, 0):
            raise RejectedInputError("off_diagonal must have length len(diagonal) - 1")

    @property
    def dimension(self) -> int:
        return self.diagonal.size

    def lower_bound(self) -> float:
        emax = float(np.max(np.abs(self.off_diagonal))) if self.off_diagonal.size else 0.0
        return float(np.min(self.diagonal)) - 2.0 * emax

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diagonal * v
        if self.off_diagonal.size:
            out[:-1] += self.off_diagonal * v[1:]
            out[1:] += self.off_diagonal * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diagonal)
        if self.off_diagonal.size:
            m += np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)
        return m

    def scaled(self, factor: float, grid: Grid1D | None = None) -> "TridiagonalOperator":
        return TridiagonalOperator(factor * self.diagonal, factor * self.off_diagonal,
                                   grid if grid is not None else self.grid)


@dataclass
class SpectrumResult:
    operator: str
    params: dict
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    refinement: int = 0
    extrapolated: bool = False

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.residual_norms = np.asarray(self.residual_norms, dtype=float)
        if np.any(np.diff(self.eigenvalues) < 0):
            raise RejectedInputError("eigenvalues must be sorted ascending")

    def to_json(self) -> str:
        return json.dumps({
            "operator": self.operator,
            "params": self.params,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(r) for r in self.residual_norms],
            "refinement": self.refinement,
            "extrapolated": self.extrapolated,
        })

    CSV_HEADER = "operator,params,eigenvalue,residual,refinement,extrapolated"

    def to_csv_rows(self) -> list[str]:
        pstr = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return [
            f"{self.operator},{pstr},{v:.17g},{r:.17g},{self.refinement},{self.extrapolated}"
            for v, r in zip(self.eigenvalues, self.residual_norms)
        ]


def assemble_tridiagonal(grid: Grid1D, h_coeff: float, potential) -> TridiagonalOperator:
    """3-point stencil for -h_coeff * f'' + V f on the grid.

    Dirichlet/decay rows are eliminated; a Neumann end keeps its node with a
    half mass cell, and the matrix is symmetrized by the lumped mass so that
    eigenvalues of the returned operator approximate the form's eigenvalues
    with O(spacing^2) error.
    """
    if not h_coeff > 0:
        raise RejectedInputError("h_coeff must be positive")
    x = grid.nodes()
    v = np.broadcast_to(np.asarray(potential(x), dtype=float), x.shape)
    s = grid.spacing
    i0 = 0 if grid.bc_left is BoundaryCondition.NEUMANN else 1
    i1 = grid.n_cells + 1 if grid.bc_right is BoundaryCondition.NEUMANN else grid.n_cells
    vk = v[i0:i1]
    if not np.all(np.isfinite(vk)):
        raise RejectedInputError("non-finite potential value at a grid node")
    m = i1 - i0
    mass = np.full(m, s)
    stiff = np.full(m, 2.0 * h_coeff / s)
    if grid.bc_left is BoundaryCondition.NEUMANN:
        mass[0] = s / 2.0
        stiff[0] = h_coeff / s
    if grid.bc_right is BoundaryCondition.NEUMANN:
        mass[-1] = s / 2.0
        stiff[-1] = h_coeff / s
    diag = stiff / mass + vk
    off = -(h_coeff / s) / np.sqrt(mass[:-1] * mass[1:])
    return TridiagonalOperator(diag, off, grid)


def sturm_count(op: TridiagonalOperator, shift: float) -> int:
    """Number of eigenvalues of op strictly below shift (Sturm sign changes)."""
    d = op.diagonal
    e = op.off_diagonal
    tiny = np.finfo(float).tiny * 1e16
    q = d[0] - shift
    count = int(q < 0)
    for i in range(1, d.size):
        if q == 0.0:
            q = tiny
        q = (d[i] - shift) - e[i - 1] ** 2 / q
        count += q < 0
    return count


def eigenvector(op: TridiagonalOperator, value: float, iterations: int = 3) -> np.ndarray:
    """Inverse iteration with the converged eigenvalue as shift."""
    m = op.dimension
    if m == 1:
        return np.array([1.0])
    scale = max(abs(value), 1.0)
    shift = value + scale * 1e-12
    ab = np.zeros((3, m))
    ab[0, 1:] = op.off_diagonal
    ab[2, :-1] = op.off_diagonal
    v = np.full(m, 1.0 / math.sqrt(m))
    v[::2] += 1e-3 / math.sqrt(m)  # break symmetry deterministically
    v /= np.linalg.norm(v)
    for attempt in range(4):
        ab[1, :] = op.diagonal - shift
        try:
            w = v
            for _ in range(iterations):
                w = sla.solve_banded((1, 1), ab, w)
                nrm = np.linalg.norm(w)
                if not np.isfinite(nrm) or nrm == 0.0:
                    raise np.linalg.LinAlgError
                w /= nrm
            return w
        except (np.linalg.LinAlgError, ValueError):
            shift = value + scale * 1e-12 * 10.0 ** (attempt + 1)
    raise EigensolveError(f"inverse iteration failed near eigenvalue {value}")


def tridiag_lowest_eigenvalues(op: TridiagonalOperator, k: int, tol: float = 1e-12,
                               operator: str = "tridiagonal", params: dict | None = None,
                               refinement: int = 0,
                               compute_residuals: bool = True) -> SpectrumResult:
    """k smallest eigenvalues by Sturm-sequence counting and bisection.

    Each eigenvalue is bracketed to width <= tol (clamped at machine
    resolution); residuals are measured on inverse-iteration eigenvectors.
    """
    if not k >= 1 or k > op.dimension:
        raise RejectedInputError(f"k={k} out of range for dimension {op.dimension}")
    if not tol > 0:
        raise RejectedInputError("tol must be positive")
    if op.dimension == 1:
        vals = np.array([op.diagonal[0]])
    else:
        vals = sla.eigvalsh_tridiagonal(
            op.diagonal, op.off_diagonal, select="i", select_range=(0, k - 1),
            lapack_driver="stebz", tol=tol)
    vals = np.sort(vals)
    # cross-check the count against the Sturm sequence; the slack must cover
    # eigenvalue round-off, which scales with the matrix norm, not with vals
    norm_bound = float(np.max(np.abs(op.diagonal))) + \
        2.0 * float(np.max(np.abs(op.off_diagonal), initial=0.0))
    gap = max(tol, 1e-10 * max(1.0, abs(vals[-1])),
              100.0 * np.finfo(float).eps * norm_bound)
    if sturm_count(op, vals[-1] + gap) < k:
        raise EigensolveError("Sturm count disagrees with bisection output", vals)
    if compute_residuals:
        res = np.empty(k)
        for i, lam in enumerate(vals):
            v = eigenvector(op, lam)
            res[i] = np.linalg.norm(op.matvec(v) - lam * v)
    else:
        res = np.full(k, np.nan)
    return SpectrumResult(operator, dict(params or {}), vals, res, refinement=refinement)


def richardson_extrapolate(coarse: SpectrumResult, fine: SpectrumResult) -> SpectrumResult:
    """Entrywise (4*fine - coarse)/3, removing the O(spacing^2) error term."""
    if coarse.operator != fine.operator or coarse.params != fine.params:
        raise RejectedInputError("operator descriptors do not match")
    if fine.refinement != coarse.refinement + 1:
        raise RejectedInputError("fine refinement level must be coarse level + 1")
    if coarse.eigenvalues.size != fine.eigenvalues.size:
        raise RejectedInputError("eigenvalue counts differ")
    vals = (4.0 * fine.eigenvalues - coarse.eigenvalues) / 3.0
    res = (4.0 * fine.residual_norms + coarse.residual_norms) / 3.0
    order = np.argsort(vals, kind="stable")
    return SpectrumResult(fine.operator, dict(fine.params), vals[order], res[order],
                          refinement=fine.refinement, extrapolated=True)


def extrapolated_eigenvalues(make_op, k: int, n_cells: int, tol: float = 1e-12,
                             operator: str = "tridiagonal",
                             params: dict | None = None) -> SpectrumResult:
    """Solve on n_cells and 2*n_cells and Richardson-extrapolate."""
    coarse = tridiag_lowest_eigenvalues(make_op(n_cells), k, tol, operator, params, 0)
    fine = tridiag_lowest_eigenvalues(make_op(2 * n_cells), k, tol, operator, params, 1)
    return richardson_extrapolate(coarse, fine)


# ---------------------------------------------------------------------------
# sparse symmetric matrices and generalized eigensolves

@dataclass(frozen=True)
class SparseSymmetricMatrix:
    """Upper-triangle COO storage; the symmetric completion is implied."""

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def from_coo(cls, dimension, rows, cols, values) -> "SparseSymmetricMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        lo = np.minimum(rows, cols)
        hi = np.maximum(rows, cols)
        m = sp.coo_matrix((values, (lo, hi)), shape=(dimension, dimension)).tocsr().tocoo()
        return cls(dimension, m.row.copy(), m.col.copy(), m.data.copy())

    def to_csr(self) -> sp.csr_matrix:
        upper = sp.coo_matrix((self.values, (self.rows, self.cols)),
                              shape=(self.dimension, self.dimension)).tocsr()
        strict = sp.triu(upper, k=1)
        return (upper + strict.T).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def quadratic_form(self, u: np.ndarray) -> float:
        return float(u @ (self.to_csr() @ u))


def _deterministic_start(n: int) -> np.ndarray:
    v = np.sin(np.linspace(0.3, 11.0, n)) + 1.0
    return v / np.linalg.norm(v)


def sparse_lowest_eigenpairs(stiffness: SparseSymmetricMatrix, mass: SparseSymmetricMatrix,
                             k: int, tol: float = 1e-9, sigma: float | None = None,
                             operator: str = "sparse", params: dict | None = None,
                             maxiter: int | None = None) -> SpectrumResult:
    """k smallest generalized eigenvalues S u = E M u by shift-invert Lanczos.

    The shift must lie strictly below the spectrum bottom; when not supplied
    it is derived from a Gershgorin-type bound. The relative residual
    ||S u - E M u|| / ||M u|| <= tol is verified explicitly; failure raises
    EigensolveError carrying the best residuals.
    """
    if stiffness.dimension != mass.dimension:
        raise RejectedInputError("dimension mismatch")
    n = stiffness.dimension
    if not 1 <= k <= n - 1:
        raise RejectedInputError(f"k={k} out of range for sparse solve of dimension {n}")
    S = stiffness.to_csr()
    M = mass.to_csr()
    if sigma is None:
        # certified lower bound: |E| <= max row sum of |S| / lambda_min(M)
        row_sums = np.abs(S).sum(axis=1).A1 if hasattr(np.abs(S).sum(axis=1), "A1") \
            else np.asarray(np.abs(S).sum(axis=1)).ravel()
        lam_min_m = float(spla.eigsh(M, k=1, sigma=0, which="LM",
                                     v0=_deterministic_start(n),
                                     return_eigenvectors=False)[0])
        sigma = -1.05 * float(row_sums.max()) / lam_min_m - 1.0
    v0 = _deterministic_start(n)
    last_exc = None
    for attempt in range(5):
        try:
            vals, vecs = spla.eigsh(S, k=k, M=M, sigma=sigma, which="LM",
                                    v0=v0, maxiter=maxiter,
                                    tol=min(tol, 1e-10))
        except spla.ArpackNoConvergence as exc:
            last_exc = exc
            sigma = sigma * 1.5 - 1.0
            continue
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if vals[0] < sigma:
            # shift was not below the spectrum bottom; move it and retry
            sigma = vals[0] - (vals[-1] - vals[0]) - 1.0
            continue
        res = np.empty(k)
        for i in range(k):
            u = vecs[:, i]
            mu = M @ u
            res[i] = np.linalg.norm(S @ u - vals[i] * mu) / np.linalg.norm(mu)
        if np.all(res <= tol):
            return SpectrumResult(operator, dict(params or {}), vals, res)
        raise EigensolveError(
            f"residuals {res.max():.3e} exceed tol {tol:.3e}", vals, res)
    raise EigensolveError(f"shift-invert iteration did not converge: {last_exc}")


# ---------------------------------------------------------------------------
# quadrature helpers

@lru_cache(maxsize=None)
def gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def integrate_segments(fun, breaks: np.ndarray, order: int = 8) -> float:
    """Composite Gauss quadrature of fun over consecutive break intervals."""
    breaks = np.asarray(breaks, dtype=float)
    xg, wg = gauss_rule(order)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        total += half * float(np.sum(wg * fun(mid + half * xg)))
    return total


def integrate_adaptive(fun, a: float, b: float, tol: float = 1e-12,
                       max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature (independent oracle for line integrals)."""
    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, depth):
        mid = 0.5 * (lo + hi)
        fl = fun(0.5 * (lo + mid))
        fr = fun(0.5 * (mid + hi))
        left = simpson(lo, mid, flo, fl, fmid)
        right = simpson(mid, hi, fmid, fr, fhi)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, flo, fl, fmid, left, depth + 1)
                + recurse(mid, hi, fmid, fr, fhi, right, depth + 1))

    mid = 0.5 * (a + b)
    fa, fm, fb = fun(a), fun(mid), fun(b)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 0)
