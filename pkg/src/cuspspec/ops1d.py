"""Builders for the 1D operator chain and its exact-identity validators.

The chain: the half-line model operator -f'' + x^p f (Dirichlet at 0), its
Neumann/Dirichlet truncations on (0, mu), the semiclassical effective operator
with form h^2 f'^2 + 2 x^p f^2 on (0, h^k), the piecewise-plateau operator on
(-inf, h^k], and the plateau-height rescaling of the latter on (-inf, mu].
Every pair is linked by an exact affine change of variables which the
validators check at round-off level.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numcore import (BoundaryCondition, Grid1D, RejectedInputError,
                      SpectrumResult, TridiagonalOperator, assemble_tridiagonal,
                      extrapolated_eigenvalues, richardson_extrapolate,
                      tridiag_lowest_eigenvalues)


@dataclass(frozen=True)
class CuspExponent:
    p: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise RejectedInputError(f"cusp exponent must exceed 1, got {self.p}")


def _p(p) -> float:
    return p.p if isinstance(p, CuspExponent) else CuspExponent(float(p)).p


def scaling_factor(p, h: float) -> float:
    """Eigenvalue factor 2^(2/(2+p)) * h^(2p/(2+p)) of the affine rescaling."""
    p = _p(p)
    return 2.0 ** (2.0 / (2.0 + p)) * h ** (2.0 * p / (2.0 + p))


def scaling_mu(p, h: float, k: float) -> float:
    """Right endpoint 2^(1/(2+p)) * h^(k - 2/(2+p)) after rescaling (0, h^k)."""
    p = _p(p)
    return 2.0 ** (1.0 / (2.0 + p)) * h ** (k - 2.0 / (2.0 + p))


def scaling_gamma(p, h: float) -> float:
    """Length contraction (h^2/2)^(1/(2+p)) of the rescaling x = gamma * y."""
    p = _p(p)
    return (h * h / 2.0) ** (1.0 / (2.0 + p))


def plateau_lambda(p, h: float) -> float:
    """Plateau height making the rescaling exact: 1/scaling_factor.

    This is the unique value mapping the unit plateau onto itself under the
    change of variables (plateau * factor = 1); any other constant breaks the
    identity at finite h even though it leaves the h -> 0 asymptotics intact.
    """
    return 1.0 / scaling_factor(p, h)


def default_k(p) -> float:
    """Truncation exponent 1/(1+p) used throughout unless overridden."""
    return 1.0 / (1.0 + _p(p))


# ---------------------------------------------------------------------------
# builders

def build_model_A(p, right: float, n_cells: int) -> TridiagonalOperator:
    """-f'' + x^p f on (0, right), Dirichlet at 0, decay truncation at right."""
    p = _p(p)
    if n_cells < 64:
        raise RejectedInputError("n_cells must be at least 64 for the model operator")
    grid = Grid1D(0.0, right, n_cells,
                  BoundaryCondition.DIRICHLET, BoundaryCondition.DECAY_TRUNCATION)
    return assemble_tridiagonal(grid, 1.0, lambda x: x ** p)


def build_C(p, mu: float, variant: str, n_cells: int) -> TridiagonalOperator:
    """Truncation of the model operator to (0, mu); variant 'N' or 'D' at mu."""
    p = _p(p)
    if not mu > 0:
        raise RejectedInputError("mu must be positive")
    variant = variant.upper()
    if variant not in ("N", "D", "NEUMANN", "DIRICHLET"):
        raise RejectedInputError(f"unknown variant {variant!r}")
    bc_right = (BoundaryCondition.NEUMANN if variant.startswith("N")
                else BoundaryCondition.DIRICHLET)
    grid = Grid1D(0.0, mu, n_cells, BoundaryCondition.DIRICHLET, bc_right)
    return assemble_tridiagonal(grid, 1.0, lambda x: x ** p)


def build_K_h(p, h: float, k: float, n_cells: int,
              bc_right: BoundaryCondition = BoundaryCondition.DIRICHLET
              ) -> TridiagonalOperator:
    """h^2 f'^2 + 2 x^p f^2 on (0, h^k), Dirichlet at both ends by default."""
    p = _p(p)
    if not 0 < h < 1:
        raise RejectedInputError("h must lie in (0, 1)")
    if not 0 < k < 2.0 / (2.0 + p):
        warnings.warn(f"k={k} outside (0, {2.0/(2.0+p):.4f}); "
                      "asymptotic regime not guaranteed", stacklevel=2)
    grid = Grid1D(0.0, h ** k, n_cells, BoundaryCondition.DIRICHLET, bc_right)
    return assemble_tridiagonal(grid, h * h, lambda x: 2.0 * x ** p)


def _grid_with_zero_node(left_target: float, right: float, n_cells: int,
                         bc_left: BoundaryCondition, bc_right: BoundaryCondition
                         ) -> tuple[Grid1D, int]:
    """Grid spanning at least [left_target, right] with x = 0 on a node.

    n_cells counts cells on (0, right); the left endpoint is rounded outward
    to a node multiple, so doubling n_cells halves the spacing exactly.
    """
    if not (left_target < 0 < right):
        raise RejectedInputError("need left_target < 0 < right")
    s = right / n_cells
    n_left = max(1, math.ceil(-left_target / s - 1e-12))
    grid = Grid1D(-n_left * s, right, n_left + n_cells, bc_left, bc_right)
    return grid, n_left


def _piecewise_potential(plateau: float, cusp_coeff: float, p: float,
                         spacing: float):
    """plateau (x<0) / cusp_coeff*x^p (x>0), averaged at the jump node."""
    def potential(x):
        x = np.asarray(x, dtype=float)
        v = np.where(x < 0.0, plateau, cusp_coeff * x.clip(min=0.0) ** p)
        return np.where(np.abs(x) < spacing / 2.0, plateau / 2.0, v)
    return potential


def build_Z_h(p, h: float, k: float, left_trunc: float, n_cells: int
              ) -> TridiagonalOperator:
    """-h^2 f'' + V f on (left_trunc, h^k], V = 1 (x<0) / 2x^p (x>0).

    Neumann at the right end, decay truncation (Dirichlet) on the left; only
    eigenvalues below the plateau height 1 are trustworthy.
    """
    p = _p(p)
    if not 0 < h < 1:
        raise RejectedInputError("h must lie in (0, 1)")
    grid, _ = _grid_with_zero_node(left_trunc, h ** k, n_cells,
                                   BoundaryCondition.DECAY_TRUNCATION,
                                   BoundaryCondition.NEUMANN)
    pot = _piecewise_potential(1.0, 2.0, p, grid.spacing)
    return assemble_tridiagonal(grid, h * h, pot)


def default_left_truncation(h_coeff_sqrt: float, plateau: float, e_target: float,
                            margin: float = 30.0) -> float:
    """Left endpoint making the plateau decay factor negligible (< 1e-12).

    Refuses targets at or above the plateau, where the truncated model's
    discrete spectrum no longer approximates the original operator.
    """
    if e_target >= plateau:
        raise RejectedInputError(
            f"target eigenvalue {e_target} is not below the plateau {plateau}")
    return -margin * h_coeff_sqrt / math.sqrt(plateau - e_target)


def build_B(p, lam: float, mu: float, left_trunc: float, n_cells: int
            ) -> TridiagonalOperator:
    """f'^2 + lam * f^2 (x<0) + x^p f^2 (x>0) on (left_trunc, mu], Neumann at mu."""
    p = _p(p)
    if not (lam > 0 and mu > 0):
        raise RejectedInputError("need lambda > 0 and mu > 0")
    grid, _ = _grid_with_zero_node(left_trunc, mu, n_cells,
                                   BoundaryCondition.DECAY_TRUNCATION,
                                   BoundaryCondition.NEUMANN)
    s = grid.spacing

    def potential(x):
        v = np.where(x < 0.0, lam, x.clip(min=0.0) ** p)
        return np.where(np.abs(x) < s / 2.0, lam / 2.0, v)

    return assemble_tridiagonal(grid, 1.0, potential)


# ---------------------------------------------------------------------------
# reference eigenvalues of the model operator

def suggest_right_endpoint(p, e_max: float) -> float:
    """Truncation with an Agmon decay margin: x^p >= e_max + 40 at the endpoint."""
    return max(6.0, (e_max + 40.0) ** (1.0 / _p(p)))


@lru_cache(maxsize=None)
def _model_a_cached(p: float, n_max: int, n_cells: int, tol: float) -> SpectrumResult:
    right = suggest_right_endpoint(p, 60.0)
    def solve(r):
        return extrapolated_eigenvalues(
            lambda n: build_model_A(p, r, n), n_max, n_cells, tol,
            operator="model_A", params={"p": p, "right": r})
    result = solve(right)
    needed = suggest_right_endpoint(p, float(result.eigenvalues[-1]))
    if needed > right * 1.01:
        result = solve(needed)
    return result


def model_a_eigenvalues(p, n_max: int, n_cells: int = 4096,
                        tol: float = 1e-13) -> SpectrumResult:
    """Extrapolated lowest eigenvalues of the model operator, cached per (p, n)."""
    return _model_a_cached(_p(p), int(n_max), int(n_cells), float(tol))


# ---------------------------------------------------------------------------
# identity validators and rate studies

@dataclass
class ScalingReport:
    identity: str
    params: dict
    lhs: list[float]
    rhs: list[float]
    defect: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps({"identity": self.identity, "params": self.params,
                           "lhs": self.lhs, "rhs": self.rhs,
                           "defect": self.defect, "pass": self.passed})

    def to_csv_rows(self) -> list[str]:
        pstr = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return [f"{self.identity},{pstr},{l:.17g},{r:.17g},{self.defect:.17g},{self.passed}"
                for l, r in zip(self.lhs, self.rhs)]


def _compare_scaled(small_op: TridiagonalOperator, big_op: TridiagonalOperator,
                    factor: float, n_values: int, identity: str, params: dict,
                    rhs_fault: float = 0.0, rel_tol: float = 1e-10) -> ScalingReport:
    scale = max(abs(small_op.lower_bound()), factor)
    lhs = tridiag_lowest_eigenvalues(small_op, n_values,
                                     tol=max(1e-300, 1e-15 * scale),
                                     compute_residuals=False).eigenvalues
    big = tridiag_lowest_eigenvalues(big_op, n_values, tol=1e-14,
                                     compute_residuals=False).eigenvalues
    rhs = factor * big * (1.0 + rhs_fault)
    defect = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300)))
    return ScalingReport(identity, params, [float(v) for v in lhs],
                         [float(v) for v in rhs], defect, defect <= rel_tol)


def check_scaling_K_to_C(p, h: float, k: float, variant: str = "D",
                         n_cells: int = 1024, n_values: int = 3,
                         mapped: bool = True, rhs_fault: float = 0.0
                         ) -> ScalingReport:
    """Eigenvalue identity between the semiclassical operator and its rescaling.

    In mapped mode the small-interval matrix is the literal scalar multiple of
    the truncated-model matrix on the affinely mapped grid, so the identity is
    a floating-point statement. With mapped=False both sides are assembled
    independently and the defect only vanishes under refinement.
    """
    p = _p(p)
    factor = scaling_factor(p, h)
    mu = scaling_mu(p, h, k)
    c_op = build_C(p, mu, variant, n_cells)
    params = {"p": p, "h": h, "k": k, "variant": variant, "n_cells": n_cells,
              "mapped": mapped}
    bc_right = (BoundaryCondition.NEUMANN if variant.upper().startswith("N")
                else BoundaryCondition.DIRICHLET)
    if mapped:
        grid = Grid1D(0.0, scaling_gamma(p, h) * mu, n_cells,
                      BoundaryCondition.DIRICHLET, bc_right)
        k_op = c_op.scaled(factor, grid)
    else:
        k_op = build_K_h(p, h, k, n_cells, bc_right)
    return _compare_scaled(k_op, c_op, factor, n_values,
                           "K_to_C", params, rhs_fault)


def check_scaling_Z_to_B(p, h: float, k: float, n_cells: int = 1024,
                         n_values: int = 3, mapped: bool = True,
                         rhs_fault: float = 0.0) -> ScalingReport:
    """Eigenvalue identity between the plateau operator and its rescaling."""
    p = _p(p)
    factor = scaling_factor(p, h)
    mu = scaling_mu(p, h, k)
    lam = plateau_lambda(p, h)
    gamma = scaling_gamma(p, h)
    left_b = -35.0 / math.sqrt(max(lam / 2.0, 1.0))
    b_op = build_B(p, lam, mu, left_b, n_cells)
    params = {"p": p, "h": h, "k": k, "n_cells": n_cells, "mapped": mapped}
    if mapped:
        bgrid = b_op.grid
        grid = Grid1D(gamma * bgrid.left, gamma * bgrid.right, bgrid.n_cells,
                      bgrid.bc_left, bgrid.bc_right)
        z_op = b_op.scaled(factor, grid)
    else:
        z_op = build_Z_h(p, h, k, gamma * left_b, n_cells)
    return _compare_scaled(z_op, b_op, factor, n_values,
                           "Z_to_B", params, rhs_fault)


@dataclass
class RateReport:
    p: float
    n: int
    mu_list: list[float]
    reference: float
    errors_neumann: list[float]
    errors_dirichlet: list[float]
    slope_neumann: float
    slope_dirichlet: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


def _loglog_slope(mus, errs) -> float:
    mus = np.asarray(mus, float)
    errs = np.maximum(np.abs(np.asarray(errs, float)), 1e-300)
    return float(np.polyfit(np.log(mus), np.log(errs), 1)[0])


def rate_C_to_A(p, n: int, mu_list, n_cells: int = 2048) -> RateReport:
    """Truncation error of both C variants against the model eigenvalue.

    PASS means mu^2 * |error| is non-increasing along mu_list for both
    variants (the convergence statement is an upper bound O(mu^-2); faster
    decay passes). Dirichlet errors are >= 0 and Neumann errors <= 0 by
    bracketing, which the report keeps signed.
    """
    p = _p(p)
    mu_list = [float(m) for m in mu_list]
    if len(mu_list) < 3 or any(b <= a for a, b in zip(mu_list, mu_list[1:])):
        raise RejectedInputError("mu_list must be ascending with >= 3 entries")
    ref = float(model_a_eigenvalues(p, n).eigenvalues[n - 1])
    errs = {"N": [], "D": []}
    for variant in ("N", "D"):
        for mu in mu_list:
            res = extrapolated_eigenvalues(
                lambda m, _mu=mu, _v=variant: build_C(p, _mu, _v, m),
                n, n_cells, operator="C", params={"p": p, "mu": mu, "variant": variant})
            errs[variant].append(float(res.eigenvalues[n - 1]) - ref)
    ok = True
    for variant in ("N", "D"):
        scaled = [m * m * abs(e) for m, e in zip(mu_list, errs[variant])]
        ok = ok and all(b <= a + 1e-9 for a, b in zip(scaled, scaled[1:]))
    return RateReport(p, n, mu_list, ref, errs["N"], errs["D"],
                      _loglog_slope(mu_list, errs["N"]),
                      _loglog_slope(mu_list, errs["D"]), ok)
