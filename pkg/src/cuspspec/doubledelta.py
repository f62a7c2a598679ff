"""Closed-form spectral data of the two-point attractive delta well.

The operator acts on the line with form integral f'^2 - beta*(f(x)^2 + f(-x)^2);
the interface condition [f'] + beta*f = 0 at +-x turns bound states into roots
of explicit secular equations, solved here by bracketed bisection. A finite
difference discretization of the same form serves as the independent oracle.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numcore import (BoundaryCondition, Grid1D, RejectedInputError,
                      TridiagonalOperator, assemble_tridiagonal,
                      integrate_segments, richardson_extrapolate,
                      tridiag_lowest_eigenvalues)


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class DoubleDeltaSpec:
    x: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.x > 0 or not self.beta > 0:
            raise RejectedInputError("need x > 0 and beta > 0")


@dataclass(frozen=True)
class BoundState:
    kappa: float
    parity: Parity

    @property
    def energy(self) -> float:
        return -self.kappa ** 2


def _bisect(fun, lo: float, hi: float, tol: float) -> float:
    flo = fun(lo)
    if flo == 0.0:  # residual underflowed: the root coincides with lo
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        fm = fun(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_even(x: float, beta: float = 1.0) -> BoundState:
    """Even bound state: unique root of 2*kappa = beta*(1 + exp(-2*kappa*x)).

    The root always exists and lies in (beta/2, beta).
    """
    spec = DoubleDeltaSpec(x, beta)
    def residual(kappa):
        # (2k - beta) kept separate from the exponentially small term to
        # avoid cancellation when the root is very close to beta/2
        return (2.0 * kappa - spec.beta) - spec.beta * math.exp(-2.0 * kappa * spec.x)
    kappa = _bisect(residual, spec.beta / 2.0, spec.beta, 1e-14 * max(1.0, spec.beta))
    return BoundState(kappa, Parity.EVEN)


def solve_odd(x: float, beta: float = 1.0) -> BoundState | None:
    """Odd bound state: positive root of 2*kappa = beta*(1 - exp(-2*kappa*x)).

    Exists iff beta*x > 1; returns None otherwise (the second min-max value
    then sits at the essential-spectrum bottom 0).
    """
    spec = DoubleDeltaSpec(x, beta)
    if spec.beta * spec.x <= 1.0:
        return None
    def residual(kappa):
        return (2.0 * kappa - spec.beta) + spec.beta * math.exp(-2.0 * kappa * spec.x)
    lo = 1e-16 * spec.beta
    if residual(lo) >= 0.0:
        return BoundState(0.0, Parity.ODD)
    kappa = _bisect(residual, lo, spec.beta / 2.0, 1e-14 * max(1.0, spec.beta))
    if kappa < 1e-13:
        kappa = 0.0  # energy continuity at the threshold
    return BoundState(kappa, Parity.ODD)


def sigma(x: float) -> float:
    """Ground energy of the unit-strength two-delta well at half-separation x."""
    return -solve_even(x, 1.0).kappa ** 2


def lambda1_scaled(x: float, beta: float) -> float:
    """Ground energy at strength beta via the scaling relation beta^2*sigma(beta*x)."""
    DoubleDeltaSpec(x, beta)
    return beta ** 2 * sigma(beta * x)


def kappa_effective(x1: float, h: float, p: float, k: float) -> float:
    """Lowest transverse mode of the cusp cross-section at height x1.

    Equals w^2 * sigma(w * x1^p) with the arclength weight
    w = sqrt(1 + p^2 h^(2 + 2k(p-1))).
    """
    if not (x1 > 0 and 0 < h < 1 and p > 1 and k > 0):
        raise RejectedInputError("need x1 > 0, h in (0,1), p > 1, k > 0")
    w2 = 1.0 + p ** 2 * h ** (2.0 + 2.0 * k * (p - 1.0))
    return w2 * sigma(math.sqrt(w2) * x1 ** p)


# ---------------------------------------------------------------------------
# even eigenfunction in closed form

def _normalization_sq(x: float, kappa: float) -> float:
    return x + math.sinh(2 * kappa * x) / (2 * kappa) + math.cosh(kappa * x) ** 2 / kappa


def eval_psi(x: float, points) -> np.ndarray:
    """L2-normalized positive even eigenfunction at the given points.

    cosh(kappa*y) between the wells, matched decaying exponential outside.
    """
    state = solve_even(x, 1.0)
    kappa = state.kappa
    amp = 1.0 / math.sqrt(_normalization_sq(x, kappa))
    y = np.abs(np.asarray(points, dtype=float))
    inside = np.cosh(kappa * np.minimum(y, x))
    tail = np.exp(-kappa * np.maximum(y - x, 0.0))
    return amp * inside * tail


def _kappa_prime(x: float, kappa: float) -> float:
    # implicit differentiation of 2*kappa = 1 + exp(-2*kappa*x)
    e = math.exp(-2.0 * kappa * x)
    return -kappa * e / (1.0 + x * e)


def eval_dpsi_dx(x: float, points) -> np.ndarray:
    """Derivative of the even eigenfunction with respect to the well position x."""
    kappa = solve_even(x, 1.0).kappa
    kp = _kappa_prime(x, kappa)
    n2 = _normalization_sq(x, kappa)
    amp = n2 ** -0.5
    # d/dx of the normalization integral
    dn2 = (1.0
           + math.cosh(2 * kappa * x) * (kp * x + kappa) / kappa
           - math.sinh(2 * kappa * x) * kp / (2 * kappa ** 2)
           + math.sinh(2 * kappa * x) * (kp * x + kappa) / kappa
           - math.cosh(kappa * x) ** 2 * kp / kappa ** 2)
    damp = -0.5 * n2 ** -1.5 * dn2
    y = np.abs(np.asarray(points, dtype=float))
    out = np.empty_like(y)
    inner = y <= x
    yi = y[inner]
    out[inner] = damp * np.cosh(kappa * yi) + amp * kp * yi * np.sinh(kappa * yi)
    yo = y[~inner]
    psi_o = amp * math.cosh(kappa * x) * np.exp(-kappa * (yo - x))
    logderiv = (damp / amp + math.tanh(kappa * x) * (kp * x + kappa)
                - kp * (yo - x) + kappa)
    out[~inner] = psi_o * logderiv
    return out


def dpsi_dx_norm(x: float, order: int = 12) -> float:
    """L2 norm of d(psi)/dx, by composite quadrature of the closed form."""
    kappa = solve_even(x, 1.0).kappa
    cutoff = x + 80.0 / kappa
    breaks = np.concatenate([np.linspace(0.0, x, 33),
                             x + (cutoff - x) * np.linspace(0, 1, 65) ** 2])
    val = integrate_segments(lambda t: eval_dpsi_dx(x, t) ** 2, breaks, order)
    return math.sqrt(2.0 * val)


# ---------------------------------------------------------------------------
# grid oracle

def double_delta_operator(x: float, beta: float = 1.0, refine: int = 0,
                          target_spacing: float = 0.01,
                          padding: float = 40.0) -> TridiagonalOperator:
    """Finite-difference discretization of the two-delta form on [-L, L].

    The wells land exactly on grid nodes; the delta terms enter the diagonal
    as -beta/spacing. Dirichlet truncation at L = x + padding.
    """
    DoubleDeltaSpec(x, beta)
    j = max(1, round(x / target_spacing)) * 2 ** refine
    s = x / j
    n_side = math.ceil((x + padding) / s)
    grid = Grid1D(-n_side * s, n_side * s, 2 * n_side,
                  BoundaryCondition.DECAY_TRUNCATION, BoundaryCondition.DECAY_TRUNCATION)
    op = assemble_tridiagonal(grid, 1.0, lambda t: np.zeros_like(t))
    diag = op.diagonal.copy()
    for node in (n_side - j, n_side + j):
        diag[node - 1] -= beta / s  # -1: the Dirichlet end node was eliminated
    return TridiagonalOperator(diag, op.off_diagonal, grid)


def grid_spectrum(x: float, beta: float = 1.0, k: int = 1,
                  target_spacing: float = 0.01):
    """Extrapolated k lowest eigenvalues of the discretized two-delta well."""
    params = {"x": x, "beta": beta}
    coarse = tridiag_lowest_eigenvalues(
        double_delta_operator(x, beta, 0, target_spacing), k,
        operator="double_delta", params=params, refinement=0)
    fine = tridiag_lowest_eigenvalues(
        double_delta_operator(x, beta, 1, target_spacing), k,
        operator="double_delta", params=params, refinement=1)
    return richardson_extrapolate(coarse, fine)


def sigma_table(xs) -> list[dict]:
    """Rows (x, sigma, kappa_even, kappa_odd or None) for CSV emission."""
    rows = []
    for x in np.asarray(xs, dtype=float):
        even = solve_even(float(x), 1.0)
        odd = solve_odd(float(x), 1.0)
        rows.append({
            "x": float(x),
            "sigma": even.energy,
            "kappa_even": even.kappa,
            "kappa_odd": None if odd is None else odd.kappa,
        })
    return rows
