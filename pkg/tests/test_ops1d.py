"""Tests for the 1D operator chain builders and exact-identity validators."""
import math

import numpy as np
import pytest

from cuspspec.numcore import (BoundaryCondition, RejectedInputError,
                              extrapolated_eigenvalues)
from cuspspec.ops1d import (CuspExponent, build_B, build_C, build_K_h,
                            build_model_A, build_Z_h, check_scaling_K_to_C,
                            check_scaling_Z_to_B, default_k,
                            default_left_truncation, model_a_eigenvalues,
                            plateau_lambda, rate_C_to_A, scaling_factor,
                            scaling_gamma, scaling_mu, suggest_right_endpoint)

# dense fine-grid oracle values for p=4 (independent diagonalization,
# two truncation radii agreeing to 1e-8)
P4_ORACLE = (3.79967303, 11.64474551, 21.23837291)


def test_cusp_exponent_validation():
    with pytest.raises(RejectedInputError):
        CuspExponent(1.0)
    assert CuspExponent(1.5).p == 1.5


def test_scaling_constants_are_consistent():
    for p in (1.5, 2.0, 3.0, 5.0):
        for h in (0.2, 0.01):
            gamma = scaling_gamma(p, h)
            factor = scaling_factor(p, h)
            # the rescaling x = gamma*y maps h^2 d^2/dx^2 to factor * d^2/dy^2
            assert gamma ** 2 * factor == pytest.approx(h * h, rel=1e-14)
            # and the cusp potential 2x^p to factor * y^p
            assert 2.0 * gamma ** p == pytest.approx(factor, rel=1e-14)
            # plateau: lambda * factor restores the unit plateau
            assert plateau_lambda(p, h) * factor == pytest.approx(1.0, rel=1e-14)
            # interval endpoint: gamma * mu = h^k
            k = default_k(p)
            assert gamma * scaling_mu(p, h, k) == pytest.approx(h ** k, rel=1e-14)


def test_model_a_quadratic_case_golden():
    result = model_a_eigenvalues(2.0, 5)
    assert result.eigenvalues == pytest.approx([3.0, 7.0, 11.0, 15.0, 19.0],
                                               abs=1e-8)


def test_model_a_quartic_case_oracle():
    result = model_a_eigenvalues(4.0, 3)
    assert result.eigenvalues == pytest.approx(P4_ORACLE, abs=1e-6)


def test_model_a_truncation_insensitive():
    a = extrapolated_eigenvalues(lambda n: build_model_A(2.0, 7.0, n), 1, 2048)
    b = extrapolated_eigenvalues(lambda n: build_model_A(2.0, 9.0, n), 1, 2048)
    assert a.eigenvalues[0] == pytest.approx(b.eigenvalues[0], abs=1e-10)


def test_suggest_right_endpoint_grows_with_target():
    assert suggest_right_endpoint(2.0, -10.0) == 6.0  # floor at 6
    assert suggest_right_endpoint(2.0, 3.0) == pytest.approx(math.sqrt(43.0))
    assert suggest_right_endpoint(2.0, 100.0) > 10.0


def test_truncation_bracket_direction():
    # Neumann truncation lowers, Dirichlet truncation raises (large mu)
    ref = model_a_eigenvalues(2.0, 1).eigenvalues[0]
    n_val = extrapolated_eigenvalues(lambda m: build_C(2.0, 4.0, "N", m),
                                     1, 2048).eigenvalues[0]
    d_val = extrapolated_eigenvalues(lambda m: build_C(2.0, 4.0, "D", m),
                                     1, 2048).eigenvalues[0]
    assert n_val <= ref + 1e-8 <= d_val + 2e-8


def test_k_h_outside_regime_warns():
    p = 2.0
    with pytest.warns(UserWarning):
        build_K_h(p, 0.1, 0.9, 256)


def test_z_h_grid_has_node_at_zero():
    op = build_Z_h(2.0, 0.05, 1.0 / 3.0, -0.7, 512)
    nodes = op.grid.nodes()
    assert np.min(np.abs(nodes)) < 1e-15
    assert op.grid.left <= -0.7


def test_left_truncation_refuses_plateau_targets():
    with pytest.raises(RejectedInputError):
        default_left_truncation(0.1, 1.0, 1.0)
    assert default_left_truncation(0.1, 1.0, 0.5) < 0


def test_scaling_identity_k_to_c_all_variants():
    for variant in ("N", "D"):
        report = check_scaling_K_to_C(2.0, 0.05, 0.3, variant=variant)
        assert report.passed and report.defect <= 1e-10


def test_scaling_identity_unmapped_assembly():
    # independently assembled operators satisfy the same identity
    report = check_scaling_K_to_C(2.0, 0.05, 0.3, mapped=False)
    assert report.passed
    report = check_scaling_Z_to_B(2.0, 0.05, 0.3, mapped=False)
    assert report.passed


def test_scaling_identity_fault_injection_fails():
    report = check_scaling_K_to_C(2.0, 0.05, 0.3, rhs_fault=1e-6)
    assert not report.passed
    report = check_scaling_Z_to_B(2.0, 0.05, 0.3, rhs_fault=1e-6)
    assert not report.passed


def test_scaling_report_serialization():
    report = check_scaling_Z_to_B(3.0, 0.1, 0.2)
    blob = report.to_json()
    assert '"identity": "Z_to_B"' in blob
    rows = report.to_csv_rows()
    assert len(rows) == len(report.lhs)
    assert float(rows[0].split(",")[-3]) == report.rhs[0]


def test_rate_report_monotone_scaled_error():
    report = rate_C_to_A(2.0, 1, [2.0, 3.0, 4.0])
    assert report.passed
    # signed errors keep the bracketing directions
    assert all(e <= 0 for e in report.errors_neumann)
    assert all(e >= 0 for e in report.errors_dirichlet)


def test_rate_rejects_bad_mu_list():
    with pytest.raises(RejectedInputError):
        rate_C_to_A(2.0, 1, [3.0, 2.0, 4.0])
    with pytest.raises(RejectedInputError):
        rate_C_to_A(2.0, 1, [2.0, 3.0])


def test_builders_reject_bad_inputs():
    with pytest.raises(RejectedInputError):
        build_model_A(2.0, 6.0, 8)  # too few cells
    with pytest.raises(RejectedInputError):
        build_C(2.0, -1.0, "N", 256)
    with pytest.raises(RejectedInputError):
        build_C(2.0, 2.0, "X", 256)
    with pytest.raises(RejectedInputError):
        build_K_h(2.0, 1.5, 0.3, 256)
    with pytest.raises(RejectedInputError):
        build_B(2.0, -1.0, 2.0, -5.0, 256)
