"""Tests for the 2D mesh, assembly, and leaky eigenvalue solves."""
import math

import numpy as np
import pytest

from cuspspec.numcore import (EigensolveError, RejectedInputError,
                              integrate_adaptive)
from cuspspec.leaky2d import (CuspCurve, Mesh2D, assemble, build_mesh,
                              solve_leaky, sweep_alpha)

# closed form for the p=2, eps=0.5 branch length: [s*sqrt(1+4s^2)/2
# + asinh(2s)/4] at s = 1/2
BRANCH_LENGTH_P2 = math.sqrt(2.0) / 4.0 + math.asinh(1.0) / 4.0


@pytest.fixture(scope="module")
def curve():
    return CuspCurve(2.0, 0.5)


@pytest.fixture(scope="module")
def graded(curve):
    mesh = build_mesh(curve, 16, 2, alpha_target=8.0)
    return mesh, assemble(curve, mesh, 8.0)


def test_curve_validation():
    with pytest.raises(RejectedInputError):
        CuspCurve(1.0, 0.5)
    with pytest.raises(RejectedInputError):
        CuspCurve(2.0, 1.5)


def test_curve_weight_and_length(curve):
    assert curve.weight(0.0) == pytest.approx(1.0)
    oracle = integrate_adaptive(lambda s: math.sqrt(1 + 4 * s * s), 0.0, 0.5)
    assert curve.branch_length() == pytest.approx(oracle, abs=1e-12)
    assert curve.branch_length() == pytest.approx(BRANCH_LENGTH_P2, abs=1e-12)
    assert curve.length() == pytest.approx(2 * BRANCH_LENGTH_P2, abs=1e-12)


def test_uniform_mesh_counts(curve):
    mesh = build_mesh(curve, 16, 0)
    assert len(mesh.triangles) == 2 * 16 * 16
    assert mesh.n_nodes == 17 * 17
    assert np.all(mesh.areas() > 0)


def test_bisection_preserves_quality_and_orientation(curve):
    mesh = build_mesh(curve, 16, 3, alpha_target=12.0)
    assert np.all(mesh.areas() > 0)
    assert math.degrees(mesh.min_angle()) > 44.9
    # total area is conserved by conforming bisection
    assert np.sum(mesh.areas()) == pytest.approx(1.0, abs=1e-12)


def test_refinement_localized_to_tube(curve):
    base = build_mesh(curve, 16, 0)
    fine = build_mesh(curve, 16, 2, alpha_target=16.0)
    halfwidth = fine.grading["tube_halfwidth"]
    new_nodes = fine.nodes[base.n_nodes:]
    dists = np.min(
        np.linalg.norm(new_nodes[:, None, :] - curve.polyline(512)[None], axis=2),
        axis=1)
    # closure bisections may spill at most one coarse cell beyond the tube
    assert np.max(dists) <= halfwidth + 2.0 * (2 * 0.5 / 16) * math.sqrt(2)


def test_mesh_export_import_roundtrip(curve):
    mesh = build_mesh(curve, 16, 1, alpha_target=8.0)
    again = Mesh2D.import_text(mesh.export_text())
    assert np.array_equal(again.triangles, mesh.triangles)
    assert np.array_equal(again.boundary_nodes, mesh.boundary_nodes)
    assert np.allclose(again.nodes, mesh.nodes, atol=0, rtol=0)
    assert again.grading == mesh.grading


def test_mesh_rejects_bad_parameters(curve):
    with pytest.raises(RejectedInputError):
        build_mesh(curve, 8, 0)
    with pytest.raises(RejectedInputError):
        build_mesh(curve, 16, -1)


def test_assembly_matrices_symmetric(graded):
    _, asm = graded
    for matrix in (asm.stiffness, asm.mass, asm.curve_mass):
        dense = matrix.to_dense()
        assert np.array_equal(dense, dense.T)


def test_partition_of_unity_curve_mass(curve, graded):
    _, asm = graded
    ones = np.ones(asm.mesh.n_nodes)
    total = asm.curve_mass.quadratic_form(ones)
    assert total == pytest.approx(2 * BRANCH_LENGTH_P2, abs=1e-10)


def test_mass_matrix_integrates_constants(graded):
    _, asm = graded
    ones = np.ones(asm.mesh.n_nodes)
    assert asm.mass.quadratic_form(ones) == pytest.approx(1.0, abs=1e-12)


def test_curve_quadrature_stability(curve):
    mesh = build_mesh(curve, 16, 1, alpha_target=8.0)
    a4 = assemble(curve, mesh, 8.0, quad_order=4)
    a8 = assemble(curve, mesh, 8.0, quad_order=8)
    e4 = solve_leaky(a4, 1).eigenvalues[0]
    e8 = solve_leaky(a8, 1).eigenvalues[0]
    assert abs(e4 - e8) < 1e-8


def test_assembly_rejects_curve_outside_mesh():
    small_curve = CuspCurve(2.0, 0.25)
    mesh = build_mesh(small_curve, 16, 0)
    with pytest.raises(RejectedInputError):
        assemble(CuspCurve(2.0, 0.5), mesh, 1.0)


def test_alpha_zero_recovers_dirichlet_square(curve):
    mesh = build_mesh(curve, 32, 1)
    asm = assemble(curve, mesh, 0.0)
    result = solve_leaky(asm, 1)
    exact = 2.0 * (math.pi / 1.0) ** 2
    assert result.eigenvalues[0] > 0
    assert result.eigenvalues[0] == pytest.approx(exact, rel=2e-3)


def test_galerkin_monotone_under_refinement(curve):
    values = []
    for levels in (0, 1, 2):
        mesh = build_mesh(curve, 16, levels, alpha_target=8.0)
        asm = assemble(curve, mesh, 8.0)
        values.append(solve_leaky(asm, 1).eigenvalues[0])
    assert values[0] >= values[1] - 1e-9 >= values[2] - 2e-9


def test_solver_matches_dense_small_mesh(curve):
    import scipy.linalg as sla
    mesh = build_mesh(curve, 16, 0)
    asm = assemble(curve, mesh, 8.0)
    result = solve_leaky(asm, 3)
    interior = mesh.interior_nodes()
    s = (asm.stiffness.to_dense()
         - 8.0 * asm.curve_mass.to_dense())[np.ix_(interior, interior)]
    m = asm.mass.to_dense()[np.ix_(interior, interior)]
    dense = np.sort(sla.eigh(s, m, eigvals_only=True))[:3]
    assert result.eigenvalues == pytest.approx(dense, abs=1e-9)


def test_sweep_monotone_in_alpha(curve):
    entries = sweep_alpha(curve, [4.0, 8.0, 12.0], k=1,
                          base_cells=16, band_levels=2)
    values = [e.result.eigenvalues[0] for e in entries]
    assert all(e.error is None for e in entries)
    assert values[0] >= values[1] >= values[2]


def test_sweep_rejects_unsorted_alphas(curve):
    with pytest.raises(RejectedInputError):
        sweep_alpha(curve, [8.0, 4.0])
