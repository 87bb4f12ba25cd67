import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ripple_entropy.spectral import (RippleSolverConfig, SpectralDecomposition, SpectralError, _order_with_ties,
                                     billiard_perimeter, build_geometry, fix_signs, ripple_eigenvalues, solve_ripple,
                                     solve_square, square_modes, verify_spectrum, weyl_count, weyl_energy)

FAST = RippleSolverConfig(certify=False)


def rectangle_levels(lx: float, ly: float, n: int) -> np.ndarray:
    m = np.arange(1, 80)
    E = np.pi**2 * (m[:, None] ** 2 / lx**2 + m[None, :] ** 2 / ly**2)
    return np.sort(E.ravel())[:n]


# geometry -------------------------------------------------------------------


def test_bounding_box_for_large_ripple():
    g = build_geometry(5.5, 1.1, 180, 180)
    assert g.box_size == pytest.approx((13.2, 11.0))


def test_square_limit_has_side_11_and_area_121():
    g = build_geometry(5.5, 0.0, 180, 180)
    assert g.is_square
    assert g.box_size == pytest.approx((11.0, 11.0))
    assert g.area == 121.0


def test_mask_area_within_one_percent():
    g = build_geometry(5.5, 0.55, 180, 180)
    assert abs(g.mask_area - 121.0) / 121.0 < 0.01


def test_self_intersecting_boundary_rejected():
    with pytest.raises(ValueError):
        build_geometry(5.5, 5.5)
    with pytest.raises(ValueError):
        build_geometry(5.5, -0.1)


def test_coarse_grid_is_noted_not_rejected():
    g = build_geometry(5.5, 0.55, 32, 32)
    assert g.notes and "coarser" in g.notes[0]


def test_perimeter_matches_dense_trapezoid():
    b, a = 5.5, 1.1
    y = np.linspace(0, 2 * b, 200001)
    ds = np.sqrt(1 + (a * np.pi / b * np.sin(np.pi * y / b)) ** 2)
    side = np.sum((ds[1:] + ds[:-1]) / 2) * (y[1] - y[0])
    assert billiard_perimeter(b, a) == pytest.approx(4 * (b - a) + 2 * side, rel=1e-9)
    assert billiard_perimeter(b, 0.0) == pytest.approx(8 * b)


@given(st.floats(0.0, 0.9), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_mask_matches_boundary_formula(frac, u, v):
    b = 5.5
    a = frac * b
    g = build_geometry(b, a, 70, 70)
    i = int(u * 69)
    j = int(v * 69)
    if j in (0, 69):
        assert not g.grid.mask[i, j]
    else:
        inside = abs(g.grid.x[i]) < b - a * math.cos(math.pi * g.grid.y[j] / b)
        assert g.grid.mask[i, j] == inside


# square ---------------------------------------------------------------------


def test_square_ground_state_energy():
    spec = solve_square(5.5, 10)
    assert spec.energies[0] == pytest.approx(2 * math.pi**2 / 30.25, rel=1e-14)
    assert spec.energies[0] == pytest.approx(0.65255, abs=2e-5)


def test_square_degenerate_pair_in_lexicographic_order():
    E, modes = square_modes(5.5, 3)
    assert E[1] == E[2]
    assert modes[1].tolist() == [1, 2] and modes[2].tolist() == [2, 1]


def test_square_count_below_100_matches_enumeration():
    # 226 lattice points (n_x, n_y >= 1) with pi^2 (n_x^2 + n_y^2) / 5.5^2 <= 100
    spec = solve_square(5.5, 300)
    assert int(np.sum(spec.energies <= 100.0)) == 226


def test_square_aligned_modes_are_exactly_orthonormal():
    spec = solve_square(5.5, 120)
    rep = verify_spectrum(spec)
    assert rep.norm_residual.max() < 1e-10
    assert rep.max_offdiag < 1e-10
    assert rep.ok


def test_square_cap_enforced():
    with pytest.raises(ValueError):
        solve_square(5.5, 2000)


def test_square_on_foreign_grid_is_reorthonormalized():
    g = build_geometry(5.5, 0.55, 120, 120)
    spec = solve_square(5.5, 80, grid=g.grid, origin=(-2.75, 2.75))
    rep = verify_spectrum(spec)
    assert rep.norm_residual.max() < 1e-8 and rep.max_offdiag < 1e-6
    assert "grid_gram_defect" in spec.meta


# ripple -----------------------------------------------------------------------


def test_ripple_solver_reproduces_square_at_a0():
    E = ripple_eigenvalues(5.5, 0.0, 20, cutoff=1.5)
    ref = np.sort(np.pi**2 * np.add.outer(np.arange(1, 12) ** 2, np.arange(1, 12) ** 2).ravel() / 121.0)[:20]
    assert E[0] == pytest.approx(0.16313395704279932, rel=1e-10)
    np.testing.assert_allclose(E, ref, rtol=1e-10)


@pytest.fixture(scope="module")
def small_ripple():
    return solve_ripple(build_geometry(5.5, 1.1, 96, 96), 60, FAST)


def test_domain_monotonicity_first_50(small_ripple):
    E = small_ripple.energies[:50]
    inner = rectangle_levels(2 * (5.5 - 1.1), 11.0, 50)
    outer = rectangle_levels(2 * (5.5 + 1.1), 11.0, 50)
    assert np.all(E <= inner * (1 + 1e-9))
    assert np.all(E >= outer * (1 - 1e-9))


def test_positive_and_ascending(small_ripple):
    assert np.all(small_ripple.energies > 0)
    assert np.all(np.diff(small_ripple.energies) >= 0)


def test_grid_orthonormality_and_boundary(small_ripple):
    rep = verify_spectrum(small_ripple)
    assert rep.norm_residual.max() < 1e-8
    assert rep.max_offdiag < 1e-6
    assert rep.boundary_leak.max() == 0.0


def test_residual_and_metadata(small_ripple):
    assert small_ripple.meta["max_residual"] < 1e-8
    assert small_ripple.meta["basis_size"] > 60


def test_continuity_in_a():
    E = ripple_eigenvalues(5.5, 0.055, 20, cutoff=1.5)
    ref = ripple_eigenvalues(5.5, 0.0, 20, cutoff=1.5)
    assert np.max(np.abs(E - ref) / ref) < 0.02


def test_bit_identical_reruns():
    g = build_geometry(5.5, 0.55, 64, 64)
    s1 = solve_ripple(g, 30, FAST)
    s2 = solve_ripple(g, 30, FAST)
    assert s1.energies.tobytes() == s2.energies.tobytes()
    assert s1.states.tobytes() == s2.states.tobytes()


def test_certificate_recorded():
    cfg = RippleSolverConfig(certify=True, certify_level=40)
    spec = solve_ripple(build_geometry(5.5, 0.55, 64, 64), 40, cfg)
    cert = spec.meta["certificate"]
    assert cert["level"] == 40
    assert cert["history"][-1]["rel_shift"] < 1e-3


def test_cap_rejected():
    with pytest.raises(ValueError):
        solve_ripple(build_geometry(5.5, 0.55, 64, 64), 1301)


def test_nonconvergence_is_reported():
    cfg = RippleSolverConfig(certify=True, certify_level=30, certify_tol=1e-16, max_refinements=1)
    with pytest.raises(SpectralError, match="not converged"):
        solve_ripple(build_geometry(5.5, 0.55, 64, 64), 30, cfg)


# conventions ------------------------------------------------------------------


def test_sign_rule_first_value_positive(rng):
    states = rng.normal(size=(5, 6, 7))
    out = fix_signs(states)
    for s in out:
        flat = s.ravel()
        assert flat[np.argmax(np.abs(flat) > 1e-8 * np.abs(flat).max())] > 0


def test_ties_ordered_by_dominant_basis_index():
    E = np.array([2.0, 1.0, 1.0 + 1e-13, 3.0])
    lead = np.array([0, 7, 3, 1])
    assert _order_with_ties(E, lead).tolist() == [2, 1, 0, 3]


def test_weyl_inversion_round_trip():
    area, perim = 121.0, 44.0
    for n in (10, 500, 1200):
        assert weyl_count(weyl_energy(n, area, perim), area, perim) == pytest.approx(n)


# validation report ---------------------------------------------------------------


def test_zeroed_eigenfunction_is_flagged():
    spec = solve_square(5.5, 20)
    states = np.array(spec.states)
    states[4] = 0.0
    bad = SpectralDecomposition(spec.energies, states, spec.grid, "corrupt")
    rep = verify_spectrum(bad)
    assert 4 in rep.flagged and not rep.ok


def test_leaking_eigenfunction_is_flagged():
    g = build_geometry(5.5, 0.55, 64, 64)
    spec = solve_ripple(g, 10, FAST)
    states = np.array(spec.states)
    states[2][~g.grid.mask] = 1e-3
    rep = verify_spectrum(SpectralDecomposition(spec.energies, states, spec.grid, "leak"))
    assert 2 in rep.flagged
