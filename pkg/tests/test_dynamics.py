import math

import numpy as np
import pytest

from ripple_entropy import dynamics as D
from ripple_entropy.spectral import RippleSolverConfig, SpectralDecomposition, solve_ripple, solve_square

N_SMALL = 80


@pytest.fixture(scope="module")
def spectra(geom055):
    sq = solve_square(5.5, N_SMALL, grid=geom055.grid, origin=(-2.75, 2.75))
    rp = solve_ripple(geom055, N_SMALL, RippleSolverConfig(certify=False))
    return {"integrable": sq, "chaotic": rp}


@pytest.fixture(scope="module")
def low_packet():
    # slow packet so that 80 states hold most of it
    return D.GaussianPacket((0.0, 5.5), 1.0, (1.5, 0.0))


@pytest.fixture(scope="module")
def coeffs(spectra, low_packet):
    return {s: D.expand_initial(low_packet, spectra[s], force=True) for s in D.SOURCES}


def series(c, hybrid, times, basis):
    return D.entropy_series(c, hybrid, times, basis)


def synthetic(S, times, T=1.0):
    return D.EntropyTimeSeries(np.asarray(times, float), np.asarray(S, float), np.ones(len(times)), T)


# expansion ----------------------------------------------------------------------


def test_eigenstate_expands_to_single_coefficient(spectra):
    spec = spectra["chaotic"]
    c = D.expand_initial(spec.states[4], spec)
    assert abs(c.c[4] - 1.0) < 1e-8
    assert np.abs(np.delete(c.c, 4)).max() < 1e-8
    assert not c.flagged


def test_low_capture_refused_unless_forced(spectra):
    packet = D.ripple_packet()
    with pytest.raises(D.CaptureError):
        D.expand_initial(packet, spectra["chaotic"])
    c = D.expand_initial(packet, spectra["chaotic"], force=True)
    assert c.flagged and c.captured < 0.999


def test_captured_weight_bounded(coeffs):
    for c in coeffs.values():
        assert c.captured <= 1 + 1e-9


def test_characteristic_times():
    assert D.characteristic_time(5.5, 5.5) == 1.0
    assert D.characteristic_time(11.0, 6.05) == pytest.approx(11 / 6.05)
    assert D.square_revival_time(5.5) == pytest.approx(2 * 30.25 / math.pi)


# evolution ----------------------------------------------------------------------


def test_mismatched_sizes_rejected(spectra):
    small = solve_square(5.5, 10)
    with pytest.raises(ValueError, match="mismatched"):
        D.make_hybrid({"integrable": small, "chaotic": spectra["chaotic"]}, "chaotic", "integrable")


def test_unknown_source_rejected(spectra):
    with pytest.raises(ValueError):
        D.make_hybrid(spectra, "chaotic", "mixed")


@pytest.mark.parametrize("case", "abcd")
def test_t0_is_truncated_packet(spectra, coeffs, case):
    h = D.make_case(spectra, case)
    c = coeffs[h.eigenstate_source]
    psi = D.evolve_state(c, h, 0.0)
    flat = h.states.states.reshape(h.n_eig, -1)
    ref = (c.c @ flat).reshape(psi.shape)
    assert np.abs(psi - ref).max() < 1e-14


@pytest.mark.parametrize("case", "abcd")
def test_norm_conserved(spectra, coeffs, case):
    h = D.make_case(spectra, case)
    c = coeffs[h.eigenstate_source]
    for t in (0.3, 2.7, 11.0):
        assert h.states.grid.norm2(D.evolve_state(c, h, t)) == pytest.approx(c.captured, abs=1e-10)


def test_square_full_revival_fidelity():
    spec = solve_square(5.5, 300)
    c = D.expand_initial(D.GaussianPacket((0.0, 0.0), 1.0, (2.0, 0.0)), spec, force=True)
    h = D.make_hybrid({"integrable": spec, "chaotic": spec}, "integrable", "integrable")
    t = 2 * math.pi * 5.5**2 / math.pi**2
    a, b = D.evolve_state(c, h, 0.0), D.evolve_state(c, h, t)
    fid = abs(spec.grid.inner(a, b)) ** 2 / c.captured**2
    assert fid > 0.999


@pytest.mark.parametrize("case", "abcd")
def test_energy_conserved(spectra, coeffs, case):
    h = D.make_case(spectra, case)
    c = coeffs[h.eigenstate_source]
    e0 = c.mean_energy(h.energies)
    for t in (1.0, 7.5):
        ct = D.ExpansionCoefficients(c.c * D.phases(h.energies, t)[0], c.source, c.captured)
        assert ct.mean_energy(h.energies) == pytest.approx(e0, rel=1e-12)


# entropy series ------------------------------------------------------------------


def test_shared_initial_entropy(spectra, coeffs, basis055):
    t = [0.0]
    s = {k: series(coeffs[D.CASES[k][0]], D.make_case(spectra, k), t, basis055) for k in "abcd"}
    assert s["a"].entropy[0] == s["b"].entropy[0]
    assert s["c"].entropy[0] == s["d"].entropy[0]


def test_series_bounds_and_determinism(spectra, coeffs, basis055):
    h = D.make_case(spectra, "d")
    t = np.linspace(0, 5, 17)
    s1 = series(coeffs["chaotic"], h, t, basis055)
    s2 = series(coeffs["chaotic"], h, t, basis055)
    assert s1.entropy.tobytes() == s2.entropy.tobytes()
    assert np.all(s1.entropy >= 0) and np.all(s1.entropy <= basis055.max_entropy)


def test_precomputed_overlap_matches(spectra, coeffs, basis055):
    h = D.make_case(spectra, "b")
    W = D.overlap_matrix(h.states, basis055)
    t = np.linspace(0, 3, 7)
    a = D.entropy_series(coeffs["integrable"], h, t, basis055, W)
    b = series(coeffs["integrable"], h, t, basis055)
    np.testing.assert_array_equal(a.entropy, b.entropy)
    with pytest.raises(ValueError, match="shape"):
        D.entropy_series(coeffs["integrable"], h, t, basis055, W[:, :10])


def test_time_reversal(spectra, coeffs, basis055):
    h = D.make_case(spectra, "c")
    c = coeffs["chaotic"]
    rev = D.ExpansionCoefficients(c.c.conj(), c.source, c.captured)
    t = np.array([0.4, 1.9, 6.3])
    fwd = series(c, h, t, basis055).entropy
    bwd = series(rev, h, -t, basis055).entropy
    assert np.abs(fwd - bwd).max() < 1e-8


def test_low_capture_samples_flagged():
    s = D.EntropyTimeSeries(np.arange(3.0), np.ones(3), np.array([1.0, 0.95, 0.995]), 1.0)
    assert s.flags.tolist() == [False, True, False]


def test_series_csv(tmp_path):
    s = D.EntropyTimeSeries(np.arange(3.0), np.ones(3), np.array([1.0, 0.95, 0.995]), 1.0)
    p = tmp_path / "s.csv"
    s.to_csv(p, "h")
    lines = p.read_text().splitlines()
    assert lines[:2] == ["# manifest: h", "t,S_w,captured_norm,flags"]
    assert lines[3].endswith("low_capture")


# sampling -------------------------------------------------------------------------


def test_uniform_sampling():
    t = D.sample_times(1.818, 400, 20)
    assert t.size == 400 and t[0] == 0 and t[-1] == pytest.approx(20 * 1.818)


def test_burst_sampling_resolves_revivals():
    t = D.sample_times(1.0, 400, 20, revival_period=9.63)
    assert np.all(np.diff(t) > 0)
    for m in (1, 2):
        near = np.abs(t - m * 9.63) <= 0.1
        assert near.sum() >= 41
    assert t.max() <= 20.0


# metrics --------------------------------------------------------------------------


def test_constant_series_has_zero_std():
    s = synthetic(np.full(50, 2.5), np.linspace(0, 20, 50))
    assert D.fluctuation_metric(s, (5, 20)) == (2.5, 0.0)


def test_empty_window_rejected():
    s = synthetic(np.ones(5), np.arange(5.0))
    with pytest.raises(ValueError, match="window"):
        D.fluctuation_metric(s, (10, 20))


def test_periodic_series_has_full_revival():
    P = 4.0
    t = np.linspace(0, 20, 2001)
    S = 3.0 + (1 - np.cos(2 * np.pi * t / P))
    r = D.revival_metric(synthetic(S, t), P)
    assert r.depth == pytest.approx(1.0, abs=1e-9)
    assert r.equilibrated
    assert D.estimate_recurrence(synthetic(S, t)) == pytest.approx(P, abs=0.02)


def test_flat_series_has_no_revival():
    t = np.linspace(0, 20, 400)
    S = 5.0 + 0.01 * np.sin(37 * t)
    S[0] = 3.0
    r = D.revival_metric(synthetic(S, t), 4.0)
    assert r.depth < 0.05


def test_unequilibrated_series_is_distinguished():
    t = np.linspace(0, 20, 100)
    r = D.revival_metric(synthetic(np.full(100, 3.0), t), 4.0)
    assert not r.equilibrated and math.isnan(r.depth)


def test_short_series_rejected():
    t = np.linspace(0, 5, 100)
    with pytest.raises(ValueError, match="two periods"):
        D.revival_metric(synthetic(np.ones(100), t), 4.0)


# production caches (slow) -----------------------------------------------------------


@pytest.fixture(scope="module")
def ripple1300(store, cfg):
    return store.ripple(cfg).value


@pytest.mark.slow
def test_default_ripple_packet_expansion(ripple1300):
    packet = D.ripple_packet()
    c = D.expand_initial(packet, ripple1300)
    assert c.captured >= 0.999
    assert c.mean_energy(ripple1300.energies) == pytest.approx(packet.mean_energy, rel=0.03)
    assert packet.mean_energy == pytest.approx(37.1, abs=0.01)


@pytest.mark.slow
def test_truncation_changes_plateau_below_one_percent(ripple1300, basis055):
    c = D.expand_initial(D.ripple_packet(), ripple1300)
    h = D.make_hybrid({"chaotic": ripple1300, "integrable": ripple1300}, "chaotic", "chaotic")
    W = D.overlap_matrix(ripple1300, basis055)
    t = np.linspace(5 * 11 / 6.05, 20 * 11 / 6.05, 60)
    full = D.entropy_series(c, h, t, basis055, W).entropy.mean()
    sub = SpectralDecomposition(ripple1300.energies[:1200], ripple1300.states[:1200], ripple1300.grid, "n1200")
    c12 = D.ExpansionCoefficients(c.c[:1200], c.source, float(np.sum(np.abs(c.c[:1200]) ** 2)))
    h12 = D.HybridDynamicsSpec("chaotic", "chaotic", sub, ripple1300.energies[:1200])
    part = D.entropy_series(c12, h12, t, basis055, W[:1200]).entropy.mean()
    assert abs(part - full) / full < 0.01
