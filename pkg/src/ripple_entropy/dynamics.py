"""Wave-packet evolution under real and energy-exchanged spectral dynamics.

A run pairs the n-th eigenstate of one billiard with the n-th eigenvalue
(ascending) of another.  Time is in units 2mL^2/hbar, so phases are
exp(-i E_n t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .phasespace import WannierBasis, entropies
from .spectral import Grid, SpectralDecomposition

SOURCES = ("integrable", "chaotic")
CASES = {
    "a": ("integrable", "integrable"),
    "b": ("integrable", "chaotic"),
    "c": ("chaotic", "integrable"),
    "d": ("chaotic", "chaotic"),
}


class CaptureError(RuntimeError):
    """The eigenbasis does not hold enough of the initial state."""


@dataclass(frozen=True)
class GaussianPacket:
    center: tuple[float, float]
    sigma: float = 1.0
    k: tuple[float, float] = (6.05, 0.0)

    def sample(self, grid: Grid) -> np.ndarray:
        """exp(-|r - r_c|^2 / 4 sigma^2 + i k.r) masked to ``grid`` and normalized."""
        X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
        psi = np.exp(-((X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2) / (4.0 * self.sigma**2)
                     + 1j * (self.k[0] * X + self.k[1] * Y))
        psi *= grid.mask
        norm = grid.norm2(psi)
        if norm <= 0:
            raise ValueError("packet has no support inside the billiard")
        return psi / math.sqrt(norm)

    @property
    def mean_energy(self) -> float:
        """Free-space <k^2> = |k|^2 + 1/(2 sigma^2)."""
        return self.k[0] ** 2 + self.k[1] ** 2 + 1.0 / (2.0 * self.sigma**2)


def ripple_packet(b: float = 5.5, sigma: float = 1.0, kx: float = 6.05) -> GaussianPacket:
    return GaussianPacket((0.0, b), sigma, (kx, 0.0))


def square_packet(b: float = 5.5, sigma: float = 1.0, kx: float = 5.5) -> GaussianPacket:
    return GaussianPacket((0.0, b), sigma, (kx, 0.0))


def characteristic_time(width: float, kx: float) -> float:
    """Round trip of the packet center across ``width`` at group speed 2 kx."""
    return 2.0 * width / (2.0 * kx)


def square_revival_time(side: float) -> float:
    """All square phases E t are multiples of 2 pi at t = 2 side^2 / pi."""
    return 2.0 * side**2 / math.pi


@dataclass(frozen=True, eq=False)
class ExpansionCoefficients:
    c: np.ndarray
    source: str
    captured: float
    flagged: bool = False

    @property
    def n_eig(self) -> int:
        return self.c.size

    def mean_energy(self, energies: np.ndarray) -> float:
        w = np.abs(self.c) ** 2
        return float(np.dot(w, energies[: w.size]))


def expand_initial(packet: GaussianPacket | np.ndarray, spec: SpectralDecomposition, *,
                   min_capture: float = 0.999, force: bool = False) -> ExpansionCoefficients:
    """c_n = <phi_n|Psi(0)> by grid quadrature.

    Raises ``CaptureError`` when sum |c_n|^2 < ``min_capture`` unless ``force``.
    """
    psi = packet.sample(spec.grid) if isinstance(packet, GaussianPacket) else np.asarray(packet)
    psi = psi * spec.grid.mask
    norm = spec.grid.norm2(psi)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"initial state norm {norm:.8f} is not 1")
    flat = spec.states.reshape(spec.n_eig, -1)
    c = (flat @ psi.ravel()) * spec.grid.cell_area
    captured = float(np.sum(np.abs(c) ** 2))
    flagged = captured < min_capture
    if flagged and not force:
        raise CaptureError(f"{spec.label}: expansion captures {captured:.6f} < {min_capture}")
    return ExpansionCoefficients(c, spec.label, captured, flagged)


@dataclass(frozen=True, eq=False)
class HybridDynamicsSpec:
    """n-th eigenstate of ``states`` evolves with the n-th eigenvalue of ``energies``."""

    eigenstate_source: str
    energy_source: str
    states: SpectralDecomposition
    energies: np.ndarray
    pairing: str = "ascending-index"

    @property
    def case(self) -> str:
        for k, v in CASES.items():
            if v == (self.eigenstate_source, self.energy_source):
                return k
        return "?"

    @property
    def n_eig(self) -> int:
        return self.states.n_eig


def make_hybrid(spectra: dict[str, SpectralDecomposition], eigenstate_source: str, energy_source: str
                ) -> HybridDynamicsSpec:
    for s in (eigenstate_source, energy_source):
        if s not in SOURCES:
            raise ValueError(f"unknown source {s!r}; expected one of {SOURCES}")
    st, en = spectra[eigenstate_source], spectra[energy_source]
    if st.n_eig != en.n_eig:
        raise ValueError(f"mismatched n_eig: {st.n_eig} eigenstates vs {en.n_eig} eigenvalues")
    return HybridDynamicsSpec(eigenstate_source, energy_source, st, np.asarray(en.energies, dtype=float))


def make_case(spectra: dict[str, SpectralDecomposition], case: str) -> HybridDynamicsSpec:
    return make_hybrid(spectra, *CASES[case])


def _check(coeffs: ExpansionCoefficients, hybrid: HybridDynamicsSpec):
    if coeffs.n_eig != hybrid.n_eig or hybrid.energies.size != hybrid.n_eig:
        raise ValueError(f"mismatched n_eig: {coeffs.n_eig} coefficients, {hybrid.n_eig} eigenstates, "
                         f"{hybrid.energies.size} eigenvalues")


def phases(energies: np.ndarray, times) -> np.ndarray:
    """exp(-i E_n t) as a (n_t, n_eig) array."""
    return np.exp(-1j * np.outer(np.atleast_1d(np.asarray(times, dtype=float)), energies))


def evolve_state(coeffs: ExpansionCoefficients, hybrid: HybridDynamicsSpec, t: float) -> np.ndarray:
    """sum_n c_n exp(-i E_n t) phi_n on the eigenstate grid."""
    _check(coeffs, hybrid)
    a = coeffs.c * phases(hybrid.energies, t)[0]
    flat = hybrid.states.states.reshape(hybrid.n_eig, -1)
    return (a @ flat).reshape(hybrid.states.grid.shape)


def overlap_matrix(spec: SpectralDecomposition, basis: WannierBasis, chunk: int = 64) -> np.ndarray:
    """W[n, j] = <w_j|phi_n> for every eigenstate, (n_eig, N) complex."""
    out = np.empty((spec.n_eig, basis.size), dtype=complex)
    for s in range(0, spec.n_eig, chunk):
        out[s:s + chunk] = basis.amplitudes(spec.states[s:s + chunk], spec.grid)
    return out


@dataclass(frozen=True, eq=False)
class EntropyTimeSeries:
    times: np.ndarray
    entropy: np.ndarray
    captured: np.ndarray
    T: float
    case: str = ""
    max_entropy: float = math.inf
    capture_floor: float = 0.99
    meta: dict = field(default_factory=dict)

    @property
    def flags(self) -> np.ndarray:
        return self.captured < self.capture_floor

    def window(self, t0: float, t1: float) -> np.ndarray:
        return (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)

    def to_csv(self, path, manifest_hash: str = "") -> None:
        with open(path, "w") as fh:
            fh.write(f"# manifest: {manifest_hash}\n")
            fh.write("t,S_w,captured_norm,flags\n")
            for t, s, c, f in zip(self.times, self.entropy, self.captured, self.flags):
                fh.write(f"{t:.17g},{s:.17g},{c:.17g},{'low_capture' if f else ''}\n")


def sample_times(T: float, n: int = 400, span: float = 20.0, revival_period: float | None = None,
                 burst: int = 41, burst_halfwidth: float = 0.1) -> np.ndarray:
    """``n`` uniform samples over [0, span T]; optionally a dense burst of
    ``burst`` samples within +-``burst_halfwidth`` T of every multiple of
    ``revival_period`` so that narrow recurrences are resolved."""
    t = np.linspace(0.0, span * T, n)
    if revival_period is not None:
        extra = []
        m = 1
        while m * revival_period <= span * T:
            c = m * revival_period
            extra.append(np.linspace(c - burst_halfwidth * T, c + burst_halfwidth * T, burst))
            m += 1
        if extra:
            t = np.concatenate([t] + extra)
            t = np.unique(t[(t >= 0) & (t <= span * T)])
    return t


def entropy_series(coeffs: ExpansionCoefficients, hybrid: HybridDynamicsSpec, times, basis: WannierBasis,
                   overlap: np.ndarray | None = None, T: float = 1.0, chunk: int = 32) -> EntropyTimeSeries:
    """S_w(t) from p_j(t) = |sum_n W[n, j] c_n exp(-i E_n t)|^2.

    ``overlap`` is ``overlap_matrix(hybrid.states, basis)``; it is computed
    here when not supplied.  Grids are never re-projected per time step.
    """
    _check(coeffs, hybrid)
    W = overlap_matrix(hybrid.states, basis) if overlap is None else overlap
    if W.shape != (hybrid.n_eig, basis.size):
        raise ValueError(f"overlap matrix has shape {W.shape}, expected {(hybrid.n_eig, basis.size)}")
    times = np.asarray(times, dtype=float)
    S = np.empty(times.size)
    cap = np.empty(times.size)
    for s in range(0, times.size, chunk):
        amp = (coeffs.c[None, :] * phases(hybrid.energies, times[s:s + chunk])) @ W
        p = np.abs(amp) ** 2
        S[s:s + chunk] = entropies(p)
        cap[s:s + chunk] = p.sum(axis=1)
    return EntropyTimeSeries(times, S, cap, T, hybrid.case, basis.max_entropy,
                             meta={"eigenstates": hybrid.states.label, "energy_source": hybrid.energy_source,
                                   "eigenstate_source": hybrid.eigenstate_source})


# ---------------------------------------------------------------------------
# metrics


def fluctuation_metric(series: EntropyTimeSeries, window: tuple[float, float]) -> tuple[float, float]:
    """(mean, std) of S_w over the closed time window."""
    sel = series.window(*window)
    if not sel.any():
        raise ValueError(f"no samples in window {window}")
    vals = series.entropy[sel]
    return float(vals.mean()), float(vals.std())


def plateau_window(series: EntropyTimeSeries, start: float = 5.0, stop: float = 20.0) -> tuple[float, float]:
    return (start * series.T, stop * series.T)


@dataclass(frozen=True)
class RevivalResult:
    depth: float
    time: float
    multiple: int
    plateau: float
    equilibrated: bool = True


def revival_metric(series: EntropyTimeSeries, expected_period: float, window: tuple[float, float] | None = None,
                   tolerance: float = 0.1, min_rise: float = 1e-3) -> RevivalResult:
    """Deepest return towards S_w(0) near multiples of ``expected_period``.

    depth = (plateau - min S_w in [(1-tol) mP, (1+tol) mP]) / (plateau - S_w(0)),
    maximized over m >= 1 and clamped to [0, 1].  When the plateau does not rise
    above S_w(0) by ``min_rise`` the result has ``equilibrated=False`` and a NaN depth.
    """
    t_end = series.times[-1]
    if expected_period <= 0 or t_end < 2.0 * expected_period * (1.0 - tolerance):
        raise ValueError(f"series of length {t_end:g} does not span two periods of {expected_period:g}")
    plateau, _ = fluctuation_metric(series, window or plateau_window(series))
    s0 = float(series.entropy[0])
    rise = plateau - s0
    if rise < min_rise:
        return RevivalResult(math.nan, math.nan, 0, plateau, equilibrated=False)
    best = RevivalResult(0.0, math.nan, 0, plateau)
    m = 1
    while (1.0 - tolerance) * m * expected_period <= t_end:
        sel = series.window((1.0 - tolerance) * m * expected_period, (1.0 + tolerance) * m * expected_period)
        if sel.any():
            i = np.flatnonzero(sel)[np.argmin(series.entropy[sel])]
            depth = min(max((plateau - series.entropy[i]) / rise, 0.0), 1.0)
            if depth > best.depth:
                best = RevivalResult(float(depth), float(series.times[i]), m, plateau)
        m += 1
    return best


def estimate_recurrence(series: EntropyTimeSeries, skip: float = 2.0, level: float = 0.5) -> float:
    """First recurrence time: after ``skip`` T, the earliest excursion where S_w
    falls below S_w(0) + ``level`` (plateau - S_w(0)); returns its minimum's time."""
    plateau, _ = fluctuation_metric(series, plateau_window(series))
    s0 = float(series.entropy[0])
    thr = s0 + level * (plateau - s0)
    after = series.times >= skip * series.T
    low = after & (series.entropy < thr)
    if not low.any():
        return math.nan
    i = int(np.flatnonzero(low)[0])
    j = i
    while j + 1 < series.times.size and series.entropy[j + 1] < thr:
        j += 1
    k = i + int(np.argmin(series.entropy[i:j + 1]))
    return float(series.times[k])
