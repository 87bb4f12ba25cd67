"""Random-wave states, per-level entropy spectra, micro-canonical smoothing,
fluctuation curves and scar statistics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .phasespace import WannierBasis, entropies, project_many
from .spectral import Grid, SpectralDecomposition

MIN_COMPONENTS = 16
DEFAULT_WINDOW = 30


@dataclass(frozen=True)
class BerryEnsembleSpec:
    """Superposition of ``n_components`` plane waves of common wave number ``k``
    along uniformly spaced directions, with N(0, 1) amplitudes and uniform phases."""

    k: float
    n_components: int = 128
    seed: int = 0
    level: int = 0
    mode: str = "real"  # "real" or "complex"
    allow_small: bool = False

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"wave number must be positive, got {self.k}")
        if self.mode not in ("real", "complex"):
            raise ValueError(f"mode must be 'real' or 'complex', got {self.mode!r}")
        if self.n_components < 1:
            raise ValueError("need at least one plane-wave component")
        if self.n_components < MIN_COMPONENTS and not self.allow_small:
            raise ValueError(f"n_components={self.n_components} < {MIN_COMPONENTS}; pass allow_small=True")

    def at_level(self, level: int, k: float) -> "BerryEnsembleSpec":
        return replace(self, level=level, k=k)


@dataclass(frozen=True, eq=False)
class BerrySample:
    field: np.ndarray
    attempt: int
    amplitudes: np.ndarray
    phases: np.ndarray


def berry_sample(spec: BerryEnsembleSpec, grid: Grid, max_attempts: int = 8) -> BerrySample:
    """Masked, normalized random-wave state with its random draws.

    The draws come from ``default_rng([seed, level, attempt])``; a degenerate
    normalization bumps ``attempt``.
    """
    M = spec.n_components
    if M < MIN_COMPONENTS:
        warnings.warn(f"Berry state with only {M} components is far from isotropic", stacklevel=2)
    theta = 2.0 * np.pi * np.arange(M) / M
    ex = np.exp(1j * spec.k * np.outer(grid.x, np.cos(theta)))
    ey = np.exp(1j * spec.k * np.outer(grid.y, np.sin(theta)))
    for attempt in range(max_attempts):
        rng = np.random.default_rng([spec.seed, spec.level, attempt])
        amp = rng.normal(size=M)
        ph = rng.uniform(0.0, 2.0 * np.pi, size=M)
        psi = (ex * (amp * np.exp(1j * ph))) @ ey.T
        if spec.mode == "real":
            psi = psi.real
        psi = psi * grid.mask
        norm = grid.norm2(psi)
        if norm > 1e-12 * grid.mask.sum() * grid.cell_area:
            return BerrySample(psi / math.sqrt(norm), attempt, amp, ph)
    raise RuntimeError(f"degenerate Berry state after {max_attempts} attempts")


def sample_berry_state(spec: BerryEnsembleSpec, grid: Grid) -> np.ndarray:
    return berry_sample(spec, grid).field


# ---------------------------------------------------------------------------
# entropy spectra


def window_bounds(n: int, i: int, window: int) -> tuple[int, int]:
    """Centered neighborhood [i - window//2, i - window//2 + window) clipped to [0, n)."""
    lo = i - window // 2
    return max(lo, 0), min(lo + window, n)


def microcanonical_average(values: np.ndarray, window: int = DEFAULT_WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Moving average over ``window`` neighboring levels.

    Returns (smoothed, edge) where ``edge`` marks levels whose window was
    truncated by the ends of the range.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if window < 1 or window > n:
        raise ValueError(f"window {window} must lie in [1, {n}]")
    csum = np.concatenate([[0.0], np.cumsum(values)])
    i = np.arange(n)
    lo = np.maximum(i - window // 2, 0)
    hi = np.minimum(i - window // 2 + window, n)
    smoothed = (csum[hi] - csum[lo]) / (hi - lo)
    edge = (hi - lo) < window
    if window == 1:
        smoothed = values.copy()
    return smoothed, edge


@dataclass(frozen=True, eq=False)
class EntropySpectrum:
    levels: np.ndarray  # 1-based level numbers, ascending
    energies: np.ndarray
    s_eig: np.ndarray
    s_berry: np.ndarray
    captured: np.ndarray
    captured_berry: np.ndarray
    window: int = DEFAULT_WINDOW
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly ascending")

    @property
    def smoothed(self) -> np.ndarray:
        return microcanonical_average(self.s_eig, self.window)[0]

    @property
    def edge(self) -> np.ndarray:
        return microcanonical_average(self.s_eig, self.window)[1]

    def select(self, lo: int, hi: int) -> np.ndarray:
        """Boolean mask of levels in the closed range [lo, hi]."""
        return (self.levels >= lo) & (self.levels <= hi)

    def at(self, level: int) -> int:
        i = np.flatnonzero(self.levels == level)
        if i.size == 0:
            raise KeyError(f"level {level} not in spectrum")
        return int(i[0])

    def to_csv(self, path, manifest_hash: str = "", scar_threshold: float | None = None) -> None:
        sm = self.smoothed
        flags = scar_flags(self, scar_threshold) if scar_threshold is not None else np.zeros(self.levels.size, bool)
        with open(path, "w") as fh:
            fh.write(f"# manifest: {manifest_hash}\n")
            fh.write("n,E_n,S_eig,S_berry,S_smoothed,scar_flag\n")
            for row in zip(self.levels, self.energies, self.s_eig, self.s_berry, sm, flags):
                fh.write(f"{row[0]},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g},{row[4]:.17g},{int(row[5])}\n")


def berry_entropies(energies: np.ndarray, levels: np.ndarray, grid: Grid, basis: WannierBasis,
                    template: BerryEnsembleSpec) -> tuple[np.ndarray, np.ndarray]:
    """Entropy and captured norm of one Berry state per level at k = sqrt(E_n)."""
    S = np.empty(levels.size)
    cap = np.empty(levels.size)
    for i, (n, E) in enumerate(zip(levels, energies)):
        psi = sample_berry_state(template.at_level(int(n), math.sqrt(E)), grid)
        p = project_many(psi[None], grid, basis)[0]
        S[i] = entropies(p[None])[0]
        cap[i] = p.sum()
    return S, cap


def entropy_spectrum(spec: SpectralDecomposition, basis: WannierBasis, levels: Sequence[int] | range | None = None,
                     berry: BerryEnsembleSpec | None = None, window: int = DEFAULT_WINDOW,
                     probabilities: np.ndarray | None = None) -> EntropySpectrum:
    """Eigenstate and matched Berry entropies for 1-based ``levels`` (default: all).

    ``probabilities`` may carry precomputed cell probabilities for ``levels``.
    """
    levels = np.arange(1, spec.n_eig + 1) if levels is None else np.asarray(list(levels), dtype=int)
    if levels.min() < 1 or levels.max() > spec.n_eig:
        raise ValueError(f"levels must lie in [1, {spec.n_eig}]")
    berry = berry or BerryEnsembleSpec(k=1.0)
    P = probabilities if probabilities is not None else project_many(spec.states[levels - 1], spec.grid, basis)
    E = spec.energies[levels - 1]
    sb, cb = berry_entropies(E, levels, spec.grid, basis, berry)
    meta = {"berry_components": berry.n_components, "berry_seed": berry.seed, "berry_mode": berry.mode,
            "spectrum": spec.label}
    return EntropySpectrum(levels, E, entropies(P), sb, P.sum(axis=1), cb, window, spec.label, meta)


# ---------------------------------------------------------------------------
# fluctuations and scars


def fluctuation(spectrum: EntropySpectrum, levels: tuple[int, int] = (100, 1200), estimator: str = "mad") -> float:
    """Mean absolute (or RMS) deviation of S_eig from its smoothed curve."""
    sel = spectrum.select(*levels)
    if not sel.any():
        raise ValueError(f"no levels in {levels}")
    d = spectrum.s_eig[sel] - spectrum.smoothed[sel]
    if estimator == "mad":
        return float(np.mean(np.abs(d)))
    if estimator == "rms":
        return float(np.sqrt(np.mean(d * d)))
    raise ValueError(f"unknown estimator {estimator!r}")


def smoothed_berry_gap(spectrum: EntropySpectrum, levels: tuple[int, int] = (100, 1200)) -> float:
    """Mean |smoothed eigenstate entropy - Berry entropy| over ``levels``."""
    sel = spectrum.select(*levels)
    return float(np.mean(np.abs(spectrum.smoothed[sel] - spectrum.s_berry[sel])))


@dataclass(frozen=True)
class FluctuationCurve:
    ratios: tuple[float, ...]
    values: tuple[float, ...]  # NaN where a family member is missing
    estimator: str = "mad"

    @property
    def missing(self) -> tuple[float, ...]:
        return tuple(r for r, v in zip(self.ratios, self.values) if math.isnan(v))

    def violations(self) -> int:
        """Adjacent pairs (in ascending ratio) where the fluctuation increases."""
        v = [x for x in self.values if not math.isnan(x)]
        return sum(1 for a, b in zip(v, v[1:]) if b > a)

    def to_csv(self, path, manifest_hash: str = "") -> None:
        with open(path, "w") as fh:
            fh.write(f"# manifest: {manifest_hash}\n")
            fh.write("a_over_b,mean_abs_dev\n")
            for r, v in zip(self.ratios, self.values):
                fh.write(f"{r:.17g},{'' if math.isnan(v) else format(v, '.17g')}\n")


def fluctuation_vs_ratio(family: Mapping[float, EntropySpectrum | None], levels: tuple[int, int] = (100, 1200),
                         estimator: str = "mad") -> FluctuationCurve:
    """Fluctuation per a/b in ascending ratio order; missing members give NaN gaps."""
    ratios = tuple(sorted(family))
    values = tuple(math.nan if family[r] is None else fluctuation(family[r], levels, estimator) for r in ratios)
    return FluctuationCurve(ratios, values, estimator)


# calibrated on the a/b = 0.1 spectrum: flags 9.8% of levels 100-1200
DEFAULT_SCAR_THRESHOLD = 0.5


def scar_flags(spectrum: EntropySpectrum, threshold: float = DEFAULT_SCAR_THRESHOLD) -> np.ndarray:
    """Levels whose entropy falls more than ``threshold`` below the smoothed curve."""
    return spectrum.s_eig < spectrum.smoothed - threshold


def scar_fraction(spectrum: EntropySpectrum, threshold: float = DEFAULT_SCAR_THRESHOLD,
                  levels: tuple[int, int] | None = None) -> float:
    flags = scar_flags(spectrum, threshold)
    if levels is not None:
        flags = flags[spectrum.select(*levels)]
    return float(flags.mean()) if flags.size else 0.0


def calibrate_scar_threshold(spectrum: EntropySpectrum, target: float = 0.10,
                             levels: tuple[int, int] = (100, 1200)) -> float:
    """Entropy gap below the smoothed curve that flags ``target`` of the levels."""
    sel = spectrum.select(*levels)
    gap = (spectrum.smoothed - spectrum.s_eig)[sel]
    return float(np.quantile(gap, 1.0 - target))


# ---------------------------------------------------------------------------
# figure helpers


def momentum_density(state: np.ndarray, grid: Grid, pad: int = 2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|psi(k)|^2 on the zero-padded FFT grid, centered; returns (kx, ky, density)."""
    nx, ny = grid.shape
    F = np.fft.fftshift(np.fft.fft2(state, s=(pad * nx, pad * ny)))
    kx = np.fft.fftshift(np.fft.fftfreq(pad * nx, grid.dx)) * 2.0 * np.pi
    ky = np.fft.fftshift(np.fft.fftfreq(pad * ny, grid.dy)) * 2.0 * np.pi
    dens = np.abs(F) ** 2
    return kx, ky, dens / dens.sum()


def phase_space_slice(p: np.ndarray, basis: WannierBasis, j_y: int, j_ky: int) -> np.ndarray:
    """p over (j_x, j_kx) at fixed (j_y, j_ky)."""
    py = basis.by.params
    P = np.asarray(p).reshape(basis.shape)
    return P[:, j_y - py.j_pos[0], :, j_ky - py.j_mom[0]]


def ring_fraction(p: np.ndarray, basis: WannierBasis, k: float, width: float = 1.0) -> float:
    """Share of captured probability whose momentum cell lies within ``width``
    cells of the ring |j_k| k_0 = k."""
    P = np.asarray(p).reshape(basis.shape)
    marg = P.sum(axis=(0, 1))
    k0x, k0y = basis.bx.params.k0, basis.by.params.k0
    jx = basis.bx.params.momenta[:, None] * k0x
    jy = basis.by.params.momenta[None, :] * k0y
    r = np.hypot(jx, jy)
    near = np.abs(r - k) <= width * k0x
    return float(marg[near].sum() / marg.sum())
