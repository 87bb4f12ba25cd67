"""Analytic references: oscillator eigenstates in phase space, closed-form
Gaussian overlaps, and the square-billiard entropy series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (EntropyTimeSeries, GaussianPacket, characteristic_time, entropy_series, expand_initial,
                       make_hybrid, overlap_matrix, square_revival_time)
from .phasespace import Wannier1D, WannierLatticeParams, build_wannier_1d, entropy
from .spectral import Grid, solve_square

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# harmonic oscillator


@dataclass(frozen=True)
class HarmonicOscillatorSpec:
    """H = -d^2/dx^2 + omega^2 x^2 with E_n = omega (2n + 1).

    ``omega = k0 / x0`` makes the classical orbit k^2 + omega^2 x^2 = E a circle
    of radius sqrt(E) / k0 in cell units (x / x0, k / k0).
    """

    n: int = 100
    x0: float = 1.0
    k0: float = TWO_PI
    j_range: tuple[int, int] = (-9, 9)
    dx: float = 1.0 / 32.0
    max_level: int = 200

    def __post_init__(self):
        if not 0 <= self.n <= self.max_level:
            raise ValueError(f"level {self.n} outside [0, {self.max_level}]")

    @property
    def omega(self) -> float:
        return self.k0 / self.x0

    @property
    def energy(self) -> float:
        return self.omega * (2 * self.n + 1)

    @property
    def radius_cells(self) -> float:
        return math.sqrt(self.energy) / self.k0

    @property
    def turning_point(self) -> float:
        return math.sqrt(self.energy) / self.omega

    def lattice(self, zeta: float = 1.0 / TWO_PI) -> WannierLatticeParams:
        return WannierLatticeParams(self.x0, self.k0, zeta, self.j_range, self.j_range, 0.0)

    def nodes(self, padding: float = 4.0) -> np.ndarray:
        half = max(self.turning_point, max(abs(j) for j in self.j_range) * self.x0) + padding
        m = int(math.ceil(half / self.dx))
        return np.arange(-m, m + 1) * self.dx

    def as_dict(self) -> dict:
        return {"n": self.n, "x0": self.x0, "k0": self.k0, "omega": self.omega, "energy": self.energy,
                "radius_cells": self.radius_cells, "j_range": list(self.j_range), "dx": self.dx}


def hermite_functions(n: int, xi: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions h_0..h_n at ``xi`` by the stable three-term recurrence."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty((n + 1, xi.size))
    out[0] = math.pi ** -0.25 * np.exp(-xi * xi / 2.0)
    if n >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for m in range(1, n):
        out[m + 1] = math.sqrt(2.0 / (m + 1)) * xi * out[m] - math.sqrt(m / (m + 1)) * out[m - 1]
    return out


def ho_eigenstate(spec: HarmonicOscillatorSpec, nodes: np.ndarray | None = None) -> np.ndarray:
    """n-th oscillator eigenfunction sampled on ``nodes``, normalized by the node sum.

    Rejects grids whose Nyquist wave number pi/dx does not exceed 1.5 sqrt(E_n)
    or that do not reach two decay lengths past the turning point.
    """
    x = spec.nodes() if nodes is None else np.asarray(nodes, dtype=float)
    h = float(x[1] - x[0])
    k_local = math.sqrt(spec.energy)
    if math.pi / h < 1.5 * k_local:
        raise ValueError(f"grid under-resolved: Nyquist {math.pi / h:.2f} < 1.5 x max local wave number {k_local:.2f}")
    reach = spec.turning_point + 2.0 / math.sqrt(spec.omega)
    if x[0] > -reach or x[-1] < reach:
        raise ValueError(f"grid [{x[0]:.2f}, {x[-1]:.2f}] does not cover +-{reach:.2f}")
    xi = math.sqrt(spec.omega) * x
    psi = spec.omega**0.25 * hermite_functions(spec.n, xi)[spec.n]
    return psi / math.sqrt(np.sum(psi * psi) * h)


def phase_space_1d(psi: np.ndarray, basis: Wannier1D) -> np.ndarray:
    """p[j_pos, j_mom] of a 1D state sampled on the basis nodes."""
    amp = basis.functions.conj().T @ psi * basis.h
    p = np.abs(amp) ** 2
    px = basis.params
    return p.reshape(px.positions.size, px.momenta.size)


@dataclass(frozen=True, eq=False)
class OscillatorDemo:
    spec: HarmonicOscillatorSpec
    basis: Wannier1D
    psi: np.ndarray
    p: np.ndarray  # (j_pos, j_mom)

    @property
    def captured(self) -> float:
        return float(self.p.sum())

    @property
    def entropy(self) -> float:
        return entropy(self.p)

    def ring_distance(self) -> np.ndarray:
        px = self.basis.params
        jx, jk = np.meshgrid(px.positions, px.momenta, indexing="ij")
        return np.abs(np.hypot(jx, jk) - self.spec.radius_cells)

    def ring_fraction(self, width: float = 2.0) -> float:
        return float(self.p[self.ring_distance() <= width].sum() / self.p.sum())

    def parity_defect(self) -> float:
        return float(np.abs(self.p - self.p[::-1, ::-1]).max())


def oscillator_demo(spec: HarmonicOscillatorSpec = HarmonicOscillatorSpec()) -> OscillatorDemo:
    params = spec.lattice()
    nodes = spec.nodes()
    basis = build_wannier_1d(params, nodes)
    psi = ho_eigenstate(spec, nodes)
    return OscillatorDemo(spec, basis, psi, phase_space_1d(psi, basis))


# ---------------------------------------------------------------------------
# Gaussian overlaps


@dataclass(frozen=True)
class Gaussian1D:
    """exp(-(x - center)^2 / 4 sigma^2 + i k x)."""

    center: float
    sigma: float
    k: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.exp(-((x - self.center) ** 2) / (4.0 * self.sigma**2) + 1j * self.k * x)

    @property
    def norm2(self) -> float:
        return math.sqrt(2.0 * math.pi) * self.sigma


def _overlap_1d(g1: Gaussian1D, g2: Gaussian1D) -> complex:
    """Closed form of int conj(g1) g2 dx."""
    a1, a2 = 1.0 / (4.0 * g1.sigma**2), 1.0 / (4.0 * g2.sigma**2)
    alpha = a1 + a2
    beta = 2.0 * (a1 * g1.center + a2 * g2.center) + 1j * (g2.k - g1.k)
    gamma = a1 * g1.center**2 + a2 * g2.center**2
    return complex(np.sqrt(np.pi / alpha) * np.exp(beta * beta / (4.0 * alpha) - gamma))


def gaussian_overlap_reference(g1, g2, normalized: bool = True) -> complex:
    """<g1|g2> for two ``Gaussian1D`` or two 2D ``GaussianPacket`` (unmasked, free space)."""
    if isinstance(g1, GaussianPacket) and isinstance(g2, GaussianPacket):
        pairs = [(Gaussian1D(g1.center[i], g1.sigma, g1.k[i]), Gaussian1D(g2.center[i], g2.sigma, g2.k[i]))
                 for i in range(2)]
    elif isinstance(g1, Gaussian1D) and isinstance(g2, Gaussian1D):
        pairs = [(g1, g2)]
    else:
        raise TypeError("both arguments must be Gaussian1D or both GaussianPacket")
    out = 1.0 + 0j
    for a, b in pairs:
        v = _overlap_1d(a, b)
        if normalized:
            v /= math.sqrt(a.norm2 * b.norm2)
        out *= v
    return out


# ---------------------------------------------------------------------------
# square billiard reference dynamics


def square_reference_series(packet: GaussianPacket, side: float, basis, times, grid: Grid | None = None,
                            origin: tuple[float, float] | None = None, n_eig: int = 1300,
                            min_capture: float = 0.999, force: bool = True) -> EntropyTimeSeries:
    """Integrable/integrable entropy series from the analytic square eigensystem.

    ``grid`` defaults to the basis node grid so the two are commensurate.
    """
    if grid is None:
        gx, gy = basis.bx.nodes, basis.by.nodes
        grid = Grid(gx, gy, np.ones((gx.size, gy.size), bool))
    if origin is None:
        origin = (packet.center[0] - side / 2.0, packet.center[1] - side / 2.0)
    spec = solve_square(side, n_eig, grid=grid, origin=origin)
    coeffs = expand_initial(packet, spec, min_capture=min_capture, force=force)
    hybrid = make_hybrid({"integrable": spec}, "integrable", "integrable")
    T = characteristic_time(side, packet.k[0])
    series = entropy_series(coeffs, hybrid, times, basis, overlap_matrix(spec, basis), T=T)
    series.meta["revival_time"] = square_revival_time(side)
    return series
