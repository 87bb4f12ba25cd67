"""Planck-cell Wannier basis and the pure-state phase-space entropy.

The 1D factor basis starts from the Gaussian lattice

    g_{j, l}(x) = exp(-(x - c_j)^2 / 4 zeta^2 + i l k0 x),   c_j = origin + j x0,

and applies symmetric (overlap^-1/2) orthogonalization on a uniform quadrature
grid.  The 2D basis is the tensor product of an x factor and a y factor and is
never materialized; projections contract the factors one axis at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Grid

TWO_PI = 2.0 * math.pi


class BasisError(ValueError):
    """Raised when a Wannier basis cannot be built on the requested grid."""


@dataclass(frozen=True)
class WannierLatticeParams:
    x0: float = 1.0
    k0: float = TWO_PI
    zeta: float = 1.0 / TWO_PI
    j_pos: tuple[int, int] = (-6, 6)
    j_mom: tuple[int, int] = (-4, 4)
    origin: float = 0.0

    def __post_init__(self):
        if abs(self.x0 * self.k0 - TWO_PI) > 1e-12 * TWO_PI:
            raise ValueError(f"x0*k0 = {self.x0 * self.k0!r} must equal 2 pi for completeness")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.j_pos[0] > self.j_pos[1] or self.j_mom[0] > self.j_mom[1]:
            raise ValueError("empty index range")

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.j_pos[0], self.j_pos[1] + 1)

    @property
    def momenta(self) -> np.ndarray:
        return np.arange(self.j_mom[0], self.j_mom[1] + 1)

    @property
    def size(self) -> int:
        return self.positions.size * self.momenta.size

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.positions * self.x0

    @property
    def k_max(self) -> float:
        return max(abs(self.j_mom[0]), abs(self.j_mom[1])) * self.k0

    def as_dict(self) -> dict:
        return {"x0": self.x0, "k0": self.k0, "zeta": self.zeta, "j_pos": list(self.j_pos),
                "j_mom": list(self.j_mom), "origin": self.origin}


# lattice used throughout for b = 5.5: 13 x 11 position cells, 9 x 9 momentum cells;
# y cells are shifted by half a cell so that j_y = 1..11 tiles [0, 11]
DEFAULT_X = WannierLatticeParams(j_pos=(-6, 6), j_mom=(-4, 4), origin=0.0)
DEFAULT_Y = WannierLatticeParams(j_pos=(1, 11), j_mom=(-4, 4), origin=-0.5)


@dataclass(frozen=True, eq=False)
class Wannier1D:
    """Orthonormal 1D factor: ``functions[:, i]`` sampled on ``nodes``; column
    ``i`` belongs to cell ``index[i] = (j_pos, j_mom)`` (j_pos slowest)."""

    params: WannierLatticeParams
    nodes: np.ndarray
    functions: np.ndarray
    index: np.ndarray
    condition: float
    periodic: bool = False

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def size(self) -> int:
        return self.functions.shape[1]

    def gram(self) -> np.ndarray:
        return self.h * (self.functions.conj().T @ self.functions)

    def column(self, j_pos: int, j_mom: int) -> int:
        p = self.params
        return (j_pos - p.j_pos[0]) * p.momenta.size + (j_mom - p.j_mom[0])

    def restrict(self, nodes: np.ndarray) -> np.ndarray:
        """Rows of ``functions`` on a sub-grid of ``nodes`` (must be commensurate)."""
        start = int(round((nodes[0] - self.nodes[0]) / self.h))
        if start < 0 or start + nodes.size > self.nodes.size or not np.allclose(
                self.nodes[start:start + nodes.size], nodes, atol=1e-9 * max(1.0, abs(self.h))):
            raise BasisError("grid is not commensurate with the Wannier factor grid")
        return self.functions[start:start + nodes.size]


def gaussian_frame(params: WannierLatticeParams, nodes: np.ndarray, period: float | None = None) -> np.ndarray:
    """Un-orthogonalized lattice Gaussians, columns ordered (j_pos, j_mom)."""
    cols = []
    for c in params.centers:
        d = nodes - c
        if period is not None:
            d = (d + 0.5 * period) % period - 0.5 * period
        env = np.exp(-(d**2) / (4.0 * params.zeta**2))
        for l in params.momenta:
            cols.append(env * np.exp(1j * l * params.k0 * nodes))
    return np.stack(cols, axis=1)


def symmetric_orthonormalize(frame: np.ndarray, weight: float, max_condition: float = 1e12
                             ) -> tuple[np.ndarray, float]:
    """Return frame @ S^{-1/2} with S the weighted overlap matrix, plus cond(S).

    One Newton-Schulz step afterwards pushes the Gram residual to round-off.
    """
    S = weight * (frame.conj().T @ frame)
    S = 0.5 * (S + S.conj().T)
    vals, vecs = np.linalg.eigh(S)
    cond = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
    if not cond < max_condition:
        raise BasisError(f"Gaussian overlap matrix is numerically singular (condition number {cond:.3e})")
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    out = frame @ inv_sqrt
    G = weight * (out.conj().T @ out)
    out = out @ (1.5 * np.eye(G.shape[0]) - 0.5 * G)
    return out, cond


def lattice_mother(u: np.ndarray, params: WannierLatticeParams, n_theta: int = 4097) -> np.ndarray:
    """Mother function of the infinite-lattice symmetric orthogonalization,
    sampled at lattice coordinates ``u = (x - origin) / x0``.

    The overlap matrix of the complete lattice is diagonalized by the Zak
    transform Z(f, theta) = sum_n g(f - n) e^{i n theta}; overlap^-1/2 maps the
    Gaussian to the function whose Zak transform is Z / |Z|.  Every lattice
    member is then w(x - c_j) e^{i l k0 x}.  ``n_theta`` is odd so the zero of
    Z at (f, theta) = (1/2, pi) is never sampled.
    """
    u = np.asarray(u, dtype=float)
    if n_theta % 2 == 0:
        raise ValueError("n_theta must be odd")
    width = params.zeta / params.x0
    reach = int(math.ceil(math.sqrt(160.0) * width)) + 2  # g < e^-40 beyond
    f = np.mod(u, 1.0)
    m = np.floor(u).astype(int)
    n = np.arange(-reach, reach + 1)
    g = np.exp(-((f[:, None] - n[None, :]) ** 2) / (4.0 * width**2))
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    Z = g @ np.exp(1j * np.outer(n, theta))
    Zw = Z / np.abs(Z)
    # coefficient of e^{-i m theta}: w(f + m); fft sums e^{-2 pi i q k / Q}
    coeff = np.fft.fft(np.conj(Zw), axis=1).conj() / n_theta
    out = coeff[np.arange(u.size), np.mod(m, n_theta)]
    too_far = np.abs(m) > n_theta // 2
    out[too_far] = 0.0
    return out.real / math.sqrt(params.x0)


def build_wannier_1d(params: WannierLatticeParams, nodes: np.ndarray, *, method: str = "lattice",
                     periodic: bool = False, polish: bool = True, min_padding: float | None = None,
                     nyquist_margin: float | None = None, max_condition: float = 1e12) -> Wannier1D:
    """Orthonormal Wannier factor for ``params`` on a uniform node set.

    ``method="lattice"`` takes the cells of the complete (infinite) lattice
    orthogonalization, see ``lattice_mother``, then removes the small
    discretization defect with a grid Loewdin step when ``polish`` is set.
    ``method="frame"`` orthogonalizes only the truncated Gaussian frame.
    Non-periodic grids must reach ``min_padding`` (default 4 zeta) past the
    outermost centers; tails are hard-zeroed beyond the grid.  ``periodic``
    wraps the frame on a ring, which makes the frame method exactly covariant.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise BasisError("need a 1D grid with at least two nodes")
    h = float(nodes[1] - nodes[0])
    if not np.allclose(np.diff(nodes), h, rtol=1e-9, atol=0):
        raise BasisError("grid must be uniform")
    zeta = params.zeta
    margin = 2.0 / zeta if nyquist_margin is None else nyquist_margin
    if math.pi / h < params.k_max + margin:
        raise BasisError(f"grid Nyquist {math.pi / h:.3f} below k_max + margin = {params.k_max + margin:.3f}")
    if params.size > nodes.size:
        raise BasisError(f"{params.size} lattice functions cannot be orthonormal on {nodes.size} nodes")
    period = None
    if periodic:
        period = nodes.size * h
        if abs(period - params.positions.size * params.x0) > 1e-9:
            raise BasisError("periodic grid length must equal the lattice length")
    else:
        pad = 4.0 * zeta if min_padding is None else min_padding
        c = params.centers
        if nodes[0] > c.min() - pad + 1e-12 or nodes[-1] < c.max() + pad - 1e-12:
            raise BasisError(f"grid [{nodes[0]:.3f}, {nodes[-1]:.3f}] lacks {pad:.3f} padding around the lattice")
    if method == "frame":
        funcs, cond = symmetric_orthonormalize(gaussian_frame(params, nodes, period), h, max_condition)
    elif method == "lattice":
        if periodic:
            raise BasisError("the lattice method is defined on the open line; use method='frame' on a ring")
        cols = []
        for c in params.centers:
            env = lattice_mother((nodes - c) / params.x0, params)
            for l in params.momenta:
                cols.append(env * np.exp(1j * l * params.k0 * nodes))
        funcs = np.stack(cols, axis=1)
        cond = 1.0
        if polish:
            funcs, cond = symmetric_orthonormalize(funcs, h, max_condition)
    else:
        raise ValueError(f"unknown method {method!r}")
    jp, jm = np.meshgrid(params.positions, params.momenta, indexing="ij")
    index = np.stack([jp.ravel(), jm.ravel()], axis=1)
    return Wannier1D(params, nodes, funcs, index, cond, periodic)


def padded_axis(nodes: np.ndarray, params: WannierLatticeParams, padding: float | None = None) -> np.ndarray:
    """Extend a uniform axis with its own spacing until it covers the lattice
    centers plus ``padding`` (default 10 zeta, where the Gaussians are < 1e-10)."""
    h = float(nodes[1] - nodes[0])
    pad = 10.0 * params.zeta if padding is None else padding
    lo = min(nodes[0], params.centers.min() - pad)
    hi = max(nodes[-1], params.centers.max() + pad)
    n_lo = int(math.ceil((nodes[0] - lo) / h - 1e-9))
    n_hi = int(math.ceil((hi - nodes[-1]) / h - 1e-9))
    return np.concatenate([nodes[0] - h * np.arange(n_lo, 0, -1), nodes, nodes[-1] + h * np.arange(1, n_hi + 1)])


@dataclass(frozen=True, eq=False)
class WannierBasis:
    """Tensor-product Planck-cell basis.  Flat cell order is
    (j_x, j_y, j_kx, j_ky) with j_x slowest."""

    bx: Wannier1D
    by: Wannier1D

    @property
    def shape(self) -> tuple[int, int, int, int]:
        px, py = self.bx.params, self.by.params
        return (px.positions.size, py.positions.size, px.momenta.size, py.momenta.size)

    @property
    def size(self) -> int:
        return self.bx.size * self.by.size

    @property
    def max_entropy(self) -> float:
        return math.log(self.size)

    def cell_index(self) -> np.ndarray:
        """(N, 4) array of (j_x, j_y, j_kx, j_ky) in flat order."""
        px, py = self.bx.params, self.by.params
        grids = np.meshgrid(px.positions, py.positions, px.momenta, py.momenta, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def flat_index(self, j_x: int, j_y: int, j_kx: int, j_ky: int) -> int:
        px, py = self.bx.params, self.by.params
        nx, ny, nkx, nky = self.shape
        return (((j_x - px.j_pos[0]) * ny + (j_y - py.j_pos[0])) * nkx + (j_kx - px.j_mom[0])) * nky + (j_ky - py.j_mom[0])

    def factors_on(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        return self.bx.restrict(grid.x), self.by.restrict(grid.y)

    def function(self, j_x: int, j_y: int, j_kx: int, j_ky: int, grid: Grid | None = None) -> np.ndarray:
        """One 2D Wannier function sampled on ``grid`` (or the full factor grids)."""
        fx = self.bx.functions[:, self.bx.column(j_x, j_kx)]
        fy = self.by.functions[:, self.by.column(j_y, j_ky)]
        if grid is not None:
            fx = self.bx.restrict(grid.x)[:, self.bx.column(j_x, j_kx)]
            fy = self.by.restrict(grid.y)[:, self.by.column(j_y, j_ky)]
        return np.outer(fx, fy)

    def amplitudes(self, states: np.ndarray, grid: Grid) -> np.ndarray:
        """<w_j|psi> for a stack of states (k, n_x, n_y) -> (k, N) in flat order."""
        wx, wy = self.factors_on(grid)
        states = np.asarray(states)
        single = states.ndim == 2
        if single:
            states = states[None]
        # (k, nx, ny) -> (k, Nx1d, Ny1d)
        t = np.matmul(wx.conj().T, states)
        c = np.matmul(t, wy.conj()) * grid.cell_area
        nx, ny, nkx, nky = self.shape
        c = c.reshape(-1, nx, nkx, ny, nky).transpose(0, 1, 3, 2, 4).reshape(c.shape[0], -1)
        return c[0] if single else c

    def as_dict(self) -> dict:
        return {"x": self.bx.params.as_dict(), "y": self.by.params.as_dict(),
                "x_nodes": [float(self.bx.nodes[0]), self.bx.h, int(self.bx.nodes.size)],
                "y_nodes": [float(self.by.nodes[0]), self.by.h, int(self.by.nodes.size)]}


DEFAULT_MEMORY_BUDGET = 2 * 1024**3


def build_wannier_2d(basis_x: Wannier1D, basis_y: Wannier1D, *, n_states: int = 1300,
                     memory_budget: int = DEFAULT_MEMORY_BUDGET, tol: float = 1e-10) -> WannierBasis:
    """Tensor product of two orthonormal factors.  ``memory_budget`` bounds the
    complex overlap matrix against ``n_states`` eigenstates that downstream
    dynamics will precompute."""
    for name, f in (("x", basis_x), ("y", basis_y)):
        res = np.abs(f.gram() - np.eye(f.size)).max()
        if res > tol:
            raise BasisError(f"{name} factor is not orthonormal (Gram residual {res:.2e})")
    n = basis_x.size * basis_y.size
    if n * n_states * 16 > memory_budget:
        raise BasisError(f"{n} cells x {n_states} states exceeds the memory budget of {memory_budget} bytes")
    return WannierBasis(basis_x, basis_y)


def basis_for_grid(grid: Grid, px: WannierLatticeParams = DEFAULT_X, py: WannierLatticeParams = DEFAULT_Y,
                   **kwargs) -> WannierBasis:
    """Wannier basis whose factor grids extend the axes of ``grid``."""
    bx = build_wannier_1d(px, padded_axis(grid.x, px))
    by = build_wannier_1d(py, padded_axis(grid.y, py))
    return build_wannier_2d(bx, by, **kwargs)


# ---------------------------------------------------------------------------
# distributions and entropy


@dataclass(frozen=True, eq=False)
class PhaseSpaceDistribution:
    p: np.ndarray
    captured: float
    entropy: float
    flagged: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def size(self) -> int:
        return self.p.size


def entropy(p) -> float:
    """-sum p ln p with 0 ln 0 = 0."""
    if isinstance(p, PhaseSpaceDistribution):
        p = p.p
    p = np.asarray(p, dtype=float).ravel()
    if p.size and p.min() < -1e-12:
        raise ValueError(f"negative probability {p.min():.3e}: corrupted distribution")
    q = p[p > 0]
    return float(-np.dot(q, np.log(q)))


def entropies(P: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a (k, N) probability array."""
    P = np.asarray(P, dtype=float)
    if P.size and P.min() < -1e-12:
        raise ValueError("negative probability: corrupted distribution")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def project(state: np.ndarray, grid: Grid, basis: WannierBasis, *, norm_tol: float = 1e-6,
            capture_floor: float = 0.99) -> PhaseSpaceDistribution:
    """Cell probabilities |<w_j|psi>|^2 of a normalized grid state."""
    norm = grid.norm2(state)
    if abs(norm - 1.0) > norm_tol:
        raise ValueError(f"state norm {norm:.8f} is not 1 within {norm_tol}")
    p = np.abs(basis.amplitudes(state, grid)) ** 2
    captured = float(p.sum())
    notes = ()
    flagged = captured < capture_floor
    if flagged:
        notes = (f"captured norm {captured:.4f} < {capture_floor}",)
    return PhaseSpaceDistribution(p, captured, entropy(p), flagged, notes)


def project_many(states: np.ndarray, grid: Grid, basis: WannierBasis, chunk: int = 64) -> np.ndarray:
    """Probabilities for a stack of states, (k, N); chunked to bound memory."""
    out = np.empty((states.shape[0], basis.size))
    for s in range(0, states.shape[0], chunk):
        out[s:s + chunk] = np.abs(basis.amplitudes(states[s:s + chunk], grid)) ** 2
    return out


def write_distribution_csv(path, dist: PhaseSpaceDistribution, basis: WannierBasis, manifest_hash: str = "") -> None:
    idx = basis.cell_index()
    with open(path, "w") as fh:
        fh.write(f"# manifest: {manifest_hash}\n")
        fh.write("j_x,j_y,j_kx,j_ky,p\n")
        for (jx, jy, kx, ky), v in zip(idx, dist.p):
            fh.write(f"{jx},{jy},{kx},{ky},{v:.17g}\n")
