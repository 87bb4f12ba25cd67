"""Billiard geometries and their Dirichlet eigensystems.

Units: lengths in L, energies in hbar^2/2mL^2, so H = -laplacian and E = k^2.

Grid fields are stored as arrays of shape ``(n_x, n_y)`` indexed ``[ix, iy]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

log = logging.getLogger(__name__)

DEFAULT_GRID = 180
MIN_GRID = 64
DEFAULT_EIG_CAP = 1300


class SpectralError(RuntimeError):
    """Raised when an eigensystem cannot be produced to the requested accuracy."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid with an inside-mask; trapezoidal weights are dx*dy
    on every node because the fields vanish on the boundary nodes."""

    x: np.ndarray
    y: np.ndarray
    mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.vdot(f, g) * self.cell_area)

    def norm2(self, f: np.ndarray) -> float:
        return float(np.vdot(f, f).real * self.cell_area)

    def with_mask(self, mask: np.ndarray) -> "Grid":
        return Grid(self.x, self.y, np.asarray(mask, dtype=bool))


def ripple_half_width(y, b: float, a: float):
    """Half-width b - a cos(pi y / b) of the ripple billiard at height y."""
    return b - a * np.cos(np.pi * np.asarray(y) / b)


@dataclass(frozen=True, eq=False)
class BilliardGeometry:
    b: float
    a: float
    n_x: int
    n_y: int
    grid: Grid
    notes: tuple[str, ...] = ()

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        return (-(self.b + self.a), self.b + self.a, 0.0, 2.0 * self.b)

    @property
    def box_size(self) -> tuple[float, float]:
        return (2.0 * (self.b + self.a), 2.0 * self.b)

    @property
    def area(self) -> float:
        # the cosine integrates to zero over [0, 2b]
        return 4.0 * self.b**2

    @property
    def mask_area(self) -> float:
        return float(self.grid.mask.sum() * self.grid.cell_area)

    @property
    def perimeter(self) -> float:
        return billiard_perimeter(self.b, self.a)

    @property
    def is_square(self) -> bool:
        return self.a == 0.0


def billiard_perimeter(b: float, a: float) -> float:
    slope = a * np.pi / b
    side, _ = quad(lambda y: math.sqrt(1.0 + (slope * math.sin(np.pi * y / b)) ** 2),
                   0.0, 2.0 * b, limit=200, epsabs=1e-13, epsrel=1e-13)
    return 4.0 * (b - a) + 2.0 * side


def build_geometry(b: float, a: float, n_x: int = DEFAULT_GRID, n_y: int = DEFAULT_GRID) -> BilliardGeometry:
    """Ripple billiard bounded by x = +-(b - a cos(pi y/b)), sampled on an
    ``n_x`` x ``n_y`` node grid over its bounding box."""
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    if a < 0:
        raise ValueError(f"a must be non-negative, got {a}")
    if a >= b:
        raise ValueError(f"a={a} >= b={b}: boundary self-intersects")
    notes = []
    if min(n_x, n_y) < MIN_GRID:
        notes.append(f"grid {n_x}x{n_y} is coarser than the {MIN_GRID}-node minimum")
    x = np.linspace(-(b + a), b + a, n_x)
    y = np.linspace(0.0, 2.0 * b, n_y)
    mask = np.abs(x)[:, None] < ripple_half_width(y, b, a)[None, :]
    mask[:, 0] = mask[:, -1] = False
    return BilliardGeometry(float(b), float(a), n_x, n_y, Grid(x, y, mask), tuple(notes))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues with grid-sampled, grid-orthonormal eigenfunctions."""

    energies: np.ndarray
    states: np.ndarray  # (n_eig, n_x, n_y)
    grid: Grid
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_eig(self) -> int:
        return int(self.energies.size)

    def truncate(self, n: int) -> "SpectralDecomposition":
        if n > self.n_eig:
            raise ValueError(f"cannot truncate {self.n_eig} states to {n}")
        meta = dict(self.meta, truncated_from=self.n_eig)
        return SpectralDecomposition(self.energies[:n], self.states[:n], self.grid, self.label, meta)


# ---------------------------------------------------------------------------
# helpers shared by both solvers


def weyl_count(E, area: float, perimeter: float):
    """Two-term Weyl estimate (A E - P sqrt(E)) / 4 pi."""
    E = np.asarray(E, dtype=float)
    return (area * E - perimeter * np.sqrt(E)) / (4.0 * np.pi)


def weyl_energy(n: float, area: float, perimeter: float) -> float:
    """Invert the two-term Weyl law for the energy of level ``n``."""
    # A q^2 - P q - 4 pi n = 0 with q = sqrt(E)
    q = (perimeter + math.sqrt(perimeter**2 + 16.0 * np.pi * area * n)) / (2.0 * area)
    return q * q


def fix_signs(states: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Make the first non-negligible value of each field (row-major scan) positive."""
    flat = states.reshape(states.shape[0], -1)
    scale = np.abs(flat).max(axis=1, keepdims=True)
    big = np.abs(flat) > rel_tol * np.where(scale > 0, scale, 1.0)
    first = np.argmax(big, axis=1)
    signs = np.sign(flat[np.arange(flat.shape[0]), first])
    signs[signs == 0] = 1.0
    return states * signs[:, None, None]


def grid_orthonormalize(states: np.ndarray, grid: Grid) -> tuple[np.ndarray, float]:
    """Symmetric (overlap^-1/2) orthonormalization of sampled eigenfunctions on
    the grid quadrature.  Returns the new fields and the largest Gram defect
    that was removed."""
    n = states.shape[0]
    flat = states.reshape(n, -1)
    gram = (flat @ flat.T) * grid.cell_area
    defect = float(np.abs(gram - np.eye(n)).max())
    vals, vecs = np.linalg.eigh(gram)
    if vals.min() <= 1e-8:
        raise SpectralError(f"sampled eigenfunctions are nearly dependent on the grid (min Gram eigenvalue {vals.min():.2e})")
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    out = (inv_sqrt @ flat).reshape(states.shape)
    return out, defect


def _order_with_ties(energies: np.ndarray, lead_index: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Ascending order; eigenvalues equal within ``rel_tol`` are ordered by the
    index of their dominant basis vector."""
    order = np.argsort(energies, kind="stable")
    e = energies[order]
    out = []
    start = 0
    for i in range(1, e.size + 1):
        if i == e.size or e[i] - e[i - 1] > rel_tol * max(abs(e[i]), 1.0):
            block = order[start:i]
            out.extend(block[np.argsort(lead_index[block], kind="stable")])
            start = i
    return np.asarray(out, dtype=int)


# ---------------------------------------------------------------------------
# square billiard (analytic)


def square_modes(side: float, n_eig: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``n_eig`` (E, (n_x, n_y)) of the square, degenerate pairs in
    lexicographic order."""
    # N(E) <= pi/4 * r^2 lattice points in the quarter disc; pad generously
    r = int(math.ceil(math.sqrt(4.0 * n_eig / np.pi))) + 8
    nx, ny = np.meshgrid(np.arange(1, r + 1), np.arange(1, r + 1), indexing="ij")
    nx, ny = nx.ravel(), ny.ravel()
    q = nx**2 + ny**2
    order = np.lexsort((ny, nx, q))[:n_eig]
    modes = np.stack([nx[order], ny[order]], axis=1)
    energies = np.pi**2 * q[order] / side**2
    return energies.astype(float), modes


def aligned_square_grid(side: float, n: int = DEFAULT_GRID, origin: tuple[float, float] = (0.0, 0.0)) -> Grid:
    """Grid whose first and last nodes sit on the square's walls, so sampled
    sine modes are exactly orthonormal under the node-sum quadrature."""
    x = origin[0] + np.linspace(0.0, side, n)
    y = origin[1] + np.linspace(0.0, side, n)
    mask = np.zeros((n, n), dtype=bool)
    mask[1:-1, 1:-1] = True
    return Grid(x, y, mask)


def solve_square(side: float, n_eig: int, grid: Grid | None = None,
                 origin: tuple[float, float] = (0.0, 0.0), cap: int = DEFAULT_EIG_CAP,
                 orthonormalize: bool | None = None) -> SpectralDecomposition:
    """Analytic Dirichlet eigensystem of the square [0, side]^2 shifted to ``origin``.

    With no grid given, the fields are sampled on a wall-aligned grid where they
    are exactly orthonormal.  On a foreign grid (e.g. a ripple bounding-box grid
    shared with the Wannier basis) they are symmetric-orthonormalized there.
    """
    if not side > 0:
        raise ValueError(f"side must be positive, got {side}")
    if n_eig > cap:
        raise ValueError(f"n_eig={n_eig} exceeds the configured cap {cap}")
    energies, modes = square_modes(side, n_eig)
    aligned = grid is None
    if grid is None:
        grid = aligned_square_grid(side, max(DEFAULT_GRID, int(modes.max()) + 2), origin)
    u = grid.x - origin[0]
    v = grid.y - origin[1]
    inside_u = (u > 0) & (u < side)
    inside_v = (v > 0) & (v < side)
    mask = inside_u[:, None] & inside_v[None, :]
    if not aligned:
        grid = grid.with_mask(mask)
    nmax = int(modes.max())
    sx = np.sqrt(2.0 / side) * np.sin(np.pi * np.outer(np.arange(1, nmax + 1), u) / side) * inside_u
    sy = np.sqrt(2.0 / side) * np.sin(np.pi * np.outer(np.arange(1, nmax + 1), v) / side) * inside_v
    states = sx[modes[:, 0] - 1][:, :, None] * sy[modes[:, 1] - 1][:, None, :]
    meta = {"kind": "square", "side": side, "origin": list(origin), "modes": modes.tolist()}
    if orthonormalize is None:
        orthonormalize = not aligned
    if orthonormalize:
        states, defect = grid_orthonormalize(states, grid)
        meta["grid_gram_defect"] = defect
    states = fix_signs(states)
    return SpectralDecomposition(energies, states, grid, f"square(side={side})", meta)


# ---------------------------------------------------------------------------
# ripple billiard: Galerkin in a straightened frame


@dataclass(frozen=True)
class RippleSolverConfig:
    """Galerkin discretization controls.

    The basis keeps double-sine modes (m, n) of the straightened frame with
    (m pi / 2(b+a))^2 + (n pi / 2b)^2 <= (cutoff * k_top)^2 where k_top is the
    Weyl estimate of the highest requested wave number.
    """

    cutoff: float = 1.5
    refine: float = 1.5
    certify: bool = True
    certify_level: int = 1200
    certify_tol: float = 1e-3
    max_refinements: int = 3
    cap: int = DEFAULT_EIG_CAP
    reorthonormalize: bool = True

    def key(self) -> dict:
        return {"cutoff": self.cutoff, "refine": self.refine, "certify": self.certify,
                "certify_level": self.certify_level, "certify_tol": self.certify_tol,
                "max_refinements": self.max_refinements, "reorthonormalize": self.reorthonormalize}


def _sine_factors(nodes: np.ndarray, n_max: int, length: float, start: float):
    """Orthonormal sin(m pi (t - start)/length) * sqrt(2/length) and its derivative."""
    m = np.arange(1, n_max + 1)
    arg = np.pi * np.outer(nodes - start, m) / length
    norm = math.sqrt(2.0 / length)
    return norm * np.sin(arg), norm * (np.pi * m / length) * np.cos(arg)


def _gauss(n: int, lo: float, hi: float):
    t, w = leggauss(n)
    return 0.5 * (hi - lo) * t + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


class _RippleGalerkin:
    """Stiffness/mass matrices of -laplacian on the ripple in the frame
    xi = x b / w(y), w(y) = b - a cos(pi y/b), with u(xi, y) = psi(x, y).

    With s = w/b and s' = ds/dy the Dirichlet form becomes

        int [u_xi^2 (1 + xi^2 s'^2)/s - 2 xi s' u_xi u_y + s u_y^2] dxi dy

    and the mass form int s u^2 dxi dy.  Every coefficient is a product of a
    function of xi and a function of y, so each matrix is a sum of Kronecker
    products of 1D Gauss-Legendre integrals.
    """

    def __init__(self, b: float, a: float, m_max: int, n_max: int):
        self.b, self.a, self.m_max, self.n_max = b, a, m_max, n_max
        L = 2.0 * b
        xq, xw = _gauss(2 * m_max + 64, -b, b)
        X, Xp = _sine_factors(xq, m_max, L, -b)
        self.D = (Xp * xw[:, None]).T @ Xp
        self.R = (Xp * (xw * xq**2)[:, None]).T @ Xp
        self.P = (Xp * (xw * xq)[:, None]).T @ X  # P[m, m'] = int xi X_m' X_m'
        yq, yw = _gauss(2 * n_max + 128, 0.0, L)
        Y, Yp = _sine_factors(yq, n_max, L, 0.0)
        s = ripple_half_width(yq, b, a) / b
        ds = (a * np.pi / b**2) * np.sin(np.pi * yq / b)
        self.Y1 = (Y * (yw / s)[:, None]).T @ Y
        self.Y2 = (Y * (yw * ds**2 / s)[:, None]).T @ Y
        self.Q = (Y * (yw * ds)[:, None]).T @ Yp  # Q[n, n'] = int s' Y_n Y_n''
        self.K = (Yp * (yw * s)[:, None]).T @ Yp
        self.Ms = (Y * (yw * s)[:, None]).T @ Y

    def matrices(self, m: np.ndarray, n: np.ndarray):
        mi, mj = m[:, None] - 1, m[None, :] - 1
        ni, nj = n[:, None] - 1, n[None, :] - 1
        cross = self.P[mi, mj] * self.Q[ni, nj]
        A = (self.D[mi, mj] * self.Y1[ni, nj] + self.R[mi, mj] * self.Y2[ni, nj]
             - cross - cross.T + (mi == mj) * self.K[ni, nj])
        B = (mi == mj) * self.Ms[ni, nj]
        return 0.5 * (A + A.T), 0.5 * (B + B.T)


def ripple_basis(b: float, a: float, k_cut: float) -> tuple[np.ndarray, np.ndarray]:
    """Mode pairs (m, n) kept by the elliptical cutoff, in lexicographic order."""
    lx, ly = 2.0 * (b + a), 2.0 * b
    m_max = int(k_cut * lx / np.pi)
    n_max = int(k_cut * ly / np.pi)
    mm, nn = np.meshgrid(np.arange(1, m_max + 1), np.arange(1, n_max + 1), indexing="ij")
    keep = (mm * np.pi / lx) ** 2 + (nn * np.pi / ly) ** 2 <= k_cut**2
    return mm[keep], nn[keep]


def _solve_galerkin(b: float, a: float, n_eig: int, k_cut: float):
    m, n = ripple_basis(b, a, k_cut)
    if m.size < n_eig:
        raise SpectralError(f"basis of {m.size} modes cannot hold {n_eig} eigenpairs")
    gal = _RippleGalerkin(b, a, int(m.max()), int(n.max()))
    energies, vectors, lead, blocks = [], [], [], []
    # x -> -x and y -> 2b - y commute with H; parity classes decouple
    for pm in (1, 0):
        for pn in (1, 0):
            sel = np.flatnonzero((m % 2 == pm) & (n % 2 == pn))
            if sel.size == 0:
                continue
            A, B = gal.matrices(m[sel], n[sel])
            want = min(sel.size, int(math.ceil(0.3 * n_eig)) + 40)
            while True:
                vals, vecs = scipy.linalg.eigh(A, B, subset_by_index=[0, want - 1], driver="gvx")
                blocks.append((sel, vals, vecs, want == sel.size))
                break
    # make sure every block reached past the global n_eig-th eigenvalue
    for attempt in range(4):
        pooled = np.concatenate([v for _, v, _, _ in blocks])
        threshold = np.sort(pooled)[n_eig - 1] if pooled.size >= n_eig else np.inf
        short = [i for i, (sel, vals, _, full) in enumerate(blocks) if not full and vals[-1] <= threshold]
        if not short:
            break
        for i in short:
            sel, vals, _, _ = blocks[i]
            A, B = gal.matrices(m[sel], n[sel])
            want = min(sel.size, 2 * vals.size)
            vals, vecs = scipy.linalg.eigh(A, B, subset_by_index=[0, want - 1], driver="gvx")
            blocks[i] = (sel, vals, vecs, want == sel.size)
    else:
        raise SpectralError("parity blocks did not cover the requested spectrum")
    coeffs = []
    for sel, vals, vecs, _ in blocks:
        for j in range(vals.size):
            energies.append(vals[j])
            full = np.zeros(m.size)
            full[sel] = vecs[:, j]
            coeffs.append(full)
            lead.append(sel[np.argmax(np.abs(vecs[:, j]))])
    energies = np.asarray(energies)
    coeffs = np.asarray(coeffs)
    order = _order_with_ties(energies, np.asarray(lead))[:n_eig]
    return energies[order], coeffs[order], m, n, gal


def _residual_norms(gal: _RippleGalerkin, m, n, energies, coeffs) -> np.ndarray:
    A, B = gal.matrices(m, n)
    r = coeffs @ A - energies[:, None] * (coeffs @ B)
    return np.linalg.norm(r, axis=1) / np.maximum(np.abs(energies), 1.0)


def sample_ripple_states(b: float, a: float, coeffs: np.ndarray, m: np.ndarray, n: np.ndarray,
                         grid: Grid, chunk: int = 200) -> np.ndarray:
    """Evaluate Galerkin eigenfunctions on grid nodes inside the billiard."""
    L = 2.0 * b
    m_max, n_max = int(m.max()), int(n.max())
    s = ripple_half_width(grid.y, b, a) / b
    xi = grid.x[:, None] / s[None, :]
    inside = grid.mask & (np.abs(xi) < b)
    norm = math.sqrt(2.0 / L)
    Y = norm * np.sin(np.pi * np.outer(np.arange(1, n_max + 1), grid.y) / L)  # (n_max, n_y)
    out = np.empty((coeffs.shape[0],) + grid.shape)
    # X[iy, ix, m], batched over rows of constant y
    X = norm * np.sin(np.pi * (xi.T[:, :, None] + b) * np.arange(1, m_max + 1)[None, None, :] / L)
    X *= inside.T[:, :, None]
    for start in range(0, coeffs.shape[0], chunk):
        c = coeffs[start:start + chunk]
        C = np.zeros((c.shape[0], m_max, n_max))
        C[:, m - 1, n - 1] = c
        G = (C @ Y).transpose(2, 1, 0)  # (n_y, m_max, k)
        out[start:start + chunk] = np.matmul(X, G).transpose(2, 1, 0)
    return out


def solve_ripple(geom: BilliardGeometry, n_eig: int, config: RippleSolverConfig = RippleSolverConfig()
                 ) -> SpectralDecomposition:
    """Lowest ``n_eig`` Dirichlet eigenpairs of the ripple billiard.

    The basis is refined by ``config.refine`` in wave number until the
    certificate level moves by less than ``config.certify_tol``; both levels
    and their relative shift are stored in ``meta['certificate']``.
    """
    if n_eig > config.cap:
        raise ValueError(f"n_eig={n_eig} exceeds the configured cap {config.cap}")
    if n_eig < 1:
        raise ValueError("n_eig must be positive")
    b, a = geom.b, geom.a
    k_top = math.sqrt(weyl_energy(n_eig, geom.area, geom.perimeter))
    k_cut = config.cutoff * k_top
    energies, coeffs, m, n, gal = _solve_galerkin(b, a, n_eig, k_cut)
    certificate = None
    if config.certify:
        level = min(config.certify_level, n_eig)
        history = []
        for _ in range(config.max_refinements):
            k_fine = k_cut * config.refine
            e2, c2, m2, n2, gal2 = _solve_galerkin(b, a, n_eig, k_fine)
            shift = abs(e2[level - 1] - energies[level - 1]) / e2[level - 1]
            history.append({"k_cut": k_cut, "k_fine": k_fine, "E_coarse": float(energies[level - 1]),
                            "E_fine": float(e2[level - 1]), "rel_shift": float(shift)})
            energies, coeffs, m, n, gal, k_cut = e2, c2, m2, n2, gal2, k_fine
            if shift < config.certify_tol:
                break
        else:
            raise SpectralError(f"E_{level} not converged after {config.max_refinements} refinements: {history}")
        certificate = {"level": level, "tol": config.certify_tol, "history": history}
    residuals = _residual_norms(gal, m, n, energies, coeffs)
    if residuals.max() > 1e-6:
        worst = int(np.argmax(residuals))
        raise SpectralError(f"eigensolver residual {residuals[worst]:.2e} at level {worst + 1}")
    if energies.min() <= 0:
        raise SpectralError("non-positive eigenvalue returned")
    states = sample_ripple_states(b, a, coeffs, m, n, geom.grid)
    meta = {"kind": "ripple", "b": b, "a": a, "n_x": geom.n_x, "n_y": geom.n_y,
            "basis_size": int(m.size), "k_cut": k_cut, "solver": config.key(),
            "certificate": certificate, "max_residual": float(residuals.max())}
    if config.reorthonormalize:
        states, defect = grid_orthonormalize(states, geom.grid)
        meta["grid_gram_defect"] = defect
    states = fix_signs(states)
    return SpectralDecomposition(energies, states, geom.grid, f"ripple(b={b}, a={a})", meta)


def ripple_eigenvalues(b: float, a: float, n_eig: int, cutoff: float = 2.0) -> np.ndarray:
    """Eigenvalues only, at a fixed basis cutoff (no certificate, no sampling)."""
    area = 4.0 * b * b
    k_top = math.sqrt(weyl_energy(n_eig, area, billiard_perimeter(b, a)))
    energies, *_ = _solve_galerkin(b, a, n_eig, cutoff * k_top)
    return energies


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    norm_residual: np.ndarray
    max_offdiag: float
    boundary_leak: np.ndarray
    weyl_energies: np.ndarray
    weyl_deviation: np.ndarray
    flagged: list[int]
    tolerance: dict

    @property
    def ok(self) -> bool:
        return not self.flagged

    def max_weyl_deviation(self, lo: float = 20.0, hi: float = 100.0) -> float:
        sel = (self.weyl_energies >= lo) & (self.weyl_energies <= hi)
        return float(np.abs(self.weyl_deviation[sel]).max()) if sel.any() else float("nan")

    def summary(self) -> str:
        lines = [f"max |norm - 1|        {self.norm_residual.max():.3e}",
                 f"max |offdiag Gram|    {self.max_offdiag:.3e}",
                 f"max boundary leak     {self.boundary_leak.max():.3e}"]
        if self.weyl_energies.size:
            lines.append(f"max Weyl deviation    {self.max_weyl_deviation(self.weyl_energies[0], self.weyl_energies[-1]):.3%}"
                         f" over E in [{self.weyl_energies[0]:g}, {self.weyl_energies[-1]:g}]")
        lines.append("flagged levels        " + (", ".join(str(i + 1) for i in self.flagged) or "none"))
        return "\n".join(lines)


def counting_function(energies: np.ndarray, E) -> np.ndarray:
    return np.searchsorted(np.sort(energies), np.asarray(E, dtype=float), side="right")


def verify_spectrum(spec: SpectralDecomposition, area: float | None = None, perimeter: float | None = None,
                    weyl_range: tuple[float, float] = (20.0, 100.0), n_weyl: int = 161,
                    norm_tol: float = 1e-8, ortho_tol: float = 1e-6, leak_tol: float = 1e-12) -> ValidationReport:
    """Audit normalization, orthogonality, boundary leakage and the Weyl law."""
    grid = spec.grid
    flat = spec.states.reshape(spec.n_eig, -1)
    gram = (flat @ flat.T) * grid.cell_area
    norms = np.diag(gram).copy()
    off = gram - np.diag(norms)
    norm_res = np.abs(norms - 1.0)
    outside = ~grid.mask.ravel()
    leak = np.sqrt((flat[:, outside] ** 2).sum(axis=1) * grid.cell_area)
    flagged = set(np.flatnonzero(norm_res > norm_tol)) | set(np.flatnonzero(leak > leak_tol))
    flagged |= set(np.flatnonzero(np.abs(off).max(axis=1) > ortho_tol))
    E_w = np.empty(0)
    dev = np.empty(0)
    if area is not None and perimeter is not None:
        top = spec.energies[-1]
        hi = min(weyl_range[1], top)
        if hi > weyl_range[0]:
            E_w = np.linspace(weyl_range[0], hi, n_weyl)
            est = weyl_count(E_w, area, perimeter)
            dev = (counting_function(spec.energies, E_w) - est) / est
    return ValidationReport(norm_res, float(np.abs(off).max()) if spec.n_eig > 1 else 0.0, leak, E_w, dev,
                            sorted(int(i) for i in flagged),
                            {"norm": norm_tol, "ortho": ortho_tol, "leak": leak_tol})
