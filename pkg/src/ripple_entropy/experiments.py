"""End-to-end pipelines behind the command-line interface: cached spectra and
bases, and the four figure reproductions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import berry as B
from . import dynamics as D
from . import svg
from .cache import (_atomic_write, cache_dir, content_key, file_hash, read_spectrum, read_wannier, spectrum_key,
                    wannier_key, write_spectrum, write_wannier)
from .config import ExperimentConfig
from .manifest import RunManifest, write_csv
from .oracles import HarmonicOscillatorSpec, oscillator_demo
from .phasespace import (WannierBasis, WannierLatticeParams, build_wannier_1d, build_wannier_2d, entropy,
                         padded_axis, project_many)
from .spectral import (RippleSolverConfig, SpectralDecomposition, ValidationReport, build_geometry, solve_ripple,
                       solve_square, verify_spectrum)

log = logging.getLogger(__name__)


def ratio_to_a(b: float, ratio: float) -> float:
    """a = ratio * b rounded so that e.g. 0.1 * 5.5 and 0.55 share a cache key."""
    return round(ratio * b, 12)


def lattice_params(cfg: ExperimentConfig) -> tuple[WannierLatticeParams, WannierLatticeParams]:
    px = WannierLatticeParams(j_pos=tuple(cfg.jx_range), j_mom=tuple(cfg.jk_range), origin=0.0)
    py = WannierLatticeParams(j_pos=tuple(cfg.jy_range), j_mom=tuple(cfg.jk_range), origin=cfg.y_origin)
    return px, py


def solver_config(cfg: ExperimentConfig) -> RippleSolverConfig:
    return RippleSolverConfig(cutoff=cfg.cutoff, certify=cfg.certify, cap=max(cfg.n_eig, 1300))


@dataclass
class Cached:
    value: object
    digest: str
    path: Path
    hit: bool


@dataclass
class Store:
    """Content-keyed cache of spectra, bases and entropy spectra."""

    root: Path = field(default_factory=cache_dir)
    overwrite: bool = False
    build: bool = True

    def __post_init__(self):
        self.root = cache_dir(self.root)

    def _missing(self, path: Path):
        if not self.build:
            raise FileNotFoundError(f"cache {path} missing and building is disabled")

    # spectra ---------------------------------------------------------------

    def ripple(self, cfg: ExperimentConfig, a: float | None = None, n_eig: int | None = None) -> Cached:
        a = cfg.a if a is None else a
        n_eig = n_eig or cfg.n_eig
        if a == 0.0:
            return self.square_box(cfg, n_eig)
        sc = solver_config(cfg)
        key = spectrum_key("ripple", cfg.b, a, cfg.n_x, cfg.n_y, n_eig, sc.key())
        path = self.root / f"ripple-{key[:20]}.bqspec"
        if path.exists():
            return Cached(read_spectrum(path), file_hash(path), path, True)
        self._missing(path)
        log.info("solving ripple b=%g a=%g n_eig=%d", cfg.b, a, n_eig)
        spec = solve_ripple(build_geometry(cfg.b, a, cfg.n_x, cfg.n_y), n_eig, sc)
        digest = write_spectrum(path, spec, cfg.b, a, overwrite=self.overwrite)
        del spec
        return Cached(read_spectrum(path), digest, path, False)

    def square_box(self, cfg: ExperimentConfig, n_eig: int | None = None) -> Cached:
        """a = 0 fast path: the 2b x 2b square, analytic on its own wall-aligned grid."""
        n_eig = n_eig or cfg.n_eig
        key = spectrum_key("square-box", cfg.b, 0.0, cfg.n_x, cfg.n_y, n_eig)
        path = self.root / f"square-{key[:20]}.bqspec"
        if path.exists():
            return Cached(read_spectrum(path), file_hash(path), path, True)
        self._missing(path)
        geom = build_geometry(cfg.b, 0.0, cfg.n_x, cfg.n_y)
        spec = solve_square(2.0 * cfg.b, n_eig, grid=geom.grid, origin=(-cfg.b, 0.0), orthonormalize=False)
        digest = write_spectrum(path, spec, cfg.b, 0.0, overwrite=self.overwrite)
        return Cached(read_spectrum(path), digest, path, False)

    def square_on(self, cfg: ExperimentConfig, host: SpectralDecomposition, host_key: str) -> Cached:
        """Square of side b centered at (0, b), sampled on ``host``'s grid."""
        side = cfg.b
        origin = (-side / 2.0, cfg.b - side / 2.0)
        key = spectrum_key("square-on-grid", side / 2.0, 0.0, cfg.n_x, cfg.n_y, cfg.n_eig,
                           extra={"origin": list(origin), "host": host_key})
        path = self.root / f"square-{key[:20]}.bqspec"
        if path.exists():
            return Cached(read_spectrum(path), file_hash(path), path, True)
        self._missing(path)
        spec = solve_square(side, cfg.n_eig, grid=host.grid, origin=origin)
        digest = write_spectrum(path, spec, side / 2.0, 0.0, overwrite=self.overwrite)
        return Cached(read_spectrum(path), digest, path, False)

    # Wannier basis ---------------------------------------------------------

    def basis(self, cfg: ExperimentConfig, grid) -> Cached:
        px, py = lattice_params(cfg)
        nx, ny = padded_axis(grid.x, px), padded_axis(grid.y, py)
        key = wannier_key({"params": px.as_dict(), "nodes": [float(nx[0]), float(nx[1] - nx[0]), int(nx.size)]},
                          {"params": py.as_dict(), "nodes": [float(ny[0]), float(ny[1] - ny[0]), int(ny.size)]},
                          method="lattice", polish=True)
        path = self.root / f"wannier-{key[:20]}.bqwan"
        if path.exists():
            return Cached(read_wannier(path), file_hash(path), path, True)
        self._missing(path)
        basis = build_wannier_2d(build_wannier_1d(px, nx), build_wannier_1d(py, ny), n_states=cfg.n_eig)
        digest = write_wannier(path, basis, overwrite=self.overwrite)
        return Cached(read_wannier(path), digest, path, False)

    # entropy spectra -------------------------------------------------------

    def entropy_spectrum(self, cfg: ExperimentConfig, ratio: float) -> Cached:
        sp = self.ripple(cfg, a=ratio_to_a(cfg.b, ratio))
        bs = self.basis(cfg, sp.value.grid)
        top = cfg.levels[1]
        template = B.BerryEnsembleSpec(k=1.0, n_components=cfg.berry_components, seed=cfg.seed, mode=cfg.berry_mode)
        key = content_key({"spectrum": sp.digest, "basis": bs.digest, "top": top, "window": cfg.window,
                           "berry": [template.n_components, template.seed, template.mode]})
        path = self.root / f"entropy-{key[:20]}.bqent"
        if path.exists():
            return Cached(_read_entropy(path, cfg.window, sp.value.label), file_hash(path), path, True)
        self._missing(path)
        log.info("entropy spectrum a/b=%g", ratio)
        spec = B.entropy_spectrum(sp.value, bs.value, range(1, top + 1), template, cfg.window)
        table = np.stack([spec.levels, spec.energies, spec.s_eig, spec.s_berry, spec.captured,
                          spec.captured_berry]).astype("<f8")
        digest = _atomic_write(path, [ENTROPY_MAGIC, table], self.overwrite)
        return Cached(_read_entropy(path, cfg.window, sp.value.label), digest, path, False)


ENTROPY_MAGIC = b"BQENT1\0\0"


def _read_entropy(path, window: int, label: str) -> B.EntropySpectrum:
    """Entropy-spectrum cache: magic[8], then six little-endian f8 rows (levels,
    energies, S_eig, S_berry, captured, captured_berry)."""
    raw = Path(path).read_bytes()
    if raw[:8] != ENTROPY_MAGIC:
        raise ValueError(f"{path}: not an entropy-spectrum cache")
    t = np.frombuffer(raw[8:], dtype="<f8").reshape(6, -1)
    return B.EntropySpectrum(t[0].astype(int), t[1].copy(), t[2].copy(), t[3].copy(), t[4].copy(), t[5].copy(),
                             window, label)


def _manifest(command: str, cfg: ExperimentConfig) -> RunManifest:
    return RunManifest(command, cfg.key, seed=cfg.seed)


# ---------------------------------------------------------------------------
# solve / verify / wannier


def validate(spec: SpectralDecomposition, b: float, a: float) -> ValidationReport:
    geom = build_geometry(b, a, *spec.grid.shape)
    return verify_spectrum(spec, geom.area, geom.perimeter)


@dataclass
class SolveResult:
    cached: Cached
    report: ValidationReport
    manifest: RunManifest


def run_solve(cfg: ExperimentConfig, store: Store) -> SolveResult:
    m = _manifest("solve", cfg)
    c = store.ripple(cfg)
    m.record_cache("spectrum", c.digest)
    report = validate(c.value, cfg.b, cfg.a)
    m.extra = {"cache_hit": c.hit, "path": str(c.path), "ok": report.ok,
               "max_weyl_deviation_20_100": report.max_weyl_deviation(20.0, 100.0)}
    return SolveResult(c, report, m)


# ---------------------------------------------------------------------------
# Fig. 3: four dynamics


CASE_TITLES = {"a": "integrable states, integrable energies", "b": "integrable states, chaotic energies",
               "c": "chaotic states, integrable energies", "d": "chaotic states, chaotic energies"}


@dataclass
class Fig3Result:
    series: dict
    summary: list
    recurrence: float
    revival_time: float
    coefficients: dict
    manifest: RunManifest

    def row(self, case: str) -> dict:
        return next(r for r in self.summary if r["case"] == case)


SUMMARY_COLUMNS = ["case", "eigenstate_source", "energy_source", "T", "S0", "plateau_mean", "plateau_std",
                   "early_std", "revival_depth", "revival_time", "revival_multiple", "min_captured"]


def run_fig3(cfg: ExperimentConfig, store: Store, out_dir: Path | None = None) -> Fig3Result:
    m = _manifest("fig3", cfg)
    rp = store.ripple(cfg)
    sq = store.square_on(cfg, rp.value, rp.digest)
    bs = store.basis(cfg, rp.value.grid)
    for name, c in (("ripple", rp), ("square", sq), ("wannier", bs)):
        m.record_cache(name, c.digest)
    spectra = {"integrable": sq.value, "chaotic": rp.value}
    basis: WannierBasis = bs.value
    packets = {"integrable": D.GaussianPacket((0.0, cfg.b), cfg.sigma, (cfg.kx_square, cfg.ky)),
               "chaotic": D.GaussianPacket((0.0, cfg.b), cfg.sigma, (cfg.kx_ripple, cfg.ky))}
    coeffs = {s: D.expand_initial(packets[s], spectra[s], force=cfg.force_capture) for s in D.SOURCES}
    T = {"integrable": D.characteristic_time(cfg.b, cfg.kx_square),
         "chaotic": D.characteristic_time(2.0 * cfg.b, cfg.kx_ripple)}
    t_rev = D.square_revival_time(cfg.b)
    series = {}
    for source in D.SOURCES:
        W = D.overlap_matrix(spectra[source], basis)
        for case, (es, en) in D.CASES.items():
            if es != source:
                continue
            burst = t_rev / 2.0 if (cfg.revival_burst and en == "integrable") else None
            times = D.sample_times(T[es], cfg.n_samples, cfg.span, revival_period=burst)
            series[case] = D.entropy_series(coeffs[es], D.make_case(spectra, case), times, basis, W, T=T[es])
        del W
    period = D.estimate_recurrence(series["a"])
    summary = []
    for case in "abcd":
        s = series[case]
        mean, std = D.fluctuation_metric(s, D.plateau_window(s, cfg.plateau_start, cfg.span))
        _, early = D.fluctuation_metric(s, (0.0, 10.0 * s.T))
        rev = D.revival_metric(s, period) if math.isfinite(period) else D.RevivalResult(math.nan, math.nan, 0, mean)
        es, en = D.CASES[case]
        summary.append({"case": case, "eigenstate_source": es, "energy_source": en, "T": s.T,
                        "S0": float(s.entropy[0]), "plateau_mean": mean, "plateau_std": std, "early_std": early,
                        "revival_depth": rev.depth, "revival_time": rev.time, "revival_multiple": rev.multiple,
                        "min_captured": float(s.captured.min())})
    m.extra = {"recurrence_period": period, "square_revival_time": t_rev,
               "expansion_capture": {k: v.captured for k, v in coeffs.items()},
               "expansion_flagged": {k: v.flagged for k, v in coeffs.items()}}
    res = Fig3Result(series, summary, period, t_rev, coeffs, m)
    if out_dir is not None:
        write_fig3(res, Path(out_dir))
    return res


def write_fig3(res: Fig3Result, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    h = res.manifest.hash
    for case, s in res.series.items():
        p = out / f"fig3_case_{case}.csv"
        s.to_csv(p, h)
        res.manifest.outputs.append(p.name)
    write_csv(out / "fig3_summary.csv", SUMMARY_COLUMNS, ([r[c] for c in SUMMARY_COLUMNS] for r in res.summary), h)
    panels = []
    for case in "abcd":
        s = res.series[case]
        panels.append(svg.LinePanel(f"({case}) {CASE_TITLES[case]}", "t / T", "S_w").add(s.times / s.T, s.entropy))
    svg.render(panels, out / "fig3.svg")
    res.manifest.outputs += ["fig3_summary.csv", "fig3.svg"]
    res.manifest.write(out)


# ---------------------------------------------------------------------------
# Fig. 5: entropy spectra across the family


@dataclass
class Fig5Result:
    spectra: dict
    curve: B.FluctuationCurve
    gaps: dict
    scar_threshold: float
    scar_fractions: dict
    manifest: RunManifest


def run_fig5(cfg: ExperimentConfig, store: Store, out_dir: Path | None = None,
             ratios: tuple[float, ...] | None = None) -> Fig5Result:
    m = _manifest("fig5", cfg)
    ratios = tuple(cfg.family if ratios is None else ratios)
    family = {}
    for r in ratios:
        try:
            c = store.entropy_spectrum(cfg, r)
        except FileNotFoundError as exc:
            log.warning("a/b=%g missing: %s", r, exc)
            family[r] = None
            continue
        m.record_cache(f"entropy_{r:g}", c.digest)
        family[r] = c.value
    levels = tuple(cfg.levels)
    curve = B.fluctuation_vs_ratio(family, levels, cfg.estimator)
    gaps = {r: (B.smoothed_berry_gap(s, levels) if s is not None else math.nan) for r, s in family.items()}
    fractions = {r: (B.scar_fraction(s, cfg.scar_threshold, levels) if s is not None else math.nan)
                 for r, s in family.items()}
    m.extra = {"scar_threshold": cfg.scar_threshold, "missing": list(curve.missing)}
    res = Fig5Result(family, curve, gaps, cfg.scar_threshold, fractions, m)
    if out_dir is not None:
        write_fig5(res, Path(out_dir), levels)
    return res


def write_fig5(res: Fig5Result, out: Path, levels: tuple[int, int]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    h = res.manifest.hash
    panels = []
    for r, s in res.spectra.items():
        if s is None:
            continue
        name = f"fig5_spectrum_{r:g}.csv"
        s.to_csv(out / name, h, res.scar_threshold)
        res.manifest.outputs.append(name)
        panels.append(svg.LinePanel(f"a/b = {r:g}", "level n", "S_w")
                      .add(s.levels, s.s_eig, svg.PALETTE[0], "eigenstates")
                      .add(s.levels, s.s_berry, svg.PALETTE[1], "Berry")
                      .add(s.levels, s.smoothed, svg.PALETTE[2], "30-level average"))
    res.curve.to_csv(out / "fig5_fluctuation.csv", h)
    rows = []
    for r, s in res.spectra.items():
        flagged = ""
        if s is not None and 857 in s.levels:
            flagged = int(B.scar_flags(s, res.scar_threshold)[s.at(857)])
        rows.append([r, res.scar_threshold, res.scar_fractions[r], res.gaps[r], flagged])
    write_csv(out / "fig5_scars.csv", ["a_over_b", "threshold", "scar_fraction", "mean_gap_smoothed_berry",
                                       "level_857_flagged"], rows, h)
    ok = [(r, v) for r, v in zip(res.curve.ratios, res.curve.values) if not math.isnan(v)]
    panels.append(svg.LinePanel("fluctuation vs a/b", "a/b", "mean |S_w - smoothed|")
                  .add([r for r, _ in ok], [v for _, v in ok]))
    svg.render(panels, out / "fig5.svg", cols=3)
    res.manifest.outputs += ["fig5_fluctuation.csv", "fig5_scars.csv", "fig5.svg"]
    res.manifest.write(out)


# ---------------------------------------------------------------------------
# Fig. 4: eigenstates 1000 and 857 against a Berry state


@dataclass
class Fig4Result:
    states: dict
    distributions: dict
    entropies: dict
    captured: dict
    basis: WannierBasis
    grid: object
    manifest: RunManifest


def run_fig4(cfg: ExperimentConfig, store: Store, out_dir: Path | None = None,
             levels: tuple[int, int] = (1000, 857)) -> Fig4Result:
    m = _manifest("fig4", cfg)
    rp = store.ripple(cfg)
    bs = store.basis(cfg, rp.value.grid)
    m.record_cache("ripple", rp.digest)
    m.record_cache("wannier", bs.digest)
    spec, basis = rp.value, bs.value
    ref = levels[0]
    bspec = B.BerryEnsembleSpec(k=math.sqrt(spec.energies[ref - 1]), n_components=cfg.berry_components,
                                seed=cfg.seed, level=ref, mode=cfg.berry_mode)
    states = {f"eigenstate_{n}": np.array(spec.states[n - 1]) for n in levels}
    states[f"berry_{ref}"] = B.sample_berry_state(bspec, spec.grid)
    P = project_many(np.stack(list(states.values())), spec.grid, basis)
    dists = dict(zip(states, P))
    ents = {k: entropy(p) for k, p in dists.items()}
    caps = {k: float(p.sum()) for k, p in dists.items()}
    m.extra = {"entropies": ents, "captured": caps}
    res = Fig4Result(states, dists, ents, caps, basis, spec.grid, m)
    if out_dir is not None:
        write_fig4(res, Path(out_dir))
    return res


def write_fig4(res: Fig4Result, out: Path, j_y: int = 5, j_ky: int = 0) -> None:
    out.mkdir(parents=True, exist_ok=True)
    h = res.manifest.hash
    write_csv(out / "fig4_entropies.csv", ["state", "S_w", "captured_norm"],
              ([k, res.entropies[k], res.captured[k]] for k in res.states), h)
    g = res.grid
    panels = []
    px = res.basis.bx.params
    for k, psi in res.states.items():
        panels.append(svg.HeatmapPanel(f"{k}: |psi(x, y)|^2", svg.downsample(np.abs(psi) ** 2),
                                       (g.x[0], g.x[-1], g.y[0], g.y[-1]), "x", "y"))
    for k, psi in res.states.items():
        kx, ky, dens = B.momentum_density(psi, g)
        sel_x = np.abs(kx) <= 30
        sel_y = np.abs(ky) <= 30
        panels.append(svg.HeatmapPanel(f"{k}: |psi(k)|^2", svg.downsample(dens[np.ix_(sel_x, sel_y)]),
                                       (kx[sel_x][0], kx[sel_x][-1], ky[sel_y][0], ky[sel_y][-1]), "k_x", "k_y"))
    rows = []
    for k, p in res.distributions.items():
        sl = B.phase_space_slice(p, res.basis, j_y, j_ky)
        panels.append(svg.HeatmapPanel(f"{k}: p(j_x, j_kx) at j_y={j_y}, j_ky={j_ky}", sl,
                                       (px.j_pos[0] - 0.5, px.j_pos[1] + 0.5, px.j_mom[0] - 0.5, px.j_mom[1] + 0.5),
                                       "j_x", "j_kx"))
        for (ix, jx) in enumerate(px.positions):
            for (ik, jk) in enumerate(px.momenta):
                rows.append([k, int(jx), int(jk), float(sl[ix, ik])])
    write_csv(out / "fig4_phase_slice.csv", ["state", "j_x", "j_kx", "p"], rows, h)
    svg.render(panels, out / "fig4.svg", cols=3, panel_size=(300, 260))
    res.manifest.outputs += ["fig4_entropies.csv", "fig4_phase_slice.csv", "fig4.svg"]
    res.manifest.write(out)


# ---------------------------------------------------------------------------
# Fig. 2: oscillator demo


def run_fig2(cfg: ExperimentConfig, out_dir: Path | None = None):
    m = _manifest("fig2", cfg)
    demo = oscillator_demo(HarmonicOscillatorSpec(n=cfg.ho_level))
    m.extra = {"oscillator": demo.spec.as_dict(), "captured": demo.captured, "entropy": demo.entropy,
               "ring_fraction": demo.ring_fraction(), "parity_defect": demo.parity_defect()}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        px = demo.basis.params
        rows = [[int(jx), int(jk), float(demo.p[i, j])] for i, jx in enumerate(px.positions)
                for j, jk in enumerate(px.momenta)]
        write_csv(out / "fig2.csv", ["j_x", "j_k", "p"], rows, m.hash)
        panel = svg.HeatmapPanel(f"oscillator level {demo.spec.n} in phase space", demo.p,
                                 (px.j_pos[0] - 0.5, px.j_pos[1] + 0.5, px.j_mom[0] - 0.5, px.j_mom[1] + 0.5),
                                 "j_x", "j_k", circle=(0.0, 0.0, demo.spec.radius_cells))
        svg.render([panel], out / "fig2.svg", cols=1, panel_size=(360, 360))
        m.outputs += ["fig2.csv", "fig2.svg"]
        m.write(out)
    return demo, m
