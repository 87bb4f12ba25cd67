"""On-disk caches for spectra and Wannier factors.

Spectra (``BQSPEC1``), little-endian:
    magic[8] b a (f8) n_x n_y n_eig (u4) dx dy (f8)
    E[n_eig] (f8), phi[n_eig, n_x, n_y] (f8, row-major)
    x[n_x] y[n_y] (f8), mask[n_x, n_y] (u1), meta_len (u4), meta (JSON, UTF-8)

Wannier factors (``BQWAN1``), little-endian:
    magic[8] meta_len (u4) meta (JSON: lattice params, node spec, shapes)
    x functions (c16, nodes x cells, row-major), y functions (same),
    x nodes (f8), y nodes (f8)

Files are keyed by a hash of the inputs that determine them and written
atomically under a lock.  Existing files are never modified in place.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np
from filelock import FileLock

from .phasespace import Wannier1D, WannierBasis, WannierLatticeParams
from .spectral import Grid, SpectralDecomposition

SPEC_MAGIC = b"BQSPEC1\0"
WAN_MAGIC = b"BQWAN1\0\0"
_SPEC_HEAD = struct.Struct("<8sddIIIdd")
CACHE_ENV = "RIPPLE_ENTROPY_CACHE"
FORMAT_VERSION = 1


class CacheCollision(RuntimeError):
    """A cache entry exists for the same key but with different content."""


def cache_dir(path: str | os.PathLike | None = None) -> Path:
    d = Path(path or os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "ripple_entropy")
    d.mkdir(parents=True, exist_ok=True)
    return d


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"not serializable: {type(o)}")


def content_key(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 22), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path: Path, chunks, overwrite: bool) -> str:
    """Write ``chunks`` to ``path`` via a temporary file; returns the content hash.

    An existing file with identical content is left alone; one with different
    content raises ``CacheCollision`` unless ``overwrite``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(path) + ".lock"):
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        h = hashlib.sha256()
        with open(tmp, "wb") as fh:
            for c in chunks:
                b = c if isinstance(c, (bytes, bytearray)) else memoryview(np.ascontiguousarray(c)).cast("B")
                h.update(b)
                fh.write(b)
        digest = h.hexdigest()
        if path.exists():
            if file_hash(path) == digest:
                tmp.unlink()
                return digest
            if not overwrite:
                tmp.unlink()
                raise CacheCollision(f"{path} exists with different content; pass overwrite to replace it")
        os.replace(tmp, path)
    return digest


# ---------------------------------------------------------------------------
# spectra


def spectrum_key(kind: str, b: float, a: float, n_x: int, n_y: int, n_eig: int, solver: dict | None = None,
                 extra: dict | None = None) -> str:
    return content_key({"format": FORMAT_VERSION, "kind": kind, "b": float(b), "a": float(a), "n_x": int(n_x),
                        "n_y": int(n_y), "n_eig": int(n_eig), "solver": solver or {}, "extra": extra or {}})


def write_spectrum(path, spec: SpectralDecomposition, b: float, a: float, overwrite: bool = False) -> str:
    g = spec.grid
    n_x, n_y = g.shape
    meta = json.dumps({"label": spec.label, "meta": spec.meta}, sort_keys=True, default=_jsonable).encode()
    chunks = [
        _SPEC_HEAD.pack(SPEC_MAGIC, float(b), float(a), n_x, n_y, spec.n_eig, g.dx, g.dy),
        np.asarray(spec.energies, dtype="<f8"),
        np.asarray(spec.states, dtype="<f8"),
        np.asarray(g.x, dtype="<f8"),
        np.asarray(g.y, dtype="<f8"),
        np.asarray(g.mask, dtype="u1"),
        struct.pack("<I", len(meta)),
        meta,
    ]
    return _atomic_write(Path(path), chunks, overwrite)


def read_spectrum(path, mmap: bool = True) -> SpectralDecomposition:
    """Load a ``BQSPEC1`` file; fields are memory-mapped read-only by default."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic, b, a, n_x, n_y, n_eig, dx, dy = _SPEC_HEAD.unpack(fh.read(_SPEC_HEAD.size))
        if magic != SPEC_MAGIC:
            raise ValueError(f"{path}: not a spectrum cache (magic {magic!r})")
        energies = np.frombuffer(fh.read(8 * n_eig), dtype="<f8").copy()
        off = _SPEC_HEAD.size + 8 * n_eig
        size = n_eig * n_x * n_y
        fh.seek(off + 8 * size)
        x = np.frombuffer(fh.read(8 * n_x), dtype="<f8").copy()
        y = np.frombuffer(fh.read(8 * n_y), dtype="<f8").copy()
        mask = np.frombuffer(fh.read(n_x * n_y), dtype="u1").reshape(n_x, n_y).astype(bool)
        (mlen,) = struct.unpack("<I", fh.read(4))
        info = json.loads(fh.read(mlen).decode())
    if mmap:
        states = np.memmap(path, dtype="<f8", mode="r", offset=off, shape=(n_eig, n_x, n_y))
    else:
        states = np.fromfile(path, dtype="<f8", count=size, offset=off).reshape(n_eig, n_x, n_y)
    grid = Grid(x, y, mask)
    return SpectralDecomposition(energies, states, grid, info["label"], info["meta"])


# ---------------------------------------------------------------------------
# Wannier factors


def wannier_key(bx: Wannier1D | dict, by: Wannier1D | dict | None = None, **build) -> str:
    def spec(f):
        return f if isinstance(f, dict) else {"params": f.params.as_dict(),
                                              "nodes": [float(f.nodes[0]), f.h, int(f.nodes.size)]}
    return content_key({"format": FORMAT_VERSION, "x": spec(bx), "y": spec(by) if by is not None else None,
                        "build": build})


def write_wannier(path, basis: WannierBasis, overwrite: bool = False) -> str:
    def desc(f: Wannier1D):
        return {"params": f.params.as_dict(), "nodes": [float(f.nodes[0]), f.h, int(f.nodes.size)],
                "shape": list(f.functions.shape), "condition": f.condition, "periodic": f.periodic}
    meta = json.dumps({"x": desc(basis.bx), "y": desc(basis.by)}, sort_keys=True).encode()
    chunks = [WAN_MAGIC, struct.pack("<I", len(meta)), meta,
              np.asarray(basis.bx.functions, dtype="<c16"), np.asarray(basis.by.functions, dtype="<c16"),
              np.asarray(basis.bx.nodes, dtype="<f8"), np.asarray(basis.by.nodes, dtype="<f8")]
    return _atomic_write(Path(path), chunks, overwrite)


def read_wannier(path) -> WannierBasis:
    with open(path, "rb") as fh:
        if fh.read(8) != WAN_MAGIC:
            raise ValueError(f"{path}: not a Wannier cache")
        (mlen,) = struct.unpack("<I", fh.read(4))
        info = json.loads(fh.read(mlen).decode())
        parts = []
        for axis in ("x", "y"):
            d = info[axis]
            p = d["params"]
            params = WannierLatticeParams(p["x0"], p["k0"], p["zeta"], tuple(p["j_pos"]), tuple(p["j_mom"]),
                                          p["origin"])
            rows, cols = d["shape"]
            funcs = np.frombuffer(fh.read(16 * rows * cols), dtype="<c16").reshape(rows, cols).copy()
            parts.append((params, funcs, d))
        factors = []
        for params, funcs, d in parts:
            nodes = np.frombuffer(fh.read(8 * funcs.shape[0]), dtype="<f8").copy()
            jp, jm = np.meshgrid(params.positions, params.momenta, indexing="ij")
            factors.append(Wannier1D(params, nodes, funcs, np.stack([jp.ravel(), jm.ravel()], axis=1),
                                     d["condition"], d["periodic"]))
    return WannierBasis(*factors)
