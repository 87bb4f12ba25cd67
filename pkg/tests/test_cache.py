import struct

import numpy as np
import pytest

from ripple_entropy.cache import (SPEC_MAGIC, CacheCollision, cache_dir, content_key, file_hash, read_spectrum,
                                  read_wannier, spectrum_key, write_spectrum, write_wannier)
from ripple_entropy.phasespace import WannierLatticeParams, build_wannier_1d, build_wannier_2d
from ripple_entropy.spectral import solve_square


@pytest.fixture(scope="module")
def square():
    return solve_square(5.5, 12)


def test_spectrum_round_trip_is_bit_exact(tmp_path, square):
    p = tmp_path / "s.bqspec"
    digest = write_spectrum(p, square, 2.75, 0.0)
    assert digest == file_hash(p)
    for mmap in (True, False):
        back = read_spectrum(p, mmap=mmap)
        assert back.energies.tobytes() == square.energies.tobytes()
        assert np.asarray(back.states).tobytes() == np.asarray(square.states).tobytes()
        assert back.grid.x.tobytes() == square.grid.x.tobytes()
        assert np.array_equal(back.grid.mask, square.grid.mask)
        assert back.label == square.label and back.meta["modes"] == square.meta["modes"]


def test_spectrum_header_layout(tmp_path, square):
    p = tmp_path / "s.bqspec"
    write_spectrum(p, square, 2.75, 0.0)
    head = struct.unpack("<8sddIIIdd", p.read_bytes()[:struct.calcsize("<8sddIIIdd")])
    assert head[0] == SPEC_MAGIC
    assert head[1:3] == (2.75, 0.0)
    assert head[3:6] == (*square.grid.shape, 12)


def test_rewrite_with_same_content_is_noop(tmp_path, square):
    p = tmp_path / "s.bqspec"
    d1 = write_spectrum(p, square, 2.75, 0.0)
    mtime = p.stat().st_mtime_ns
    assert write_spectrum(p, square, 2.75, 0.0) == d1
    assert p.stat().st_mtime_ns == mtime


def test_collision_refused_without_overwrite(tmp_path, square):
    p = tmp_path / "s.bqspec"
    write_spectrum(p, square, 2.75, 0.0)
    other = solve_square(5.5, 11)
    with pytest.raises(CacheCollision):
        write_spectrum(p, other, 2.75, 0.0)
    assert read_spectrum(p).n_eig == 12
    write_spectrum(p, other, 2.75, 0.0, overwrite=True)
    assert read_spectrum(p).n_eig == 11
    assert not list(tmp_path.glob("*.tmp*"))


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "junk"
    p.write_bytes(b"\0" * 200)
    with pytest.raises(ValueError, match="magic"):
        read_spectrum(p)
    with pytest.raises(ValueError):
        read_wannier(p)


def test_wannier_round_trip(tmp_path):
    x = np.arange(-5 * 32, 5 * 32 + 1) / 32.0
    f = build_wannier_1d(WannierLatticeParams(j_pos=(-1, 1), j_mom=(-2, 2)), x)
    basis = build_wannier_2d(f, f)
    p = tmp_path / "w.bqwan"
    write_wannier(p, basis)
    back = read_wannier(p)
    assert back.bx.functions.tobytes() == f.functions.tobytes()
    assert back.by.nodes.tobytes() == f.nodes.tobytes()
    assert back.size == basis.size and back.bx.params == f.params


def test_keys_are_stable_and_input_sensitive():
    k1 = spectrum_key("ripple", 5.5, 0.55, 180, 180, 1300, {"cutoff": 1.5})
    assert k1 == spectrum_key("ripple", 5.5, 0.55, 180, 180, 1300, {"cutoff": 1.5})
    assert k1 != spectrum_key("ripple", 5.5, 0.55, 180, 180, 1200, {"cutoff": 1.5})
    assert content_key({"a": 1, "b": 2}) == content_key({"b": 2, "a": 1})


def test_cache_dir_honours_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RIPPLE_ENTROPY_CACHE", str(tmp_path / "c"))
    assert cache_dir() == tmp_path / "c" and (tmp_path / "c").is_dir()
