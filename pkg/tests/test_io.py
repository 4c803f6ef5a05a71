import numpy as np
import pytest

from emwf import io, make_grid, states
from emwf.dynamics import evolve
from emwf.potentials import harmonic


def test_field_roundtrip_complex_and_real(tmp_path):
    a = np.arange(24, dtype=float).reshape(2, 3, 4) + 1j
    io.write_field(tmp_path / "a.bin", a, [1.0, 2.0, 3.0])
    b, ext = io.read_field(tmp_path / "a.bin")
    assert np.array_equal(a, b) and ext == (1.0, 2.0, 3.0)
    r = np.linspace(0, 1, 8)
    io.write_field(tmp_path / "r.bin", r, [5.0])
    assert np.array_equal(io.read_field(tmp_path / "r.bin")[0], r)


def test_field_header_layout(tmp_path):
    io.write_field(tmp_path / "a.bin", np.ones(8, complex), [2.5])
    raw = (tmp_path / "a.bin").read_bytes()
    assert raw[:8] == b"EMWF0001"
    assert len(raw) == 64 + 8 * 16
    assert np.frombuffer(raw, "<f8", offset=64)[:2].tolist() == [1.0, 0.0]  # interleaved re/im


def test_field_rejects_too_many_axes(tmp_path):
    with pytest.raises(ValueError):
        io.write_field(tmp_path / "x.bin", np.ones((2,) * 5), [1.0] * 5)


def test_field_bad_magic(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"X" * 80)
    with pytest.raises(ValueError):
        io.read_field(tmp_path / "x.bin")


def test_csv_floats_roundtrip(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, -2.5e17]
    io.write_csv(tmp_path / "a.csv", ["v"], ([v] for v in vals))
    _, data = io.read_csv(tmp_path / "a.csv")
    assert data[:, 0].tolist() == vals


def test_record_roundtrip(tmp_path):
    g = make_grid(1, 20.0, 128)
    rec = evolve(states.coherent(g, 1.0, 1.0), harmonic(1.0), 0.05, 1e-3, 10)
    io.write_record(rec, tmp_path / "rec", snapshots=True)
    back = io.read_record(tmp_path / "rec")
    assert np.array_equal(back.times, rec.times)
    assert np.array_equal(back.positions, rec.positions)
    assert np.array_equal(back.snapshots, rec.snapshots)
    header = (tmp_path / "rec" / "expectations.csv").read_text().splitlines()[0]
    assert header == "t,x0,p0,E"
