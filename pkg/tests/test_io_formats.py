import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from kinirl import io_formats as io
from kinirl.errors import ArgumentError, ConfigError, FormatError
from kinirl.irl_trainer import TrainConfig
from kinirl.reward_net import FcnParams, init_params
from kinirl.trajectory import Trajectory

DATA = Path(__file__).parent / "data"


def test_grid_byte_layout_2x2x1():
    data = io.encode_grid(np.array([[0.0, 1.0], [2.0, 3.0]]))
    header = b"KIRLGRD1\n2 2 1\n"
    assert len(header) == 15
    assert data == header + struct.pack("<4d", 0.0, 1.0, 2.0, 3.0)
    assert len(data) == 15 + 32
    assert (DATA / "golden_2x2x1.grid").read_bytes() == data


def test_grid_channel_major_order():
    g = np.arange(12, dtype=float).reshape(3, 2, 2)
    payload = io.encode_grid(g)[len(b"KIRLGRD1\n2 2 3\n"):]
    assert struct.unpack("<12d", payload) == tuple(range(12))


@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_grid_roundtrip_bitwise(g):
    back = io.decode_grid(io.encode_grid(g))
    assert back.tobytes() == g.astype("<f8").tobytes() and back.shape == g.shape


def test_grid_file_roundtrip(tmp_path):
    g = np.random.default_rng(0).normal(size=(3, 5, 4))
    io.write_grid(tmp_path / "a.grid", g)
    assert np.array_equal(io.read_grid(tmp_path / "a.grid"), g)


def test_grid_rejects_bad_input():
    good = io.encode_grid(np.ones((2, 2)))
    with pytest.raises(FormatError, match="byte 0"):
        io.decode_grid(b"KIRLGRD2\n" + good[9:])
    with pytest.raises(FormatError, match="expected 47 bytes total, got 40"):
        io.decode_grid(good[:40])
    with pytest.raises(FormatError, match="trailing"):
        io.decode_grid(good + b"\0")
    with pytest.raises(FormatError, match="overflow"):
        io.decode_grid(b"KIRLGRD1\n100000 100000 100\n")
    with pytest.raises(FormatError, match="malformed"):
        io.decode_grid(b"KIRLGRD1\n2 x 1\n" + good[15:])
    nan = good[:15] + struct.pack("<d", np.nan) + good[23:]
    with pytest.raises(FormatError, match="byte 15"):
        io.decode_grid(nan)
    with pytest.raises(ArgumentError):
        io.encode_grid(np.array([[np.inf]]))


def test_traj_golden_and_roundtrip(tmp_path):
    traj = Trajectory.from_records([(5, 0, 0, 0), (5, 1, 0, 1), (4, 2, 1, -1)])
    assert io.read_traj(DATA / "golden.traj") == traj
    io.write_traj(tmp_path / "t.traj", traj)
    assert (tmp_path / "t.traj").read_text() == (DATA / "golden.traj").read_text()


def test_traj_rejects_malformed(tmp_path):
    p = tmp_path / "bad.traj"
    p.write_text("t,row,col,heading,action\n")
    with pytest.raises(FormatError, match="line 1"):
        io.read_traj(p)
    p.write_text("t,row,col,orientation,action\n1,0,0,0,0\n3,0,1,0,-1\n")
    with pytest.raises(FormatError, match="line 3"):
        io.read_traj(p)
    p.write_text("t,row,col,orientation,action\n1,0,x,0,0\n")
    with pytest.raises(FormatError, match="line 2"):
        io.read_traj(p)


def test_model_byte_layout():
    p = FcnParams((np.array([0.5, 1.5]).reshape(2, 1, 1, 1),), (np.array([-1.0, 0.25]),))
    expected = (b"KIRLFCN1" + struct.pack("<I", 1) + struct.pack("<4I", 2, 1, 1, 1)
                + struct.pack("<2d", 0.5, 1.5) + struct.pack("<2d", -1.0, 0.25))
    assert io.encode_model(p) == expected
    assert (DATA / "golden_tiny.fcn").read_bytes() == expected


def test_model_roundtrip(tmp_path):
    p = init_params(3)
    io.save_model(tmp_path / "m.fcn", p)
    q = io.load_model(tmp_path / "m.fcn")
    assert all(a.tobytes() == b.tobytes() for a, b in zip(p.arrays(), q.arrays()))


def test_model_rejects_truncation_and_magic():
    data = io.encode_model(init_params(0))
    with pytest.raises(FormatError, match="truncated"):
        io.decode_model(data[:-3])
    with pytest.raises(FormatError, match="magic"):
        io.decode_model(b"KIRLFCN0" + data[8:])
    with pytest.raises(FormatError, match="trailing"):
        io.decode_model(data + b"\0")


def _read_pgm(path):
    raw = Path(path).read_bytes()
    head, _, rest = raw.partition(b"\n255\n")
    magic, dims = head.split(b"\n")
    w, h = (int(x) for x in dims.split())
    assert magic == b"P5"
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w)


def test_pgm_ramp(tmp_path):
    ramp = np.arange(9, dtype=float).reshape(3, 3)
    px = io.export_pgm(ramp, tmp_path / "r.pgm", 0.0, 8.0)
    # floor(255 * k / 8 + 0.5)
    assert px.ravel().tolist() == [0, 32, 64, 96, 128, 159, 191, 223, 255]
    assert np.array_equal(_read_pgm(tmp_path / "r.pgm"), px)


def test_pgm_constant_and_full_range(tmp_path):
    px = io.export_pgm(np.full((4, 5), 2.0), tmp_path / "c.pgm", 0.0, 4.0)
    assert np.all(px == px[0, 0])
    g = np.random.default_rng(0).normal(size=(6, 6))
    px = io.export_pgm(g, tmp_path / "f.pgm", g.min(), g.max())
    assert px.min() == 0 and px.max() == 255
    px = io.export_pgm(np.array([[-10.0, 10.0]]), tmp_path / "k.pgm", 0.0, 1.0)
    assert px.tolist() == [[0, 255]]
    with pytest.raises(ArgumentError):
        io.export_pgm(g, tmp_path / "x.pgm", 1.0, 1.0)


def test_config_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = io.load_config(p)
    assert cfg == TrainConfig()
    assert (cfg.K, cfg.T, cfg.lr, cfg.batch_size, cfg.lr_decay) == (150, 120, 1e-4, 5, 0.99)


def test_config_values_and_comments(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("# run\niterations = 10\ngamma=0.9  # discount\nbehavior=E3\nlr=3e-4\n")
    cfg = io.load_config(p)
    assert (cfg.iterations, cfg.gamma, cfg.behavior, cfg.lr) == (10, 0.9, "E3", 3e-4)


@pytest.mark.parametrize("text,match", [
    ("gamma=1.5\n", "gamma"),
    ("gamma=1.0\n", "gamma"),
    ("lr=1e-4\nlr=2e-4\n", "duplicate"),
    ("epochs=3\n", "unknown key 'epochs'"),
    ("iterations=ten\n", ":1: malformed value for 'iterations'"),
    ("batch_size=0\n", "batch_size"),
    ("lr_decay=1.5\n", "lr_decay"),
    ("just words\n", "key=value"),
])
def test_config_errors(tmp_path, text, match):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError, match=match):
        io.load_config(p)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        io.load_config(tmp_path / "nope.cfg")
