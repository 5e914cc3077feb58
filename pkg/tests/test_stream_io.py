import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pushframe.errors import DigestMismatchError, FormatError
from pushframe.forward import FrameStack, IlluminationField, OpticsConfig, simulate, \
    white_calibration
from pushframe.frames import StoredFrameStack, save_frame_stack
from pushframe.pattern import scramble, sylvester
from pushframe.recon import correct_2d, reconstruct
from pushframe.scene import synthetic
from pushframe.stream import (MeasurementStream, ReconImage, load_calibration, load_raw,
                              load_recon, load_stream, parse_kv, raw_dumps, raw_loads,
                              save_calibration, save_raw, save_recon, save_stream,
                              stream_from_csv, stream_to_csv)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 3), st.data())
def test_stream_csv_round_trip_is_exact(n, W, C, data):
    arr = data.draw(arrays(np.float64, (W + n - 1, n, C), elements=finite))
    s = MeasurementStream(arr, W, "abc", "def", "differential", 0.125, ("flatfield",))
    back = stream_from_csv(stream_to_csv(s))
    assert back.data.tobytes() == s.data.tobytes()
    assert (back.width, back.pattern_digest, back.config_digest, back.readout,
            back.step_error, back.corrections) == (W, "abc", "def", "differential", 0.125,
                                                   ("flatfield",))


def test_stream_csv_header(tmp_path):
    p = scramble(sylvester(8), 1)
    s = simulate(synthetic("texture", 8, 5), p)
    path = tmp_path / "s.csv"
    save_stream(s, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "PUSHFRAME-STREAM 1"
    assert lines[1].split(",")[:6] == ["n", "W", "T", "C", "pattern_digest", "config_digest"]
    assert lines[2].split(",")[:4] == ["8", "5", "12", "1"]
    assert len(lines) == 4 + 12
    assert load_stream(path).data.tobytes() == s.data.tobytes()


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace("PUSHFRAME-STREAM 1", "STREAM"),
    lambda t: t.replace("pattern_digest", "digest"),
    lambda t: "\n".join(t.splitlines()[:-1]) + "\n",
    lambda t: t.replace("\n0,0,", "\n0,0,x", 1),
    lambda t: t.replace("\n1,0,", "\n2,0,", 1),
])
def test_malformed_stream_csv(mutate):
    s = MeasurementStream(np.ones((3, 2, 1)), 2, "a", "b")
    with pytest.raises(FormatError):
        stream_from_csv(mutate(stream_to_csv(s)))


def test_stream_rejects_wrong_length():
    with pytest.raises(ValueError):
        MeasurementStream(np.ones((4, 2, 1)), 2, "a", "b")


@given(arrays(np.float64, st.tuples(st.integers(0, 3), st.integers(1, 4)), elements=finite))
def test_raw_round_trip(arr):
    back = raw_loads(raw_dumps(arr))
    assert back.shape == arr.shape and back.tobytes() == arr.tobytes()


def test_raw_header_and_errors(tmp_path):
    blob = raw_dumps(np.zeros((2, 3)))
    assert blob.startswith(b"PUSHFRAME-RAW 1 2 3\n")
    with pytest.raises(FormatError):
        raw_loads(blob[:-1])
    with pytest.raises(FormatError):
        raw_loads(b"RAW 2\n" + bytes(16))
    save_raw(np.arange(4.0), tmp_path / "a.raw")
    assert load_raw(tmp_path / "a.raw").tolist() == [0, 1, 2, 3]


def test_parse_kv():
    kv = parse_kv("MAGIC\n# comment\na = 1\n b.c = x y # trailing\n\n", "MAGIC")
    assert kv == {"a": "1", "b.c": "x y"}
    with pytest.raises(FormatError):
        parse_kv("MAGIC\nnot a pair\n", "MAGIC")
    with pytest.raises(FormatError):
        parse_kv("OTHER\n", "MAGIC")


def test_calibration_round_trip(tmp_path):
    p = scramble(sylvester(16), 2)
    cfg = OpticsConfig(supersample=2, blur_sigma=0.4,
                       illumination=IlluminationField.vignette_field(floor=0.7))
    calib = white_calibration(p, cfg, channels=3)
    path = tmp_path / "c.txt"
    save_calibration(calib, path)
    back = load_calibration(path)
    assert back.weights.tobytes() == calib.weights.tobytes()
    assert back.reference.tobytes() == calib.reference.tobytes()
    assert back.white_frame.tobytes() == calib.white_frame.tobytes()
    assert (back.pattern_digest, back.white_column, back.supersample) == \
        (p.digest, p.white_column, 2)


def test_recon_image_round_trip(tmp_path):
    p = scramble(sylvester(16), 2)
    img = reconstruct(simulate(synthetic("texture", 16, 9, channels=3), p), p)
    path = tmp_path / "r.ppm"
    save_recon(img, path, raw=True, comment="provenance")
    assert path.read_bytes().startswith(b"P6\n# provenance\n")
    exact = load_recon(path)
    assert exact.data.tobytes() == img.data.tobytes()
    assert exact.meta["config_digest"] == img.meta["config_digest"]
    (tmp_path / "r.raw").unlink()
    meta = path.with_name("r.ppm.meta").read_text().replace("raw = r.raw\n", "")
    path.with_name("r.ppm.meta").write_text(meta)
    approx = load_recon(path)
    span = img.data.max() - img.data.min()
    assert np.abs(approx.data - img.data).max() <= span / 65535
    assert approx.mode == img.mode and approx.edge_columns == img.edge_columns


def test_recon_image_is_read_only():
    img = ReconImage(np.zeros((2, 2)), "naive", "d")
    assert img.data.shape == (2, 2, 1)
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1


def test_frame_stack_round_trip(tmp_path):
    n = 8
    p = scramble(sylvester(n), 1)
    cfg = OpticsConfig(supersample=2, readout="differential", contrast_floor=0.05,
                       illumination=IlluminationField.vignette_field(floor=0.6))
    scene = synthetic("texture", n, 6, channels=3)
    stack = FrameStack(scene, p, cfg)
    manifest = save_frame_stack(stack, tmp_path / "fr", comment="c", raw=True)
    assert manifest.read_text().startswith("PUSHFRAME-FRAMES 1\n# c\n")
    stored = StoredFrameStack(tmp_path / "fr", p, cfg)
    assert len(stored) == len(stack) and stored.ports == ("a", "b")
    for t in range(len(stack)):
        assert stored.frame(t, "b").tobytes() == stack.frame(t, "b").tobytes()
    calib = white_calibration(p, cfg, 3)
    np.testing.assert_array_equal(correct_2d(stored, calib).data, correct_2d(stack, calib).data)


def test_frame_stack_quantised_and_checked(tmp_path):
    n = 8
    p = scramble(sylvester(n), 1)
    cfg = OpticsConfig(supersample=2)
    stack = FrameStack(synthetic("texture", n, 5), p, cfg)
    save_frame_stack(stack, tmp_path / "fr")
    stored = StoredFrameStack(tmp_path / "fr", p, cfg)
    for t in range(len(stack)):
        f = stack.frame(t)
        assert np.abs(stored.frame(t) - f).max() <= (f.max() - f.min()) / 65535
    with pytest.raises(DigestMismatchError):
        StoredFrameStack(tmp_path / "fr", scramble(sylvester(n), 2), cfg)
    with pytest.raises(DigestMismatchError):
        StoredFrameStack(tmp_path / "fr", p, cfg.replace(blur_sigma=1.0))
