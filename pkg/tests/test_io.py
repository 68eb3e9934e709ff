import numpy as np
import pytest

from svexposure.io import ImageFormatError, read_image, read_pfm, write_csv_rows, write_json, read_json, write_pfm


def test_pfm_round_trip(tmp_path):
    img = np.random.default_rng(0).lognormal(3, 2, (6, 10)).astype(np.float32)
    write_pfm(tmp_path / "a.pfm", img)
    back = read_pfm(tmp_path / "a.pfm")
    assert back.shape == img.shape
    assert np.array_equal(back, img.astype(float))


def test_pfm_rows_are_bottom_up(tmp_path):
    img = np.array([[1.0, 2.0], [3.0, 4.0]])
    write_pfm(tmp_path / "b.pfm", img)
    payload = (tmp_path / "b.pfm").read_bytes().split(b"\n", 3)[3]
    assert np.frombuffer(payload, "<f4").tolist() == [3.0, 4.0, 1.0, 2.0]


def test_colour_pfm_is_converted_to_luminance(tmp_path):
    rgb = np.ones((2, 2, 3), "<f4") * np.array([1.0, 0.0, 0.0], "<f4")
    with open(tmp_path / "c.pfm", "wb") as fh:
        fh.write(b"PF\n2 2\n-1.0\n")
        fh.write(rgb.tobytes())
    assert np.allclose(read_pfm(tmp_path / "c.pfm"), 0.2126)


def test_bad_pfm(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n2 2\n255\n....")
    with pytest.raises(ImageFormatError):
        read_pfm(tmp_path / "x.pfm")
    (tmp_path / "y.pfm").write_bytes(b"Pf\n4 4\n-1.0\n" + b"\0" * 8)
    with pytest.raises(ImageFormatError):
        read_pfm(tmp_path / "y.pfm")


def test_npy_and_json(tmp_path):
    arr = np.arange(12.0).reshape(3, 4)
    np.save(tmp_path / "a.npy", arr)
    assert np.array_equal(read_image(tmp_path / "a.npy"), arr)
    write_json(tmp_path / "a.json", {"x": np.float64(1.5), "n": np.int64(3), "v": np.ones(2)})
    assert read_json(tmp_path / "a.json") == {"n": 3, "v": [1.0, 1.0], "x": 1.5}


def test_csv_float_format(tmp_path):
    write_csv_rows(tmp_path / "r.csv", [{"a": 1, "b": 1 / 3}])
    assert (tmp_path / "r.csv").read_text() == "a,b\n1,0.3333333333\n"
