import json

import numpy as np
import pytest
from PIL import Image

from gnlm import OpticalGuide, SarImage
from gnlm.image_io import (
    COUNT_COLORS,
    RasterFormatError,
    colorize_counts,
    export_count_png,
    export_png,
    read_guide,
    read_raster,
    read_sar,
    sidecar,
    to_uint8,
    write_guide,
    write_raster,
    write_sar,
)


def test_sar_roundtrip(tmp_path):
    z = np.random.default_rng(0).gamma(1.0, 1.0, (7, 9)).astype(np.float32)
    write_sar(tmp_path / "z.raw", SarImage(z, looks=3.0))
    back = read_sar(tmp_path / "z.raw")
    assert back.looks == 3.0
    assert np.array_equal(back.pixels, z.astype(np.float64))
    assert read_sar(tmp_path / "z.raw", looks=2).looks == 2


def test_guide_roundtrip_band_sequential(tmp_path):
    g = np.random.default_rng(1).random((3, 4, 5)).astype(np.float32)
    write_guide(tmp_path / "g.raw", OpticalGuide(g, band_names=["r", "g", "b"]))
    raw = np.fromfile(tmp_path / "g.raw", dtype="<f4")
    assert np.array_equal(raw[:20], g[0].ravel())
    back = read_guide(tmp_path / "g.raw")
    assert back.band_names == ["r", "g", "b"]
    assert np.array_equal(back.planes, g.astype(np.float64))


def test_format_errors(tmp_path):
    p = tmp_path / "a.raw"
    write_raster(p, np.ones((4, 4)))
    with open(p, "ab") as fh:
        fh.write(b"\0\0\0\0")
    with pytest.raises(RasterFormatError):
        read_raster(p)
    with pytest.raises(RasterFormatError):
        read_raster(tmp_path / "missing.raw")
    write_raster(p, np.ones((4, 4)))
    sidecar(p).write_text("{not json")
    with pytest.raises(RasterFormatError):
        read_raster(p)
    sidecar(p).write_text(json.dumps({"width": 4, "height": 4, "dtype": "f64"}))
    with pytest.raises(RasterFormatError):
        read_raster(p)
    write_raster(p, np.array([[1.0, np.nan], [1.0, 1.0]]))
    read_raster(p)
    with pytest.raises(RasterFormatError):
        read_sar(p)
    write_raster(p, np.ones((2, 4, 4)))
    with pytest.raises(RasterFormatError):
        read_sar(p)
    with pytest.raises(RasterFormatError):
        write_raster(p, np.ones(4))


def test_invalid_values_rejected(tmp_path):
    write_raster(tmp_path / "n.raw", -np.ones((4, 4)))
    with pytest.raises(ValueError):
        read_sar(tmp_path / "n.raw")
    write_raster(tmp_path / "o.raw", 2 * np.ones((1, 4, 4)))
    with pytest.raises(ValueError):
        read_guide(tmp_path / "o.raw")


def test_to_uint8_modes():
    assert np.all(to_uint8(np.full((3, 3), 5.0)) == 128)
    lin = to_uint8(np.array([[0.0, 1.0, 2.0]]))
    assert lin.tolist() == [[0, 128, 255]]
    lg = to_uint8(np.array([[0.0, 1.0, 1000.0, 1e-3]]), mode="log")
    assert lg.tolist()[0][0] == 0 and lg.tolist()[0][2] == 255 and lg.tolist()[0][1] > 0
    with pytest.raises(ValueError):
        to_uint8(np.ones((2, 2)), mode="sqrt")


def test_colorize_counts_endpoints():
    rgb = colorize_counts(np.array([1, 100, 1000]), vmax=100)
    assert rgb[0].tolist() == COUNT_COLORS[0].tolist()
    assert rgb[1].tolist() == COUNT_COLORS[-1].tolist()
    assert rgb[2].tolist() == COUNT_COLORS[-1].tolist()


def test_png_export(tmp_path):
    export_png(np.random.default_rng(0).random((6, 5)), tmp_path / "a.png", mode="log")
    export_png(OpticalGuide(np.random.default_rng(0).random((3, 6, 5))), tmp_path / "b.png")
    export_count_png(np.arange(30).reshape(6, 5), tmp_path / "c.png", vmax=30)
    assert Image.open(tmp_path / "a.png").mode == "L"
    assert Image.open(tmp_path / "b.png").size == (5, 6)
    assert Image.open(tmp_path / "c.png").mode == "RGB"
    with pytest.raises(ValueError):
        export_png(np.zeros((2, 4, 4)), tmp_path / "d.png")
