import os
import sys

import numpy as np
import pytest

build_dir = os.environ.get("VOXLIFT_PYTHON_BUILD_DIR")
if build_dir:
    sys.path.insert(0, os.path.dirname(build_dir))

voxlift = pytest.importorskip("voxlift")


def two_region(width=16, height=10):
    img = np.zeros((height, width, 3))
    img[:, : width // 2] = [1.0, 0.0, 0.0]
    img[:, width // 2 :] = [0.0, 0.0, 1.0]
    return img


def test_segment_two_region():
    mask = voxlift.segment(two_region(), point=(4, 5))
    assert mask.shape == (10, 16)
    assert mask[:, :8].all()
    assert not mask[:, 8:].any()


def test_segment_needs_one_prompt():
    with pytest.raises(ValueError):
        voxlift.segment(two_region())
    with pytest.raises(ValueError):
        voxlift.segment(two_region(), point=(1, 1), box=(0, 0, 2, 2))


def test_alpha_bar_schedule():
    ab = voxlift.alpha_bar()
    betas = np.linspace(1e-4, 2e-2, 1000)
    assert np.allclose(ab, np.cumprod(1.0 - betas), rtol=1e-12)


def test_image_round_trip(tmp_path):
    img = np.round(np.random.default_rng(0).random((5, 7, 3)) * 255) / 255
    voxlift.save_image(img, tmp_path / "a.png")
    assert np.array_equal(voxlift.load_image(tmp_path / "a.png"), img)
    with pytest.raises(OSError):
        voxlift.load_image(tmp_path / "missing.png")


def test_field_render_and_grid_round_trip(tmp_path):
    field = voxlift.Field.ground_truth(16)
    assert field.resolution == (16, 16, 16)
    view = field.render(azimuth=30, elevation=10, size=24, samples=32)
    assert view.shape == (24, 24, 3)
    assert 0.0 <= view.min() and view.max() <= 1.0
    assert view.min() < 0.9  # the object is visible against the white background
    field.save(tmp_path / "g.vxrf")
    again = voxlift.Field.load(tmp_path / "g.vxrf")
    assert np.array_equal(again.render(azimuth=30, elevation=10, size=24, samples=32), view)


def test_reconstruct_small(tmp_path):
    config = voxlift.write_fixture(tmp_path, 48, 3)
    small = {"resolution": "12,12,12", "render_size": "16", "samples_per_ray": "16", "view_size": "16"}
    result = voxlift.reconstruct(config, small)
    assert result["iterations"] == 3
    assert result["held_out_psnr"] is not None
    assert result["caption"] is None
    assert (result["out_dir"] / "field.vxrf").exists()
    assert result["field"].resolution == (12, 12, 12)


def test_reconstruct_reports_stage(tmp_path):
    config = voxlift.write_fixture(tmp_path, 48, 3)
    with pytest.raises(RuntimeError, match="segment"):
        voxlift.reconstruct(config, {"point": "900,1"})
    with pytest.raises(ValueError):
        voxlift.reconstruct(config, {"bogus": "1"})
