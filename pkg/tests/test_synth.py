import numpy as np
import pytest

from colorbias.dataset import load_manifest
from colorbias.metrics_local import compute_mud
from colorbias.synth import (
    SyntheticTransform,
    apply_transform,
    make_corpus,
    oracle_metrics,
    pixel_cell_index,
    random_raster,
)
from conftest import uniform
from helpers import max_errors


def small_corpus(rng, n=4, lo=0, hi=255):
    sizes = [(40, 72), (96, 50), (64, 64), (33, 120), (70, 90)]
    return [random_raster(rng, h, w, lo, hi) for h, w in sizes[:n]]


def test_identity_is_byte_identical(rng):
    img = random_raster(rng, 30, 50)
    out = apply_transform(img, SyntheticTransform())
    assert out is not img and np.array_equal(out, img)
    assert np.array_equal(apply_transform(out, SyntheticTransform()), img)


def test_channel_offset_clamps():
    px = np.array([[[0, 0, 250]]], np.uint8)
    assert apply_transform(px, SyntheticTransform.channel_offset("B", 10)).tolist() == [[[0, 0, 255]]]
    assert apply_transform(px, SyntheticTransform.channel_offset("R", -10)).tolist() == [[[0, 0, 250]]]


def test_saturation_scale():
    px = np.array([[[200, 100, 50], [90, 90, 90]]], np.uint8)
    out = apply_transform(px, SyntheticTransform.saturation_scale(0.5))
    # hue and value fixed, s 75% -> 37.5%: channels move halfway to max.
    assert out.tolist() == [[[200, 150, 125], [90, 90, 90]]]
    assert np.array_equal(apply_transform(px, SyntheticTransform.saturation_scale(1.0)), px)


def test_mud_blend_endpoints(rng):
    img = random_raster(rng, 50, 70)
    mud = compute_mud([random_raster(rng, 64, 64)])
    full = apply_transform(img, SyntheticTransform.mud_blend(1.0, mud))
    rows, cols = pixel_cell_index(50, 64), pixel_cell_index(70, 64)
    expected = np.floor(mud.grid.cells[rows[:, None], cols[None, :]] + 0.5)
    assert np.array_equal(full, expected.astype(np.uint8))
    assert np.array_equal(apply_transform(img, SyntheticTransform.mud_blend(0.0, mud)), img)


def test_pixel_cell_index():
    assert pixel_cell_index(64, 64).tolist() == list(range(64))
    assert pixel_cell_index(128, 64).tolist() == [i // 2 for i in range(128)]
    assert pixel_cell_index(3, 64).tolist() == [10, 32, 53]


def test_transform_validation():
    with pytest.raises(ValueError):
        SyntheticTransform("warp")
    with pytest.raises(ValueError):
        SyntheticTransform.saturation_scale(3.0)
    with pytest.raises(ValueError):
        SyntheticTransform("mud_blend", alpha=0.5)
    with pytest.raises(ValueError):
        SyntheticTransform.channel_offset("L*", 3)


def test_oracle_identity_is_zero(rng):
    imgs = small_corpus(rng, 2)
    res = oracle_metrics(imgs, imgs, grid=16)
    for grid in res["shifts"].values():
        assert not np.asarray(grid).any()
    assert res["mean_distance"] == 0.0


def test_oracle_linearity_without_clamp():
    imgs = [uniform(9, 13, (30, 40, 50)), uniform(20, 7, (100, 10, 200))]
    shifted = [apply_transform(i, SyntheticTransform.channel_offset("B", 10)) for i in imgs]
    res = oracle_metrics(imgs, shifted, grid=8)
    assert np.asarray(res["shifts"]["B"]) == pytest.approx(np.full((8, 8), 10.0), abs=1e-12)


@pytest.mark.parametrize(
    "make",
    [
        lambda mud: SyntheticTransform(),
        lambda mud: SyntheticTransform.channel_offset("B", 10),
        lambda mud: SyntheticTransform.channel_offset("R", -25),
        lambda mud: SyntheticTransform.saturation_scale(0.5),
        lambda mud: SyntheticTransform.saturation_scale(1.6),
        lambda mud: SyntheticTransform.mud_blend(0.5, mud),
    ],
    ids=["identity", "blue+10", "red-25", "desat0.5", "sat1.6", "mud0.5"],
)
def test_pipeline_matches_oracle(rng, make):
    origs = small_corpus(rng, 3)
    mud = compute_mud(small_corpus(rng, 2))
    t = make(mud)
    cols = [apply_transform(o, t) for o in origs]
    err, _, _ = max_errors(origs, cols, mud=mud)
    assert err["histogram_counts"] == 0
    for name, value in err.items():
        assert value <= 1e-6, name


def test_make_corpus(tmp_path):
    path = make_corpus(tmp_path, n=12, transform=SyntheticTransform.channel_offset("G", 5), seed=3,
                       min_size=20, max_size=40)
    m = load_manifest(path)
    assert len(m) == 12
    assert m.entries[0].category == "urban" and m.entries[10].category == "urban"
    assert all(e.original.exists() and e.colorized.exists() for e in m)
    again = make_corpus(tmp_path / "again", n=12, transform=SyntheticTransform.channel_offset("G", 5), seed=3,
                        min_size=20, max_size=40)
    assert (tmp_path / "original/img_00004.png").read_bytes() == (again.parent / "original/img_00004.png").read_bytes()
