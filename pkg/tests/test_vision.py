import numpy as np
import pytest

from swarmctl.geometry import ChannelConfig, GridPosition
from swarmctl.vision.contours import find_contours, select_swarm
from swarmctl.vision.corpus import CorpusConfig, make_corpus
from swarmctl.vision.filters import blur, canny, compress, otsu_threshold, threshold
from swarmctl.vision.io import (Detection, PGMError, load_detections, read_pgm, save_detections,
                                write_pgm)
from swarmctl.vision.pipeline import VisionConfig, VisionPipeline
from swarmctl.vision.render import HI_RES, Disc, SceneSpec, render_frame, truth_mask
from swarmctl.vision.tracker import REACQUIRE_BELOW, init_tracker, track

CELL_UM = ChannelConfig().cell_um


def disc_image(n, cx, cy, r):
    yy, xx = np.mgrid[0:n, 0:n]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


# -- render -------------------------------------------------------------------

def test_render_empty_scene_is_flat():
    img = render_frame(SceneSpec(noise_sigma=0.0))
    assert img.shape == (HI_RES, HI_RES) and img.dtype == np.uint16
    assert img.min() == img.max() == 52_000


def test_render_disc_width():
    scene = SceneSpec(Disc(GridPosition(149.5, 149.5), 100.0, 0), noise_sigma=0.0)
    img = render_frame(scene)
    row = img[HI_RES // 2]
    dark = np.sum(row < 26_000)
    assert abs(dark - 512) <= 1   # 100 um at 400 um / 2048 px


def test_render_is_deterministic_per_seed():
    scene = SceneSpec(Disc(GridPosition(100, 80), 120.0, 9000))
    assert np.array_equal(render_frame(scene, 3), render_frame(scene, 3))
    assert not np.array_equal(render_frame(scene, 3), render_frame(scene, 4))


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneSpec(Disc(GridPosition(1, 1), 30.0, 0))
    with pytest.raises(ValueError):
        SceneSpec(contaminants=(Disc(GridPosition(1, 1), 60.0, 0),))
    with pytest.raises(ValueError):
        Disc(GridPosition(1, 1), 20.0, 70_000)


# -- compress / threshold ----------------------------------------------------------

def test_compress_extremes():
    assert np.all(compress(np.full((2048, 2048), 65535, np.uint16)) == 255)
    assert np.all(compress(np.zeros((2048, 2048), np.uint16)) == 0)
    assert compress(np.zeros((2048, 2048), np.uint16)).shape == (300, 300)


def test_compress_split_gives_one_mixed_column():
    f = np.zeros((2048, 2048), np.uint16)
    f[:, 1000:] = 65535
    lo = compress(f)
    mixed = [j for j in range(300) if 0 < lo[0, j] < 255]
    assert len(mixed) == 1 and np.all(lo[:, :mixed[0]] == 0) and np.all(lo[:, mixed[0] + 1:] == 255)
    assert np.all(lo == lo[0])


def test_otsu_bimodal_and_degenerate():
    img = np.array([[20] * 50 + [200] * 50], dtype=np.uint8)
    t = otsu_threshold(img)
    assert 20 < t <= 200
    assert threshold(img, t).sum() == 50
    assert otsu_threshold(np.full((4, 4), 77, np.uint8)) == 77


@pytest.mark.parametrize("seed", [1, 2])
def test_threshold_matches_truth_mask(seed):
    scenes = make_corpus(seed, CorpusConfig(n_frames=5))
    frames = [compress(render_frame(s, i)) for i, s in enumerate(scenes)]
    t = otsu_threshold(frames)
    for s, f in zip(scenes, frames):
        agree = np.mean(threshold(f, t) == truth_mask(s))
        assert agree >= 0.99


def test_threshold_range_checked():
    with pytest.raises(ValueError):
        threshold(np.zeros((2, 2), np.uint8), 300)


# -- blur ---------------------------------------------------------------------------

def test_blur_impulse_zeros_ones():
    imp = np.zeros((5, 5), bool)
    imp[2, 2] = True
    b = blur(imp)
    assert b.sum() == pytest.approx(255.0)
    assert set(zip(*np.nonzero(b))) == {(1, 1), (1, 2), (2, 1), (2, 2)}
    assert np.all(blur(np.zeros((6, 6), bool)) == 0)
    assert np.all(blur(np.ones((6, 6), bool)) == 255)
    g = blur(imp, "3x3")
    assert g[2, 2] == pytest.approx(255 * 4 / 16) and g.sum() == pytest.approx(255.0)
    with pytest.raises(ValueError):
        blur(imp, "5x5")


# -- canny ---------------------------------------------------------------------------

def test_canny_constant_has_no_edges():
    assert not canny(np.full((20, 20), 128.0)).any()


def test_canny_step_is_one_pixel_wide():
    img = np.zeros((20, 20))
    img[:, 10:] = 255.0
    e = canny(img)
    assert np.all(e.sum(axis=1) == 1)
    assert set(np.nonzero(e)[1]) == {10}


def test_canny_disc_ring_radius():
    smooth = blur(disc_image(101, 50, 50, 20), "3x3")
    e = canny(smooth)
    ys, xs = np.nonzero(e)
    r = np.hypot(xs - 50, ys - 50)
    assert abs(r.mean() - 20) <= 1.0 and r.std() < 1.0


def test_canny_needs_ordered_thresholds():
    with pytest.raises(ValueError):
        canny(np.zeros((4, 4)), 100, 50)


# -- contours ------------------------------------------------------------------------

def test_contours_empty():
    assert find_contours(np.zeros((10, 10))) == []


def test_contour_rectangle_moments():
    img = np.zeros((30, 40), np.uint8)
    img[5:15, 3:23] = 1
    (c,) = find_contours(img)
    assert abs(c.area - 200) <= 0.05 * 200
    cx, cy = c.centroid
    assert abs(cx - 12.5) <= 0.5 and abs(cy - 9.5) <= 0.5


def test_contours_two_discs_and_hole():
    img = disc_image(80, 20, 20, 8) | disc_image(80, 60, 55, 10)
    cs = find_contours(img)
    assert len(cs) == 2
    ring = disc_image(60, 30, 30, 15) & ~disc_image(60, 30, 30, 7)
    assert len(find_contours(ring)) == 1
    assert len(find_contours(ring, include_holes=True)) == 2


def test_select_swarm_size_rule():
    small = disc_image(200, 40, 40, 1)                      # a speck
    a = disc_image(200, 60, 140, 80 / CELL_UM / 2)          # 80 um
    b = disc_image(200, 140, 60, 150 / CELL_UM / 2)         # 150 um
    pos, c = select_swarm(find_contours(small | a | b), CELL_UM)
    assert abs(pos.x - 140) < 1 and abs(pos.y - 60) < 1
    assert select_swarm(find_contours(small), CELL_UM) is None
    assert select_swarm([], CELL_UM) is None


# -- tracker ---------------------------------------------------------------------------

def _blob(cx, cy, n=120, r=20):
    return blur(disc_image(n, cx, cy, r))


def test_tracker_static_scene():
    f = _blob(60, 60)
    ts = init_tracker(f, GridPosition(60, 60), 24)
    ts2 = track(ts, f)
    assert (ts2.position.x, ts2.position.y) == pytest.approx((60, 60), abs=1e-9)
    assert ts2.confidence == pytest.approx(1.0)


def test_tracker_follows_shift():
    ts = init_tracker(_blob(60, 60), GridPosition(60, 60), 24)
    ts = track(ts, _blob(64, 57))
    assert abs(ts.position.x - 64) <= 1 and abs(ts.position.y - 57) <= 1
    assert not ts.needs_detection


def test_tracker_dropout_reports_low_confidence():
    ts = init_tracker(_blob(60, 60), GridPosition(60, 60), 24)
    ts = track(ts, np.zeros((120, 120)))
    assert ts.confidence < REACQUIRE_BELOW and ts.needs_detection


def test_pipeline_reacquires_after_dropout():
    ch = ChannelConfig()
    swarm = Disc(GridPosition(120, 140), 120.0, 9000)
    frames = [render_frame(SceneSpec(swarm), 1), render_frame(SceneSpec(), 2),
              render_frame(SceneSpec(Disc(GridPosition(200, 100), 120.0, 9000)), 3)]
    pipe = VisionPipeline.calibrate([compress(frames[0])], VisionConfig(), ch)
    d0 = pipe.process(frames[0])
    assert d0.source == "detect" and abs(d0.x - 120) < 2 and abs(d0.y - 140) < 2
    assert pipe.process(frames[1]) is None
    d2 = pipe.process(frames[2])
    assert d2.source == "detect" and abs(d2.x - 200) < 2 and d2.frame_idx == 2


def test_vision_config_validation():
    for kw in (dict(blur_kernel="9x9"), dict(canny_low=200), dict(search_radius=0)):
        with pytest.raises(ValueError):
            VisionConfig(**kw)


# -- io ---------------------------------------------------------------------------------

@pytest.mark.parametrize("dtype", [np.uint8, np.uint16])
def test_pgm_round_trip(tmp_path, dtype):
    img = (np.arange(35).reshape(5, 7) * 997 % np.iinfo(dtype).max).astype(dtype)
    p = tmp_path / "f.pgm"
    write_pgm(p, img)
    back = read_pgm(p)
    assert back.dtype == dtype and np.array_equal(back, img)


def test_pgm_errors(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
    with pytest.raises(PGMError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(PGMError, match="expected 16"):
        read_pgm(p)
    with pytest.raises(PGMError):
        write_pgm(p, np.zeros((2, 2), np.float32))


def test_pgm_header_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\x09")
    assert read_pgm(p).tolist() == [[7, 9]]


def test_detections_round_trip(tmp_path):
    rows = [Detection(0, 1.25, 2.5, 1.0, "detect"), Detection(1, 3.0, 4.125, 0.87, "track")]
    p = tmp_path / "d.csv"
    save_detections(p, rows)
    assert load_detections(p) == rows
    with pytest.raises(ValueError):
        Detection(0, 0, 0, 1, "guess")
