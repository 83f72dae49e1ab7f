"""Scene generator ground truth and the LFV1 container."""

import json

import numpy as np
import pytest

from lfvideo.lightfield import AngularCoord
from lfvideo.metrics import psnr
from lfvideo.synthdata import (
    ContainerFormatError,
    LayerSpec,
    SceneSpec,
    make_texture,
    random_scene_spec,
    read_sequence,
    render_scene,
    write_sequence,
)
from lfvideo.warp import shift_view, warp_with_flow

BORDER = 5


def masked_psnr(a, b, keep):
    err = ((a - b) ** 2)[:, keep].mean()
    return 99.0 if err <= 0 else 10 * np.log10(1.0 / err)


@pytest.fixture(scope="module")
def two_layer_bundle():
    return render_scene(random_scene_spec(11))


def test_single_static_layer_all_identical():
    spec = SceneSpec(layers=[LayerSpec(disparity=0.0)], frames=3, height=32, width=32, seed=1)
    b = render_scene(spec)
    base = b.light_fields[0].views
    for t in range(3):
        v = b.light_fields[t].views
        for vi in range(5):
            for ui in range(5):
                np.testing.assert_array_equal(v[vi, ui], base[2, 2])


def test_constant_disparity_view_is_translated():
    spec = SceneSpec(layers=[LayerSpec(disparity=1.5)], frames=1, height=32, width=32, seed=2)
    lf = render_scene(spec).light_fields[0]
    central = lf.central_view
    view = lf.view(AngularCoord(2, 0))
    # view u=(2,0) shows the texture at x - 3, i.e. the central view content
    # appears shifted right by 3 px
    np.testing.assert_allclose(view[:, :, 3:], central[:, :, :-3], atol=1e-6)


def test_gt_disparity_alignment(two_layer_bundle):
    b = two_layer_bundle
    for t in [0, 5, 11]:
        lf = b.light_fields[t]
        d = b.gt_disparity[t].astype(np.float64)
        keep = ~(b.occl_angular[t] > 0.5)[BORDER:-BORDER, BORDER:-BORDER]
        for u in [(2, 2), (-2, 1), (1, -2)]:
            shifted = shift_view(lf, AngularCoord(*u), d).data
            p = masked_psnr(shifted[:, BORDER:-BORDER, BORDER:-BORDER],
                            lf.central_view[:, BORDER:-BORDER, BORDER:-BORDER], keep)
            assert p > 45.0, f"t={t} u={u}: {p:.1f} dB"


def test_gt_flow_reconstruction(two_layer_bundle):
    b = two_layer_bundle
    for t in range(1, b.frames):
        rec = warp_with_flow(b.video[t - 1].image.astype(np.float64),
                             b.gt_flow[t].astype(np.float64)).data
        keep = ~(b.occl_temporal[t] > 0.5)[BORDER:-BORDER, BORDER:-BORDER]
        p = masked_psnr(rec[:, BORDER:-BORDER, BORDER:-BORDER],
                        b.video[t].image[:, BORDER:-BORDER, BORDER:-BORDER], keep)
        assert p > 45.0, f"t={t}: {p:.1f} dB"


def test_occlusion_mask_two_layer_scene(two_layer_bundle):
    b = two_layer_bundle
    occ = b.occl_angular[0]
    # a moving/offset foreground always produces some angular occlusion, but
    # most of the frame stays clean
    assert 0.01 < occ.mean() < 0.5


def test_video_equals_central_view(two_layer_bundle):
    two_layer_bundle.validate()


def test_render_deterministic():
    a = render_scene(random_scene_spec(33))
    b = render_scene(random_scene_spec(33))
    for t in range(a.frames):
        np.testing.assert_array_equal(a.light_fields[t].views, b.light_fields[t].views)
        np.testing.assert_array_equal(a.gt_disparity[t], b.gt_disparity[t])


def test_flat_texture_rejected():
    with pytest.raises(ValueError, match="flat"):
        make_texture({"kind": "flat"}, (16, 16), np.random.default_rng(0))


def test_scene_spec_json_roundtrip():
    spec = random_scene_spec(7)
    again = SceneSpec.from_json(spec.to_json())
    assert again.to_json() == spec.to_json()
    assert len(again.layers) == len(spec.layers)


def test_disparity_bound_enforced():
    with pytest.raises(ValueError):
        SceneSpec(layers=[LayerSpec(disparity=5.0)])


# -- container ------------------------------------------------------------------


def test_container_roundtrip_bit_exact(tmp_path, two_layer_bundle):
    b = two_layer_bundle
    write_sequence(b, tmp_path / "seq")
    r = read_sequence(tmp_path / "seq")
    assert r.frames == b.frames
    assert r.keyframe_stride == b.keyframe_stride
    for t in range(b.frames):
        np.testing.assert_array_equal(r.light_fields[t].views, b.light_fields[t].views)
        np.testing.assert_array_equal(r.video[t].image, b.video[t].image)
        np.testing.assert_array_equal(r.gt_disparity[t], b.gt_disparity[t])
        if t > 0:
            np.testing.assert_array_equal(r.gt_flow[t], b.gt_flow[t])
    # second write produces identical bytes for every tensor file
    write_sequence(r, tmp_path / "seq2")
    for f in sorted((tmp_path / "seq").glob("*.bin")):
        assert f.read_bytes() == (tmp_path / "seq2" / f.name).read_bytes()


def test_container_manifest_fields(tmp_path, two_layer_bundle):
    write_sequence(two_layer_bundle, tmp_path / "seq")
    manifest = json.loads((tmp_path / "seq" / "manifest.json").read_text())
    for key in ("version", "A", "H", "W", "frames", "keyframe_stride", "tensors"):
        assert key in manifest
    assert manifest["A"] == 5 and manifest["H"] == 64 and manifest["W"] == 64


def test_container_corrupt_magic(tmp_path, two_layer_bundle):
    write_sequence(two_layer_bundle, tmp_path / "seq")
    victim = sorted((tmp_path / "seq").glob("*.bin"))[0]
    blob = bytearray(victim.read_bytes())
    blob[:4] = b"XXXX"
    victim.write_bytes(bytes(blob))
    with pytest.raises(ContainerFormatError, match="magic"):
        read_sequence(tmp_path / "seq")


def test_container_dim_disagreement(tmp_path, two_layer_bundle):
    write_sequence(two_layer_bundle, tmp_path / "seq")
    manifest_path = tmp_path / "seq" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["W"] = 128
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(ContainerFormatError):
        read_sequence(tmp_path / "seq")


def test_container_version_mismatch(tmp_path, two_layer_bundle):
    write_sequence(two_layer_bundle, tmp_path / "seq")
    manifest_path = tmp_path / "seq" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["version"] = 999
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(ContainerFormatError, match="version"):
        read_sequence(tmp_path / "seq")


def test_container_truncated_tensor(tmp_path, two_layer_bundle):
    write_sequence(two_layer_bundle, tmp_path / "seq")
    victim = sorted((tmp_path / "seq").glob("*.bin"))[-1]
    victim.write_bytes(victim.read_bytes()[:-9])
    with pytest.raises(ContainerFormatError):
        read_sequence(tmp_path / "seq")
