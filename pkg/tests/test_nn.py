"""Layers, MSRA init, ADAM, and the LFNN checkpoint format."""

import numpy as np
import pytest

from lfvideo import nn
from lfvideo.tensor import Tensor


def test_msra_std_small_fan_in():
    layer = nn.ConvLayer(2, 4, 1)
    nn.msra_init(layer, 3)
    # fan_in = 2 -> target std exactly 1.0
    assert np.sqrt(2.0 / layer.fan_in) == pytest.approx(1.0)


def test_msra_sample_variance_large_fan_in():
    # fan_in = 32*5*5 = 800 -> variance 2/800 = 0.0025, 12.8k draws
    layer = nn.ConvLayer(32, 16, 5)
    nn.msra_init(layer, 123)
    var = layer.kernel.data.var()
    assert abs(var - 0.0025) / 0.0025 < 0.2
    assert np.all(layer.bias.data == 0.0)


def test_msra_deterministic():
    a = nn.msra_init(nn.ConvLayer(3, 8, 3), 42).kernel.data
    b = nn.msra_init(nn.ConvLayer(3, 8, 3), 42).kernel.data
    np.testing.assert_array_equal(a, b)


def test_convnet_forward_shape():
    net = nn.ConvNet("probe", [
        nn.ConvLayer(4, 8, 3),
        nn.ConvLayer(8, 8, 3),
        nn.ConvLayer(8, 4, 3),
        nn.ConvLayer(4, 1, 1, activation="none"),
    ]).init(0)
    out = net(Tensor(np.random.default_rng(0).random((4, 9, 9))))
    assert out.dims == (1, 9, 9)
    assert len(net.parameters()) == 8


def test_adam_zero_gradient_noop():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
    st = nn.AdamState(learning_rate=0.1)
    for _ in range(5):
        nn.adam_step(p, {"w": np.zeros(2)}, st)
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
    assert st.step == 5


def test_adam_first_step_closed_form():
    # g=1 everywhere: bias correction gives m_hat = v_hat = 1, so the update
    # is -lr / (1 + eps) ~ -lr
    p = {"w": Tensor(np.zeros(3), requires_grad=True)}
    st = nn.AdamState(learning_rate=1e-4)
    nn.adam_step(p, {"w": np.ones(3)}, st)
    np.testing.assert_allclose(p["w"].data, -1e-4, rtol=1e-6)


def test_adam_defaults_match_training_configuration():
    st = nn.AdamState()
    assert st.beta1 == 0.9
    assert st.beta2 == 0.999
    assert st.learning_rate == 1e-4


def test_adam_shape_mismatch():
    p = {"w": Tensor(np.zeros(3), requires_grad=True)}
    with pytest.raises(ValueError):
        nn.adam_step(p, {"w": np.zeros(4)}, nn.AdamState())


def test_adam_deterministic_trajectory():
    def run():
        p = {"w": Tensor(np.linspace(-1, 1, 8), requires_grad=True)}
        st = nn.AdamState(learning_rate=0.01)
        rng = np.random.default_rng(5)
        for _ in range(20):
            nn.adam_step(p, {"w": rng.normal(size=8)}, st)
        return p["w"].data.copy()

    np.testing.assert_array_equal(run(), run())


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    tensors = {
        "net.conv0.kernel": rng.normal(size=(4, 3, 3, 3)).astype(np.float32),
        "net.conv0.bias": rng.normal(size=4).astype(np.float32),
        "scalar": np.float32(3.25).reshape(()),
    }
    path = tmp_path / "w.lfnn"
    nn.save_checkpoint(path, tensors)
    loaded = nn.load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for k in tensors:
        np.testing.assert_array_equal(loaded[k], np.asarray(tensors[k]))
    # write -> read -> write produces identical bytes
    path2 = tmp_path / "w2.lfnn"
    nn.save_checkpoint(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.lfnn"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(nn.CheckpointError):
        nn.load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    path = tmp_path / "t.lfnn"
    nn.save_checkpoint(path, {"a": np.ones((2, 2), dtype=np.float32)})
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(nn.CheckpointError):
        nn.load_checkpoint(path)
