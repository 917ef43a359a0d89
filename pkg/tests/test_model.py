"""Model assembly, prediction shapes, and checkpoint reconstruction."""

import numpy as np
import pytest

from pmx.errors import ContractError
from pmx.formats import write_checkpoint
from pmx.model import (Model, ModelConfig, config_from_meta, load_model,
                       save_model)
from pmx.tensor import Tensor


def _images(rng, n=2, size=16):
    return Tensor(rng.uniform(0.0, 1.0, size=(n, 3, size, size)))


# ---- config ------------------------------------------------------------------------


def test_config_rejects_unknown_task_and_head():
    with pytest.raises(ContractError):
        ModelConfig(task="pose").validate()
    with pytest.raises(ContractError):
        ModelConfig(task="seg", head="mlp").validate()


def test_seg_cluster_requires_one_query_per_class():
    with pytest.raises(ContractError):
        ModelConfig(task="seg", k=8, classes=4).validate()
    ModelConfig(task="seg", k=8, classes=4, head="baseline").validate()


# ---- prediction shapes ---------------------------------------------------------------


@pytest.mark.parametrize("task,head", [
    ("seg", "cluster"), ("seg", "baseline"),
    ("depth", "cluster"), ("depth", "baseline"),
    ("normal", "cluster"), ("normal", "baseline"),
])
def test_predict_shapes_and_ranges(task, head, rng):
    model = Model(ModelConfig(task=task, head=head), seed=0)
    pred = model.predict(_images(rng))
    if task == "seg":
        assert pred.shape == (2, 16, 16)
        assert set(np.unique(pred)) <= set(range(4))
    elif task == "depth":
        assert pred.shape == (2, 16, 16)
        assert np.all(pred > 0.5) and np.all(pred < 10.0)
    else:
        assert pred.shape == (2, 16, 16, 3)
        norms = np.linalg.norm(pred, axis=-1)
        assert np.allclose(norms, 1.0, atol=1e-5)


def test_probability_panels_cluster_only(rng):
    model = Model(ModelConfig(task="depth"), seed=0)
    panels = model.probability_panels(_images(rng))
    assert panels.shape == (2, 4, 16, 16)
    assert np.allclose(panels.sum(axis=1), 1.0, atol=1e-5)
    baseline = Model(ModelConfig(task="depth", head="baseline"), seed=0)
    with pytest.raises(ContractError):
        baseline.probability_panels(_images(rng))


def test_bin_centers_depth_only(rng):
    model = Model(ModelConfig(task="depth"), seed=0)
    b = model.bin_centers(_images(rng))
    assert b.shape == (2, 4)
    assert np.all(np.diff(b, axis=-1) > 0)
    assert np.all(b > 0.5) and np.all(b < 10.0)
    seg = Model(ModelConfig(task="seg"), seed=0)
    with pytest.raises(ContractError):
        seg.bin_centers(_images(rng))


# ---- checkpoints -------------------------------------------------------------------


def test_save_load_roundtrip_bitexact(tmp_path, rng):
    path = str(tmp_path / "model.pmxc")
    cfg = ModelConfig(task="depth", k=8, d=32, n_dec=3, widths=(16, 32, 32),
                      variant="standard", d_min=1.0, d_max=8.0)
    model = Model(cfg, seed=7)
    save_model(path, model)
    loaded, opt = load_model(path)
    assert loaded.cfg == cfg
    assert opt == {}
    fresh = loaded.params()
    for name, p in model.params().items():
        np.testing.assert_array_equal(fresh[name].data, p.data)


def test_save_load_preserves_predictions(tmp_path, rng):
    path = str(tmp_path / "model.pmxc")
    model = Model(ModelConfig(task="normal"), seed=3)
    images = _images(rng)
    before = model.predict(images)
    save_model(path, model)
    loaded, _ = load_model(path)
    np.testing.assert_array_equal(loaded.predict(images), before)


def test_opt_state_roundtrip(tmp_path):
    path = str(tmp_path / "model.pmxc")
    model = Model(ModelConfig(task="depth"), seed=0)
    state = {"step": np.float32(5.0),
             "m/enc/stem1.weight": np.ones((4,), dtype=np.float32)}
    save_model(path, model, state)
    _, opt = load_model(path)
    assert int(opt["step"]) == 5
    np.testing.assert_array_equal(opt["m/enc/stem1.weight"], np.ones(4, dtype=np.float32))


def test_load_state_missing_and_mismatched(tmp_path):
    model = Model(ModelConfig(task="depth"), seed=0)
    with pytest.raises(ContractError):
        model.load_state({})
    tensors = {n: p.data.copy() for n, p in model.params().items()}
    first = sorted(tensors)[0]
    tensors[first] = np.zeros((1, 1), dtype=np.float32)
    with pytest.raises(ContractError):
        model.load_state(tensors)


def test_checkpoint_without_metadata_rejected(tmp_path):
    path = str(tmp_path / "stray.pmxc")
    write_checkpoint(path, {"weights": np.zeros(3, dtype=np.float32)})
    with pytest.raises(ContractError):
        load_model(path)


def test_config_from_meta_roundtrips_nondefaults():
    cfg = ModelConfig(task="normal", head="baseline", variant="standard",
                      k=16, d=48, n_dec=1, classes=4, widths=(8, 16, 24),
                      d_min=0.25, d_max=64.0)
    model = Model(cfg, seed=0)
    from pmx.model import _meta_tensors
    assert config_from_meta(_meta_tensors(cfg)) == cfg
