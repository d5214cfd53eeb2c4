import json

import numpy as np
import pytest

from pavesim.adapter import encode_and_normalize, split
from pavesim.errors import DataError
from pavesim.modelfile import (
    dataset_to_text,
    load_dataset,
    load_model,
    model_to_text,
    save_dataset,
    save_model,
    write_text_atomic,
)
from pavesim.network import (
    NetworkConfig,
    TrainConfig,
    init_network,
    params_allclose,
    train,
)
from pavesim.synthetic import generate_paving_dataset


def trained_fixture():
    table = generate_paving_dataset(60, 19)
    ds = encode_and_normalize(table, "Productivity")
    net_cfg = NetworkConfig(input_dim=9, hidden_widths=(4,), seed=2)
    train_cfg = TrainConfig(epochs=2, shuffle_seed=3)
    params, _ = train(ds, net_cfg, train_cfg)
    return params, ds, net_cfg, train_cfg


def test_model_round_trip_is_bit_exact(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    path = tmp_path / "m.model"
    save_model(path, params, ds.norm_stats, net_cfg, train_cfg,
               header_comments=("trained on 60 rows",))
    loaded_params, loaded_stats, loaded_net, loaded_train = load_model(path)
    assert params_allclose(loaded_params, params)
    assert loaded_stats == ds.norm_stats
    assert loaded_net == net_cfg
    assert loaded_train == train_cfg


def test_model_text_is_reproducible():
    params, ds, net_cfg, train_cfg = trained_fixture()
    a = model_to_text(params, ds.norm_stats, net_cfg, train_cfg)
    b = model_to_text(params, ds.norm_stats, net_cfg, train_cfg)
    assert a == b


def test_saved_model_rewrites_identically(tmp_path):
    # save -> load -> save must produce the same bytes
    params, ds, net_cfg, train_cfg = trained_fixture()
    first = tmp_path / "a.model"
    save_model(first, params, ds.norm_stats, net_cfg, train_cfg)
    second = tmp_path / "b.model"
    save_model(second, *load_model(first))
    assert first.read_bytes() == second.read_bytes()


def test_comment_lines_are_ignored_on_load(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    path = tmp_path / "m.model"
    save_model(path, params, ds.norm_stats, net_cfg, train_cfg,
               header_comments=("one", "two"))
    text = path.read_text()
    assert text.startswith("# one\n# two\n{")
    bare = tmp_path / "bare.model"
    bare.write_text("".join(
        l for l in text.splitlines(keepends=True) if not l.startswith("#")))
    loaded_params, _, _, _ = load_model(bare)
    assert params_allclose(loaded_params, params)


def test_load_model_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_model(tmp_path / "gone.model")


def test_load_model_rejects_broken_json(tmp_path):
    path = tmp_path / "m.model"
    path.write_text("{not json")
    with pytest.raises(DataError, match="not valid JSON"):
        load_model(path)


def test_load_model_rejects_wrong_format_tag(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    model_path = tmp_path / "m.model"
    save_model(model_path, params, ds.norm_stats, net_cfg, train_cfg)
    # a dataset file is not a model file
    train_ds, test_ds = split(
        encode_and_normalize(generate_paving_dataset(20, 1), "Productivity"),
        0.5, 1)
    ds_path = tmp_path / "d.json"
    save_dataset(ds_path, train_ds, test_ds)
    with pytest.raises(DataError, match="not a pavesim-model file"):
        load_model(ds_path)
    with pytest.raises(DataError, match="not a pavesim-dataset file"):
        load_dataset(model_path)


def test_load_model_rejects_future_version(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    path = tmp_path / "m.model"
    save_model(path, params, ds.norm_stats, net_cfg, train_cfg)
    raw = json.loads(path.read_text())
    raw["version"] = 2
    path.write_text(json.dumps(raw))
    with pytest.raises(DataError, match="format version 2"):
        load_model(path)


def test_load_model_rejects_shape_metadata_mismatch(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    path = tmp_path / "m.model"
    save_model(path, params, ds.norm_stats, net_cfg, train_cfg)
    raw = json.loads(path.read_text())
    raw["layers"][0]["shape"] = [3, 3]
    path.write_text(json.dumps(raw))
    with pytest.raises(DataError, match="declares shape"):
        load_model(path)


def test_load_model_rejects_architecture_mismatch(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    path = tmp_path / "m.model"
    save_model(path, params, ds.norm_stats, net_cfg, train_cfg)
    raw = json.loads(path.read_text())
    raw["network"]["hidden_widths"] = [4, 4]
    path.write_text(json.dumps(raw))
    with pytest.raises(DataError, match="declared architecture"):
        load_model(path)


def test_load_model_rejects_missing_section(tmp_path):
    params, ds, net_cfg, train_cfg = trained_fixture()
    path = tmp_path / "m.model"
    save_model(path, params, ds.norm_stats, net_cfg, train_cfg)
    raw = json.loads(path.read_text())
    del raw["training"]
    path.write_text(json.dumps(raw))
    with pytest.raises(DataError, match="malformed model file"):
        load_model(path)


def test_model_text_validates_params_before_writing():
    params, ds, net_cfg, train_cfg = trained_fixture()
    params.weights[0][0, 0] = np.inf
    with pytest.raises(DataError, match="non-finite"):
        model_to_text(params, ds.norm_stats, net_cfg, train_cfg)


def test_dataset_round_trip_is_bit_exact(tmp_path):
    table = generate_paving_dataset(40, 23)
    ds = encode_and_normalize(table, "Productivity")
    train_ds, test_ds = split(ds, 0.8, 6)
    path = tmp_path / "d.json"
    save_dataset(path, train_ds, test_ds, header_comments=("split 0.8",))
    loaded_train, loaded_test = load_dataset(path)
    assert np.array_equal(loaded_train.X, train_ds.X)
    assert np.array_equal(loaded_train.y, train_ds.y)
    assert np.array_equal(loaded_test.X, test_ds.X)
    assert np.array_equal(loaded_test.y, test_ds.y)
    assert loaded_train.norm_stats == ds.norm_stats
    assert loaded_test.norm_stats == ds.norm_stats


def test_dataset_text_rejects_mismatched_stats():
    a = encode_and_normalize(generate_paving_dataset(20, 1), "Productivity")
    b = encode_and_normalize(generate_paving_dataset(20, 2), "Productivity")
    with pytest.raises(DataError, match="different normalization"):
        dataset_to_text(a, b)


def test_write_text_atomic_replaces_and_leaves_no_droppings(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("old")
    write_text_atomic(path, "new")
    assert path.read_text() == "new"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_fresh_nets_round_trip_without_training(tmp_path):
    # exercise a multi-hidden-layer shape straight from the initializer
    ds = encode_and_normalize(generate_paving_dataset(20, 4), "Productivity")
    net_cfg = NetworkConfig(input_dim=9, hidden_widths=(5, 3), seed=8)
    params = init_network(net_cfg)
    path = tmp_path / "fresh.model"
    save_model(path, params, ds.norm_stats, net_cfg, TrainConfig())
    loaded, _, _, _ = load_model(path)
    assert params_allclose(loaded, params)
    assert loaded.shapes() == [(9, 5), (5, 3), (3, 2)]
