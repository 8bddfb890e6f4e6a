"""Synthetic data, fold assignment, training wrappers, and the pipeline."""

import json
import os

import numpy as np
import pytest

import uqled.synthlab as sl
from uqled.model import TrainConfig, predict_probabilities
from uqled.synthlab import (
    ExperimentConfig,
    ExperimentReport,
    _stratified_fold_ids,
    make_blobs,
    oos_probabilities,
    run_pipeline,
    train_dropout_softmax,
)
from uqled.tensors import FlagSet, LabelVector, McdStack, ProbMatrix
from uqled.uncertainty import mcd_mean


def test_make_blobs_deterministic():
    a = make_blobs(40, 3, 4, separation=2.0, seed=9)
    b = make_blobs(40, 3, 4, separation=2.0, seed=9)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels.labels, b.labels.labels)
    c = make_blobs(40, 3, 4, separation=2.0, seed=10)
    assert not np.array_equal(a.features, c.features)


def test_make_blobs_near_balanced():
    data = make_blobs(10, 2, 3, separation=1.0, seed=0)
    counts = data.labels.class_counts()
    assert sorted(counts.tolist()) == [5, 5]
    data = make_blobs(11, 2, 3, separation=1.0, seed=0)
    assert sorted(data.labels.class_counts().tolist()) == [5, 6]


def test_make_blobs_centers_on_separation_sphere():
    data = make_blobs(30, 4, 5, separation=3.5, seed=2)
    norms = np.linalg.norm(data.centers, axis=1)
    assert np.allclose(norms, 3.5, atol=1e-9)


def test_make_blobs_nearest_centroid_recovers_labels():
    data = make_blobs(300, 3, 6, separation=12.0, seed=4)
    d2 = ((data.features[:, None, :] - data.centers[None, :, :]) ** 2).sum(axis=2)
    pred = d2.argmin(axis=1)
    assert np.mean(pred == data.labels.labels) > 0.99


def test_make_blobs_validation():
    with pytest.raises(ValueError):
        make_blobs(3, 5, 2, separation=1.0, seed=0)  # n < c
    with pytest.raises(ValueError):
        make_blobs(10, 1, 2, separation=1.0, seed=0)
    with pytest.raises(ValueError):
        make_blobs(10, 2, 2, separation=-1.0, seed=0)


def test_training_learns_separable_blobs():
    data = make_blobs(200, 3, 5, separation=6.0, seed=1)
    cfg = TrainConfig(epochs=60, learning_rate=0.5, batch_size=16,
                      dropout_rate=0.2, seed=3)
    model = train_dropout_softmax(data, cfg)
    from uqled.model import accuracy

    assert accuracy(model, data.features, data.labels) > 0.9


def test_zero_epochs_returns_initial_parameters():
    data = make_blobs(30, 2, 3, separation=2.0, seed=5)
    model = train_dropout_softmax(data, TrainConfig(epochs=0, seed=1))
    assert np.array_equal(model.weights, np.zeros((3, 2)))
    assert np.array_equal(model.bias, np.zeros(2))


def test_training_bitwise_deterministic():
    data = make_blobs(60, 3, 4, separation=3.0, seed=7)
    cfg = TrainConfig(epochs=15, learning_rate=0.8, batch_size=8,
                      dropout_rate=0.3, seed=11)
    m1 = train_dropout_softmax(data, cfg)
    m2 = train_dropout_softmax(data, cfg)
    assert np.array_equal(m1.weights, m2.weights)
    assert np.array_equal(m1.bias, m2.bias)


def test_predict_dropout_off_stack_collapses():
    data = make_blobs(40, 2, 3, separation=3.0, seed=8)
    cfg = TrainConfig(epochs=10, dropout_rate=0.0, seed=2)
    model = train_dropout_softmax(data, cfg)
    soft = predict_probabilities(model, data.features, mode="softmax")
    stack = predict_probabilities(model, data.features, mode="mcd", passes=5, seed=4)
    for f in range(5):
        assert np.array_equal(stack[f].values, soft.values)


def test_predict_rows_normalized():
    data = make_blobs(50, 3, 4, separation=2.0, seed=9)
    model = train_dropout_softmax(data, TrainConfig(epochs=10, seed=0))
    soft = predict_probabilities(model, data.features)
    assert np.allclose(soft.values.sum(axis=1), 1.0, atol=1e-12)
    stack = predict_probabilities(model, data.features, mode="mcd", passes=3, seed=1)
    assert np.allclose(stack.values.sum(axis=2), 1.0, atol=1e-12)


def test_mcd_mean_approaches_dropout_off_as_passes_grow():
    # low dropout keeps the Jensen gap between E[softmax] and the
    # dropout-off softmax small, so Monte-Carlo error dominates and the
    # deviation shrinks monotonically with the pass count
    data = make_blobs(80, 3, 5, separation=3.0, seed=10)
    cfg = TrainConfig(epochs=25, learning_rate=0.5, batch_size=8,
                      dropout_rate=0.1, seed=6)
    model = train_dropout_softmax(data, cfg)
    center = predict_probabilities(model, data.features).values
    devs = []
    for f in (5, 50, 500):
        stack = predict_probabilities(model, data.features, mode="mcd",
                                      passes=f, seed=13)
        devs.append(np.abs(mcd_mean(stack).values - center).mean())
    assert devs[0] > devs[1] > devs[2]


def test_fold_ids_partition_and_stratify():
    rng = np.random.default_rng(3)
    lab = np.concatenate([np.arange(3), rng.integers(0, 3, size=47)])
    labels = LabelVector(lab, num_classes=3)
    folds = _stratified_fold_ids(labels, k=4, seed=0)
    assert folds.shape == (50,)
    assert set(folds.tolist()) == {0, 1, 2, 3}
    sizes = np.bincount(folds, minlength=4)
    assert sizes.max() - sizes.min() <= 1
    for j in range(3):
        per = np.bincount(folds[lab == j], minlength=4)
        assert per.max() - per.min() <= 1


def test_fold_ids_leave_one_out():
    lab = np.concatenate([np.arange(3), np.random.default_rng(1).integers(0, 3, 9)])
    labels = LabelVector(lab, num_classes=3)
    folds = _stratified_fold_ids(labels, k=12, seed=5)
    assert sorted(folds.tolist()) == list(range(12))


def test_fold_ids_bounds():
    labels = LabelVector(np.array([0, 1, 0, 1]), num_classes=2)
    with pytest.raises(ValueError):
        _stratified_fold_ids(labels, k=1, seed=0)
    with pytest.raises(ValueError):
        _stratified_fold_ids(labels, k=5, seed=0)


def test_oos_probabilities_cover_every_sample():
    data = make_blobs(48, 3, 4, separation=3.0, seed=12)
    cfg = TrainConfig(epochs=8, learning_rate=0.5, batch_size=8,
                      dropout_rate=0.2, seed=21)
    probs, stack = oos_probabilities(data, data.labels, k=4, cfg=cfg, passes=3)
    assert probs.n == 48 and stack.num_passes == 3
    assert np.allclose(probs.values.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(stack.values.sum(axis=2), 1.0, atol=1e-9)


def test_oos_probabilities_leave_one_out_small():
    data = make_blobs(12, 2, 3, separation=4.0, seed=13)
    cfg = TrainConfig(epochs=5, learning_rate=0.5, batch_size=4,
                      dropout_rate=0.1, seed=2)
    probs, stack = oos_probabilities(data, data.labels, k=12, cfg=cfg, passes=2)
    assert probs.n == 12
    assert np.allclose(probs.values.sum(axis=1), 1.0, atol=1e-9)


def test_oos_probabilities_deterministic():
    data = make_blobs(36, 3, 4, separation=3.0, seed=14)
    cfg = TrainConfig(epochs=6, seed=8)
    a = oos_probabilities(data, data.labels, k=3, cfg=cfg, passes=2)
    b = oos_probabilities(data, data.labels, k=3, cfg=cfg, passes=2)
    assert np.array_equal(a[0].values, b[0].values)
    assert np.array_equal(a[1].values, b[1].values)


def _tiny_config(**overrides):
    base = dict(
        n=120, c=3, d=4, separation=3.5,
        tau_list=(0.2,),
        algorithms=("cl-pbnr", "cl-mcd"),
        passes=3, k_folds=3, seeds=(0,),
        training=TrainConfig(epochs=10, learning_rate=1.0, batch_size=8,
                             dropout_rate=0.2, seed=0),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_dict_round_trip():
    cfg = _tiny_config()
    d = cfg.to_dict()
    assert d["F"] == cfg.passes  # pass count serializes under the F key
    back = ExperimentConfig.from_dict(d)
    assert back == cfg


def test_pipeline_tau_zero_degenerate_recall():
    cfg = _tiny_config(tau_list=(0.0,))
    rep = run_pipeline(cfg)
    run = rep.runs[0]
    tau_block = run["taus"][0]
    for alg, entry in tau_block["algorithms"].items():
        assert entry["recall"] == 0.0 and entry["degenerate"]
    assert abs(tau_block["noisy_accuracy"] - run["initial_accuracy"]) < 0.1


def test_pipeline_perfect_detector_cleans_up(monkeypatch):
    truth = {}

    real_inject = sl.inject_noise

    def spy_inject(labels, profile, tau, seed):
        noisy, mask = real_inject(labels, profile, tau, seed)
        truth["mask"] = mask
        return noisy, mask

    def oracle_detect(algorithm, probs=None, stack=None, labels=None, cfg=None):
        return FlagSet(truth["mask"].flipped_indices)

    monkeypatch.setattr(sl, "inject_noise", spy_inject)
    monkeypatch.setattr(sl, "detect", oracle_detect)
    cfg = _tiny_config(n=240, separation=5.0, tau_list=(0.2,),
                       algorithms=("cl-pbnr",))
    rep = run_pipeline(cfg)
    entry = rep.runs[0]["taus"][0]["algorithms"]["cl-pbnr"]
    assert entry["precision"] == 1.0 and entry["recall"] == 1.0
    assert entry["clean_accuracy"] >= rep.runs[0]["taus"][0]["noisy_accuracy"]


def test_pipeline_report_schema_and_determinism():
    cfg = _tiny_config(seeds=(0, 1))
    rep = run_pipeline(cfg)
    blob = json.loads(rep.to_json())
    assert set(blob) == {"config", "runs", "aggregates"}
    assert len(blob["runs"]) == 2
    for run in blob["runs"]:
        assert set(run) == {"seed", "initial_accuracy", "taus"}
        for tb in run["taus"]:
            assert set(tb) == {"tau", "noisy_accuracy", "algorithms"}
            for entry in tb["algorithms"].values():
                assert {"precision", "recall", "f1", "removed",
                        "clean_accuracy"} <= set(entry)
    agg = blob["aggregates"]
    assert {"initial_accuracy_mean", "by_tau", "sensitivity"} <= set(agg)

    again = run_pipeline(cfg)
    assert again.to_json() == rep.to_json()


def test_pipeline_thread_cap_matches_serial(monkeypatch):
    cfg = _tiny_config(seeds=(0, 1, 2))
    monkeypatch.setenv("UQLED_THREADS", "1")
    serial = run_pipeline(cfg)
    monkeypatch.setenv("UQLED_THREADS", "3")
    parallel = run_pipeline(cfg)
    assert serial.to_json() == parallel.to_json()


def test_pipeline_removed_counts_shrink_training_set():
    cfg = _tiny_config()
    rep = run_pipeline(cfg)
    tb = rep.runs[0]["taus"][0]
    for entry in tb["algorithms"].values():
        assert 0 <= entry["removed"] <= cfg.n - cfg.test_size
