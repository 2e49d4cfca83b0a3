import numpy as np
import pytest

from pkdmamba.data import Dataset, synthetic_blobs
from pkdmamba.distill import (
    DistillHyper,
    Ensemble,
    ResidualMatrices,
    RunStore,
    TrainParams,
    derive_seed,
    ensemble_accuracy,
    ensemble_predict,
    find_weak_learner,
    first_round_check,
    kd_loss,
    prefix_accuracies,
    prefix_mean,
    residual_loss,
    run_pkd,
    train_model,
    train_teacher,
    update_matrices,
    weak_learner_check,
)
from pkdmamba.errors import CheckpointError, ParameterError, ShapeError
from pkdmamba.metrics import accuracy
from pkdmamba.models import StudentConfig, build_model, predict_logits, predict_proba, round_to_checkpoint
from pkdmamba.tensor import Tensor, check_gradients, cross_entropy, parameter, softmax
from pkdmamba.tensor.ops import softmax_array


def _probs(rng, n, labels):
    return softmax_array(rng.normal(size=(n, labels)))


# *** losses ***

def test_kd_loss_with_alpha_one_is_cross_entropy(rng):
    s = Tensor(rng.normal(size=(6, 4)))
    t = rng.normal(size=(6, 4))
    y = rng.integers(0, 4, size=6)
    assert kd_loss(s, t, y, DistillHyper(alpha=1.0)).item() == cross_entropy(s, y).item()


def test_kd_soft_term_vanishes_when_student_copies_teacher(rng):
    logits = rng.normal(size=(5, 3))
    loss = kd_loss(Tensor(logits), logits, np.zeros(5, dtype=int), DistillHyper(alpha=0.0, temperature=3.0))
    assert abs(loss.item()) < 1e-12


def test_kd_soft_term_matches_scaled_kl(rng):
    s = rng.normal(size=(4, 3))
    t = rng.normal(size=(4, 3))
    hyper = DistillHyper(alpha=0.0, temperature=2.0)
    p = softmax_array(t / 2.0)
    q = softmax_array(s / 2.0)
    expected = 4.0 * np.sum(p * (np.log(p) - np.log(q))) / 4
    assert kd_loss(Tensor(s), t, np.zeros(4, dtype=int), hyper).item() == pytest.approx(expected, rel=1e-10)


def test_kd_loss_gradients(rng):
    s = parameter(rng.normal(size=(4, 3)))
    t = rng.normal(size=(4, 3))
    y = np.array([0, 1, 2, 1])
    errors = check_gradients(lambda: kd_loss(s, t, y, DistillHyper(alpha=0.3, temperature=2.5)), [s])
    assert max(errors.values()) < 1e-7


def test_kd_loss_shape_mismatch(rng):
    with pytest.raises(ShapeError):
        kd_loss(Tensor(np.zeros((2, 3))), np.zeros((2, 4)), [0, 1])


def test_residual_loss_is_zero_without_residual(rng):
    g = _probs(rng, 5, 3)
    K = ResidualMatrices.uniform(5, 3)
    assert residual_loss(Tensor(g), g, K.K_plus, K.K_minus).item() == 0.0


def test_residual_loss_value(rng):
    f = _probs(rng, 4, 3)
    g = _probs(rng, 4, 3)
    K_plus = rng.uniform(size=(4, 3))
    K_minus = rng.uniform(size=(4, 3))
    hyper = DistillHyper(gamma=2.0, B_reg=1.5)
    sign = np.where(K_plus > K_minus, 1.0, -1.0)
    expected = -np.sum(np.log1p(sign * (f - g) / 3.0)) / 2.0
    got = residual_loss(Tensor(f), g, K_plus, K_minus, hyper).item()
    assert got == pytest.approx(expected, rel=1e-12)
    mean = residual_loss(Tensor(f), g, K_plus, K_minus, hyper, reduction="mean").item()
    assert mean == pytest.approx(expected / 4, rel=1e-12)


def test_residual_loss_clamps_and_counts():
    f = np.array([[1.0, 0.0]])
    g = np.array([[0.0, 1.0]])
    K = ResidualMatrices(np.array([[0.0, 0.5]]), np.array([[0.5, 0.0]]))
    stats = {}
    loss = residual_loss(Tensor(f), g, K.K_plus, K.K_minus, DistillHyper(B_reg=0.25), stats=stats)
    assert np.isfinite(loss.item())
    assert stats["clamped"] == 2


# *** residual matrices ***

def test_uniform_matrices_are_normalized():
    K = ResidualMatrices.uniform(8, 3)
    assert K.is_normalized()
    np.testing.assert_allclose(K.column_mass(), 1.0)
    with pytest.raises(ParameterError):
        ResidualMatrices(-np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(ShapeError):
        ResidualMatrices(np.ones((2, 2)), np.ones((2, 3)))


def test_weak_learner_check_rejects_a_copy_of_the_teacher(rng):
    g = _probs(rng, 10, 4)
    K = ResidualMatrices(rng.uniform(size=(10, 4)), rng.uniform(size=(10, 4)))
    result = weak_learner_check(g, g, K)
    assert result.passed is False
    np.testing.assert_array_equal(result.margins, np.zeros(4))


def test_weak_learner_check_margins(rng):
    f = _probs(rng, 6, 2)
    g = _probs(rng, 6, 2)
    K = ResidualMatrices(rng.uniform(size=(6, 2)), rng.uniform(size=(6, 2)))
    result = weak_learner_check(f, g, K)
    expected = ((K.K_plus - K.K_minus) * (f - g)).sum(axis=0)
    np.testing.assert_allclose(result.margins, expected)
    assert result.passed == bool(np.all(expected > 0))
    assert weak_learner_check(f, g, K, weak_margin=-10.0).passed


def test_weak_learner_check_with_models(tiny_cfg, tiny_data):
    student = build_model(tiny_cfg, seed=1)
    teacher = build_model(tiny_cfg, seed=2)
    K = ResidualMatrices.uniform(len(tiny_data), 2)
    direct = weak_learner_check(predict_proba(student, tiny_data.images), predict_proba(teacher, tiny_data.images), K)
    via_models = weak_learner_check(student, teacher, K, data=tiny_data)
    np.testing.assert_allclose(direct.margins, via_models.margins)


def test_first_round_check():
    labels = np.array([0, 1, 1, 2])
    sharp = np.eye(3)[labels] * 0.9 + 0.1 / 3
    result = first_round_check(sharp, labels, 3)
    assert result.passed and result.bootstrap
    flat = np.full((4, 3), 1 / 3)
    assert not first_round_check(flat, labels, 3).passed


def test_update_preserves_column_mass_over_many_rounds():
    rng = np.random.default_rng(42)
    K = ResidualMatrices.uniform(20, 3)
    for _ in range(1000):
        K = update_matrices(K, _probs(rng, 20, 3), _probs(rng, 20, 3), eta=rng.uniform(0.0, 2.0))
        assert np.max(np.abs(K.column_mass() - 1.0)) <= 1e-9
        assert np.all(K.K_plus >= 0) and np.all(K.K_minus >= 0)


def test_update_direction_and_zero_step(rng):
    K = ResidualMatrices.uniform(2, 1)
    f = np.array([[0.9], [0.1]])
    g = np.array([[0.1], [0.1]])
    updated = update_matrices(K, f, g, eta=1.0)
    assert updated.K_plus[0, 0] < updated.K_minus[0, 0]
    assert updated.K_plus[1, 0] == pytest.approx(updated.K_minus[1, 0])
    same = update_matrices(K, g, g, eta=1.0)
    np.testing.assert_array_equal(same.K_plus, K.K_plus)
    with pytest.raises(ParameterError):
        update_matrices(K, f, g, eta=-1.0)


def test_hyperparameter_ranges():
    with pytest.raises(ParameterError, match="alpha"):
        DistillHyper(alpha=1.5)
    with pytest.raises(ParameterError, match="temperature"):
        DistillHyper(temperature=0)
    with pytest.raises(ParameterError, match="batch_size"):
        TrainParams(batch_size=0)


# *** ensembles ***

def test_prefix_mean_sums_in_order():
    probs = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[0.5, 0.5]])]
    np.testing.assert_allclose(prefix_mean(probs, 2), [[0.5, 0.5]])
    np.testing.assert_allclose(prefix_mean(probs, 1), probs[0])


def test_ensemble_prefixes(tiny_cfg, tiny_data):
    students = [build_model(tiny_cfg, seed=s) for s in range(3)]
    ensemble = Ensemble(students)
    first = ensemble_predict(ensemble, tiny_data.images, t=1)
    np.testing.assert_allclose(first, predict_proba(students[0], tiny_data.images))
    full = ensemble_predict(ensemble, tiny_data.images)
    manual = sum(predict_proba(s, tiny_data.images) for s in students) / 3
    np.testing.assert_allclose(full, manual, atol=1e-14)
    accs = prefix_accuracies(ensemble, tiny_data.images, tiny_data.labels)
    assert len(accs) == 3
    assert accs[-1] == ensemble_accuracy(ensemble, tiny_data.images, tiny_data.labels, 2)
    with pytest.raises(ParameterError):
        ensemble_predict(ensemble, tiny_data.images, t=4)


def test_empty_ensemble_scores_at_chance():
    labels = np.array([0, 1, 0, 1])
    assert ensemble_accuracy(Ensemble(), np.zeros((4, 1, 4, 4)), labels, 2) == 0.5


def test_ensemble_is_worker_count_invariant(tiny_cfg, tiny_data, monkeypatch):
    ensemble = Ensemble([build_model(tiny_cfg, seed=s) for s in range(3)])
    single = ensemble_predict(ensemble, tiny_data.images)
    monkeypatch.setenv("PKD_WORKERS", "3")
    np.testing.assert_array_equal(single, ensemble_predict(ensemble, tiny_data.images))


# *** training and the distillation loop ***

def _ce(data):
    return lambda logits, idx: cross_entropy(logits, data.labels[idx])


def test_training_is_deterministic(tiny_cfg, tiny_data):
    params = TrainParams(lr=0.05, momentum=0.9, epochs=3, batch_size=4, dtype="float64", progress=False)
    runs = []
    for _ in range(2):
        model = build_model(tiny_cfg, seed=0, dtype="float64")
        result = train_model(model, tiny_data, _ce(tiny_data), params, seed=9)
        runs.append((result.history, model.state_dict()))
    assert runs[0][0] == runs[1][0]
    assert all(np.array_equal(runs[0][1][k], runs[1][1][k]) for k in runs[0][1])
    assert len(runs[0][0]) == 3


def test_training_stops_when_the_hook_asks(tiny_cfg, tiny_data):
    params = TrainParams(lr=0.01, epochs=10, batch_size=8, dtype="float64", progress=False)
    model = build_model(tiny_cfg, seed=0)
    result = train_model(model, tiny_data, _ce(tiny_data), params, seed=0, on_epoch=lambda epoch, loss: epoch == 1)
    assert result.epochs_trained == 2 and result.stopped_early


def test_zero_learning_rate_leaves_weights(tiny_cfg, tiny_data):
    params = TrainParams(lr=0.0, epochs=2, batch_size=8, dtype="float64", progress=False)
    model = build_model(tiny_cfg, seed=0)
    before = model.state_dict()
    train_model(model, tiny_data, _ce(tiny_data), params, seed=0)
    after = model.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 1) == derive_seed(0, 1, 1)
    assert len({derive_seed(0, r, k) for r in range(1, 4) for k in range(1, 4)}) == 9


def _tiny_run(tiny_cfg, tiny_data, store=None, rounds=2):
    ladder = (tiny_cfg.replace(state_dim=2, name="student-1"), tiny_cfg.replace(state_dim=4, name="student-2"),
              tiny_cfg.replace(n_blocks=2, name="student-3"))
    teacher = round_to_checkpoint(build_model(tiny_cfg.replace(n_blocks=2, state_dim=6, name="teacher"), seed=0))
    hyper = DistillHyper(rounds=rounds, epochs=2, weak_check_epochs=1, patience=2)
    params = TrainParams(lr=0.05, momentum=0.9, batch_size=8, dtype="float64", progress=False)
    return run_pkd(teacher, ladder, tiny_data, hyper, params, seed=4, store=store)


def test_pkd_rounds_move_up_the_ladder(tiny_cfg, tiny_data):
    result = _tiny_run(tiny_cfg, tiny_data, rounds=3)
    accepted = [r.rung for r in result.rounds if r.weak_learner]
    assert accepted == sorted(set(accepted))
    assert len(result.ensemble) == len(accepted)
    assert [row["round"] for row in result.rows] == sorted(row["round"] for row in result.rows)
    assert result.residuals.is_normalized()
    for row in result.rows:
        assert 0 < row["flops_fraction_of_teacher"] < 1


def test_pkd_run_is_reproducible(tiny_cfg, tiny_data):
    a = _tiny_run(tiny_cfg, tiny_data)
    b = _tiny_run(tiny_cfg, tiny_data)
    assert a.rows == b.rows
    np.testing.assert_array_equal(a.residuals.K_plus, b.residuals.K_plus)


def test_resumed_run_continues_identically(tmp_path, tiny_cfg, tiny_data):
    full = _tiny_run(tiny_cfg, tiny_data, store=RunStore(tmp_path / "full", "h"), rounds=2)
    partial_store = RunStore(tmp_path / "partial", "h")
    _tiny_run(tiny_cfg, tiny_data, store=partial_store, rounds=1)
    resumed = _tiny_run(tiny_cfg, tiny_data, store=partial_store, rounds=2)
    assert resumed.rows == full.rows
    np.testing.assert_array_equal(resumed.residuals.K_minus, full.residuals.K_minus)


def test_store_refuses_a_different_config(tmp_path, tiny_cfg, tiny_data):
    store = RunStore(tmp_path, "first")
    store.save_tail([])
    with pytest.raises(CheckpointError):
        RunStore(tmp_path, "second").load_records()


def test_empty_ladder_yields_no_rounds(tiny_cfg, tiny_data):
    teacher = build_model(tiny_cfg, seed=0)
    result = run_pkd(teacher, (), tiny_data, DistillHyper(rounds=2, epochs=1), TrainParams(progress=False), seed=0)
    assert len(result.ensemble) == 0
    assert result.rows == []
    assert not result.rounds[0].weak_learner


def test_dataset_fixture_is_float32(tiny_data):
    assert isinstance(tiny_data, Dataset)
    assert tiny_data.images.dtype == np.float32


def test_teacher_fits_synthetic_gratings():
    data = synthetic_blobs(n_per_class=20, n_classes=4, image_size=8, seed=0)
    cfg = StudentConfig(n_blocks=1, state_dim=8, patch_size=4, conv_width=4, n_classes=4, channels=1,
                        height=8, width=8, name="teacher")
    params = TrainParams(lr=0.05, momentum=0.9, clip_norm=5.0, epochs=20, batch_size=8, dtype="float64",
                         progress=False)
    teacher, result = train_teacher(cfg, data, params, seed=0)
    assert result.epochs_trained <= 20
    assert accuracy(predict_logits(teacher, data.images), data.labels) >= 0.99


# *** weak learner search ***

def _toy_task():
    """Two constant images, one per class, and a mildly confident teacher."""
    images = np.stack([np.full((1, 4, 4), 0.2), np.full((1, 4, 4), 0.8)])
    data = Dataset(images=images, labels=np.array([0, 1]), name="toy", split="train", n_classes=2)
    teacher_logits = np.array([[1.0, 0.0], [0.0, 1.0]])
    # an under-confident first student leaves K⁺ heavier on the true labels
    K = update_matrices(ResidualMatrices.uniform(2, 2), np.full((2, 2), 0.5), softmax_array(teacher_logits), eta=0.5)
    return data, teacher_logits, K


def test_toy_residual_is_learned_on_the_first_rung(tiny_cfg):
    data, teacher_logits, K = _toy_task()
    hyper = DistillHyper(epochs=50, weak_check_epochs=10, patience=50)
    params = TrainParams(lr=0.1, lr_decay=1.0, momentum=0.9, clip_norm=5.0, batch_size=2, dtype="float64",
                         progress=False)
    found = find_weak_learner((tiny_cfg,), K, teacher_logits, data, hyper, params, seed=0, round_index=2)
    assert found.weak_learner and found.rung == 1
    assert found.epochs_trained <= 50
    assert np.all(found.margins > 0)


def test_residual_loss_falls_on_the_toy_task(tiny_cfg):
    data, teacher_logits, K = _toy_task()
    teacher_probs = softmax_array(teacher_logits)
    params = TrainParams(lr=0.1, lr_decay=1.0, momentum=0.9, clip_norm=5.0, batch_size=2, dtype="float64",
                         progress=False)

    def loss_fn(logits, idx):
        k_plus, k_minus = K.rows(idx)
        return residual_loss(softmax(logits), teacher_probs[idx], k_plus, k_minus, reduction="mean")

    model = build_model(tiny_cfg, seed=5, dtype="float64")
    history = train_model(model, data, loss_fn, params, seed=0, epochs=10).history
    assert len(history) == 10
    assert history[-1] < history[0]
    assert np.polyfit(np.arange(10), history, 1)[0] < 0


def test_teacher_as_its_own_candidate_never_passes(tiny_cfg, tiny_data):
    teacher = build_model(tiny_cfg, seed=0)
    teacher_logits = predict_logits(teacher, tiny_data.images)
    K = ResidualMatrices.uniform(len(tiny_data), 2)
    hyper = DistillHyper(epochs=2, weak_check_epochs=1)
    params = TrainParams(lr=0.0, batch_size=8, dtype="float64", progress=False)
    seeds = []

    def reuse_teacher(cfg, seed):
        seeds.append(seed)
        return build_model(cfg, seed=0)

    found = find_weak_learner((tiny_cfg, tiny_cfg), K, teacher_logits, tiny_data, hyper, params, seed=1,
                              round_index=2, candidate_factory=reuse_teacher)
    assert not found.weak_learner and found.student is None
    assert [attempt.rung for attempt in found.rejected] == [1, 2]
    for attempt in found.rejected:
        np.testing.assert_array_equal(attempt.check.margins, np.zeros(2))
    assert seeds == [derive_seed(1, 2, 1), derive_seed(1, 2, 2)]
