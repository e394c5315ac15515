import numpy as np
import pytest

from autodiff import ComputationRecord, Tensor, gradient
from autodiff import ops
from errors import ContractViolation, ShapeMismatch
from nets.base import input_gradient, param_gradient
from nets.classifier import ClassifierArch, build_classifier, classifier_loss
from nets.denoiser import DenoiserArch, build_denoiser, denoiser_predict, sinusoidal_embedding
from nets.optim import SGD, Adam, make_optimizer
from nets.params import ParameterSet
from nets.toy import QuadraticModel
from nets.training import LabeledImages, TrainConfig, train_classifier


def _halves_dataset(count: int, size: int = 8, seed: int = 0) -> LabeledImages:
    """Class 0 is bright on the left half, class 1 on the right half"""
    rng = np.random.default_rng(seed)
    labels = np.arange(count) % 2
    images = rng.normal(0.0, 0.05, size=(count, size, size))
    half = size // 2
    images[labels == 0, :, :half] += 1.0
    images[labels == 1, :, half:] += 1.0
    return LabeledImages(images, labels)


def test_quadratic_param_gradient():
    model = QuadraticModel([1.0, 2.0])
    g = param_gradient(model, np.array([3.0, 4.0]), 0)
    np.testing.assert_allclose(g.data, [33.0, 44.0])


def test_param_gradient_is_deterministic():
    clf = build_classifier(ClassifierArch(image_size=8, conv_channels=(2, 2)), seed=4)
    x = np.random.default_rng(0).random((8, 8))
    a = param_gradient(clf, x, 1).data
    b = param_gradient(clf, x, 1).data
    np.testing.assert_array_equal(a, b)
    assert a.shape == (clf.parameter_count,)


def test_param_gradient_matches_flattened_parameter_order():
    clf = build_classifier(ClassifierArch(image_size=8, conv_channels=(2, 2)), seed=1)
    x = np.random.default_rng(1).random((8, 8))
    flat = param_gradient(clf, x, 0).data
    record = ComputationRecord()
    bound = clf.parameters.bind(record)
    grads = gradient(clf.loss(Tensor(x), 0, bound), list(bound.values()))
    np.testing.assert_allclose(flat, np.concatenate([g.data.ravel() for g in grads]))


def test_input_gradient_of_quadratic_model():
    model = QuadraticModel([1.0, -2.0])
    np.testing.assert_allclose(input_gradient(model, np.array([3.0, 0.0]), 0), [3.0, -6.0])


def test_build_classifier_seeding():
    arch = ClassifierArch()
    a = build_classifier(arch, seed=7)
    b = build_classifier(arch, seed=7)
    c = build_classifier(arch, seed=8)
    assert a.parameters.equals(b.parameters)
    assert not a.parameters.equals(c.parameters)


def test_default_classifier_parameter_count():
    clf = build_classifier(ClassifierArch(), seed=0)
    assert clf.parameter_count == 2402
    assert clf.parameter_count < 200_000


def test_build_classifier_rejects_incompatible_shapes():
    with pytest.raises(ContractViolation):
        build_classifier(ClassifierArch(image_size=10), seed=0)


def test_classifier_rejects_wrong_input_shape():
    clf = build_classifier(ClassifierArch(image_size=8, conv_channels=(2, 2)), seed=0)
    with pytest.raises(ShapeMismatch):
        clf.forward(np.zeros((6, 6)))


def test_uniform_scores_give_ln2():
    clf = build_classifier(ClassifierArch(image_size=8, conv_channels=(2, 2)), seed=0)
    for name in clf.parameters:
        clf.parameters[name] = np.zeros_like(clf.parameters[name])
    loss = classifier_loss(clf, np.random.default_rng(0).random((8, 8)), 1)
    assert loss.item() == pytest.approx(np.log(2.0))


def test_loss_falls_as_true_class_score_grows():
    losses = [ops.softmax_cross_entropy(Tensor([s, 0.0]), [0]).item() for s in (-2.0, 0.0, 2.0, 8.0, 20.0)]
    assert all(a > b for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-8


def test_classifier_loss_rejects_bad_label():
    clf = build_classifier(ClassifierArch(image_size=8, conv_channels=(2, 2)), seed=0)
    with pytest.raises(ContractViolation):
        classifier_loss(clf, np.zeros((8, 8)), 2)


def test_parameter_set_flatten_round_trip():
    params = ParameterSet({"w": np.arange(6.0).reshape(2, 3), "b": np.array([7.0, 8.0])})
    flat = params.flatten()
    np.testing.assert_array_equal(flat, [0, 1, 2, 3, 4, 5, 7, 8])
    assert params.unflatten(flat).equals(params)
    with pytest.raises(ShapeMismatch):
        params.unflatten(np.zeros(3))


def test_parameter_set_rejects_mismatched_checkpoint():
    params = ParameterSet({"w": np.zeros(2)})
    with pytest.raises(ContractViolation):
        params.load_named_arrays({"v": np.zeros(2)})
    with pytest.raises(ShapeMismatch):
        params.load_named_arrays({"w": np.zeros(3)})


def test_optimizers_step_downhill():
    for optimizer in (SGD(0.1), Adam(0.1)):
        params = {"x": np.array([1.0, -1.0])}
        optimizer.step(params, {"x": np.array([2.0, -2.0])})
        assert params["x"][0] < 1.0 and params["x"][1] > -1.0
    with pytest.raises(ContractViolation):
        make_optimizer("rmsprop", 0.1)
    with pytest.raises(ContractViolation):
        SGD(0.0)


def test_train_classifier_separates_halves():
    data = _halves_dataset(80)
    cfg = TrainConfig(epochs=20, batch_size=16, learning_rate=0.01, seed=0, holdout_fraction=0.25)
    clf = train_classifier(data, cfg, ClassifierArch(image_size=8, conv_channels=(4, 4)))
    assert clf.summary["heldout_size"] == 20
    assert clf.summary["heldout_accuracy"] >= 0.95


def test_train_classifier_memorizes_one_sample():
    image = _halves_dataset(1).images[0]
    data = LabeledImages(np.stack([image] * 4), np.zeros(4, dtype=np.int64))
    cfg = TrainConfig(epochs=200, batch_size=4, learning_rate=0.05, seed=0, holdout_fraction=0.0)
    clf = train_classifier(data, cfg, ClassifierArch(image_size=8, conv_channels=(2, 2)))
    assert clf.summary["epoch_losses"][-1] < 0.01


def test_train_classifier_is_deterministic():
    data = _halves_dataset(16)
    cfg = TrainConfig(epochs=2, batch_size=8, seed=3)
    arch = ClassifierArch(image_size=8, conv_channels=(2, 2))
    assert train_classifier(data, cfg, arch).parameters.equals(train_classifier(data, cfg, arch).parameters)


def test_train_classifier_rejects_empty_dataset():
    empty = LabeledImages(np.zeros((0, 8, 8)), np.zeros(0, dtype=np.int64))
    with pytest.raises(ContractViolation):
        train_classifier(empty, TrainConfig(), ClassifierArch(image_size=8))


def _tiny_denoiser(seed: int = 0):
    return build_denoiser(DenoiserArch(num_timesteps=10, channels=3, depth=3, time_dim=6, embed_dim=5), seed)


def test_denoiser_predict_is_deterministic_and_shape_preserving():
    den = _tiny_denoiser()
    x = np.random.default_rng(2).standard_normal((6, 6))
    a = den.predict(x, 4, 1)
    b = den.predict(x, 4, 1)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (6, 6)
    batch = denoiser_predict(den, np.stack([x, x]), np.array([1, 10]), np.array([0, 1]))
    assert batch.shape == (2, 6, 6)


def test_denoiser_depends_on_timestep_and_class():
    den = _tiny_denoiser()
    x = np.random.default_rng(3).standard_normal((6, 6))
    assert not np.array_equal(den.predict(x, 1, 0), den.predict(x, 9, 0))
    assert not np.array_equal(den.predict(x, 5, 0), den.predict(x, 5, 1))


@pytest.mark.parametrize("t, c", [(0, 0), (11, 0), (3, 2), (3, -1)])
def test_denoiser_rejects_out_of_range_inputs(t, c):
    with pytest.raises(ContractViolation):
        _tiny_denoiser().predict(np.zeros((6, 6)), t, c)


def test_sinusoidal_embedding_shape():
    emb = sinusoidal_embedding(np.array([1, 2, 3]), 7)
    assert emb.shape == (3, 7)
    np.testing.assert_array_equal(emb[:, -1], 0.0)
