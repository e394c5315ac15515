"""
End-to-end checks on models trained with the default study config.

Slow (tens of minutes on a CPU); run with ``pytest --run-acceptance``.
"""

import numpy as np
import pytest

from diffusion.training import train_denoiser
from nets.training import train_classifier
from noise_synthesis import invert_gradients
from pipeline.config import StudyConfig
from pipeline.dataset import make_shapes_dataset, select_sources
from pipeline.evaluation import sample_class_accuracy
from pipeline.generation import target_gradient
from pipeline.studies import StudyContext, agreement_rate, run_manipulation_study, run_step_study

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def trained_context() -> StudyContext:
    config = StudyConfig(ig_snapshot_steps=[0, 1000, 5000], study_cells=20, ig_log_every=0)
    data = make_shapes_dataset(config.dataset_spec())
    clf = train_classifier(data.labeled(), config.classifier_train_config(), config.classifier_arch())
    sched = config.schedule()
    den = train_denoiser(data.labeled_model_range(), sched, config.denoiser_train_config(), config.denoiser_arch())
    return StudyContext(config, data, clf, den, sched)


@pytest.fixture(scope="module")
def step_study(trained_context):
    return run_step_study(trained_context)


def test_denoiser_samples_are_recognizable(trained_context):
    ctx = trained_context
    accuracy = sample_class_accuracy(ctx.den, ctx.sched, ctx.clf, ctx.config.accuracy_samples_per_class,
                                     ctx.config.seed, ctx.image_shape)
    assert min(accuracy.values()) >= 0.7


def test_inversion_objective_falls_with_steps(trained_context):
    ctx = trained_context
    ig_base = ctx.config.ig_config(0)
    ordered, reductions = 0, []
    for seed, index in enumerate(select_sources(ctx.data, 5, seed=0)):
        y = int(ctx.data.labels[index])
        g_star = target_gradient(ctx.clf, ctx.data.images[index], y)
        ig = ig_base.model_copy(update={"init_seed": seed})
        objective = {s.step: s.objective for s in invert_gradients(ctx.clf, g_star, y, ig)}
        ordered += objective[5000] < objective[1000] < objective[0]
        reductions.append(1.0 - objective[5000] / objective[0])
    assert ordered >= 4
    assert np.median(reductions) >= 0.5


def test_saliency_noise_localizes_better_than_gaussian(step_study):
    report = {r.label: r for r in step_study.reports}["k=5000"]
    assert report.summary.count >= 20
    assert report.summary.median_iou > report.baseline.median_iou
    assert report.sign_test.p_value < 0.05


def test_more_inversion_steps_do_not_hurt_localization(step_study):
    reports = {r.label: r for r in step_study.reports}
    assert reports["k=5000"].summary.median_iou >= reports["k=1000"].summary.median_iou


def test_output_follows_manipulated_noise(trained_context):
    result = run_manipulation_study(trained_context, ["hflip", "rotate90"])
    for name in ("hflip", "rotate90"):
        rows = [r for r in result.extras if r["label"] == f"manip={name}"]
        assert len(rows) >= 20
        assert agreement_rate(result.extras, f"manip={name}") >= 0.7
