import numpy as np
import pytest

from database.database import reset_engine
from nets.classifier import build_classifier
from nets.denoiser import build_denoiser
from noise_synthesis.models import NoiseMethod, SaliencyNoise
from pipeline.config import StudyConfig
from pipeline.dataset import make_shapes_dataset
from pipeline.generation import GenerationRecord, localization_metrics
from pipeline.studies import StudyContext
from settings import reset_settings


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False,
                     help="run the end-to-end acceptance checks (trains models, slow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance"):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


TINY_SETTINGS = dict(
    image_size=8,
    dataset_count=12,
    object_size_min=3,
    object_size_max=4,
    clf_conv_channels=[2, 3],
    clf_epochs=1,
    clf_batch_size=4,
    ddpm_T=4,
    ddpm_channels=3,
    ddpm_depth=2,
    ddpm_time_dim=4,
    ddpm_embed_dim=4,
    ddpm_epochs=1,
    ddpm_batch_size=4,
    ig_k=3,
    ig_snapshot_steps=[0, 2],
    ig_log_every=0,
    study_cells=2,
    accuracy_samples_per_class=1,
)


@pytest.fixture
def tiny_config() -> StudyConfig:
    """A config small enough for whole studies to run in seconds"""
    return StudyConfig(**TINY_SETTINGS)


@pytest.fixture
def tiny_context(tiny_config) -> StudyContext:
    data = make_shapes_dataset(tiny_config.dataset_spec())
    clf = build_classifier(tiny_config.classifier_arch(), tiny_config.seed)
    den = build_denoiser(tiny_config.denoiser_arch(), tiny_config.seed)
    return StudyContext(tiny_config, data, clf, den, tiny_config.schedule())


@pytest.fixture
def square_image():
    """8x8 frame with a bright 4x4 square in the top-left quarter"""
    image = np.zeros((8, 8))
    image[1:5, 1:5] = 0.9
    return image


@pytest.fixture
def record_factory():
    """Build a GenerationRecord straight from noise values and an output image"""

    def make(noise_values, output, label="k=5", seed=0, target=0, percentile=80.0,
             method=NoiseMethod.INVERTING_GRADIENTS):
        noise = SaliencyNoise(values=np.asarray(noise_values, dtype=np.float64), method=method, steps_k=5,
                              source_id=f"src-{seed}", source_class=0, seed=seed)
        output = np.asarray(output, dtype=np.float64)
        return GenerationRecord(
            source_id=noise.source_id,
            source_class=0,
            target_class=target,
            noise=noise,
            output=output,
            metrics=localization_metrics(noise.values, output, percentile),
            sample_seed=seed,
            mask_percentile=percentile,
            label=label,
        )

    return make


@pytest.fixture
def registry_db(tmp_path, monkeypatch):
    """Point the run registry at a throwaway SQLite file"""
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    monkeypatch.setenv("OSN_DATABASE_URL", url)
    reset_settings()
    reset_engine()
    yield url
    reset_engine()
    reset_settings()
