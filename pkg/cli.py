"""
Command-line entry point.

    python cli.py <command> [--config FILE] [--seed N] [--out DIR] [--precision f32|f64] ...

Commands share one output directory: ``train-classifier`` and
``train-ddpm`` leave ``classifier.osna`` / ``denoiser.osna`` there, the
later commands read them back. The dataset is regenerated from the
config wherever it is needed.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from autodiff import set_default_precision
from database.registry import register_run
from diffusion.training import evaluate_epsilon_mse, train_denoiser
from errors import ArchiveError, ContractViolation, PGMParseError
from nets.classifier import Classifier, build_classifier
from nets.denoiser import Denoiser, build_denoiser
from nets.training import train_classifier
from noise_synthesis.inversion import invert_gradients
from pipeline.archive import load_checkpoint, load_noise, save_archive, save_checkpoint, save_noise
from pipeline.config import StudyConfig, load_config
from pipeline.dataset import ShapesDataset, make_shapes_dataset
from pipeline.evaluation import sample_class_accuracy
from pipeline.generation import (
    export_trajectory,
    generate_conditioned,
    generate_from_noise,
    saliency_noise_from_snapshot,
    target_gradient,
)
from pipeline.pgm import encode_pgm
from pipeline.reports import csv_text, write_reports
from pipeline.studies import (
    StudyContext,
    agreement_rate,
    run_altmaps_study,
    run_manipulation_study,
    run_step_study,
)
from settings import configure_logging, get_settings

logger = logging.getLogger("cli")

CLASSIFIER_FILE = "classifier.osna"
DENOISER_FILE = "denoiser.osna"


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="flat key = value study config")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: OSN_OUT_DIR)")
    parser.add_argument("--precision", choices=["f32", "f64"], default=None, help="overrides the config precision")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osn", description="Object Saliency Noise experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    add_common_flags(sub.add_parser("make-dataset", help="render the shapes dataset"))
    add_common_flags(sub.add_parser("train-classifier", help="train the shapes classifier"))
    add_common_flags(sub.add_parser("train-ddpm", help="train the class-conditioned denoiser"))

    p = sub.add_parser("invert", help="invert a source image's parameter gradient")
    add_common_flags(p)
    p.add_argument("--source", type=int, default=0, help="dataset index of the source image")

    p = sub.add_parser("generate", help="sample from Object Saliency Noise")
    add_common_flags(p)
    p.add_argument("--source", type=int, default=0, help="dataset index of the source image")
    p.add_argument("--noise", type=Path, default=None, help="reuse a noise archive instead of inverting")
    p.add_argument("--export-trajectory", action="store_true", help="write every kept x_t as PGM")

    add_common_flags(sub.add_parser("study-steps", help="localization over inversion step counts"))
    add_common_flags(sub.add_parser("study-manip", help="rotated / flipped noise"))
    add_common_flags(sub.add_parser("study-altmaps", help="FGSM and feature-map noise"))
    add_common_flags(sub.add_parser("evaluate", help="per-class sample accuracy and eps-MSE of the denoiser"))
    return parser


class Workspace:
    """Resolved config, output directory and the trained models that live there"""

    def __init__(self, args: argparse.Namespace):
        settings = get_settings()
        config = load_config(args.config, seed=args.seed, precision=args.precision)
        # OSN_PRECISION / OSN_WORKERS fill in what neither the file nor the flags set
        unset = {"precision": settings.precision, "workers": settings.workers}
        self.config: StudyConfig = config.model_copy(
            update={k: v for k, v in unset.items() if k not in config.model_fields_set}
        )
        self.out = Path(args.out if args.out is not None else settings.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        set_default_precision(self.config.precision)
        self._data: Optional[ShapesDataset] = None

    @property
    def data(self) -> ShapesDataset:
        if self._data is None:
            self._data = make_shapes_dataset(self.config.dataset_spec())
        return self._data

    def write_config(self) -> None:
        (self.out / "config.txt").write_text(self.config.to_text(), encoding="utf-8")

    def classifier(self) -> Classifier:
        clf = build_classifier(self.config.classifier_arch(), self.config.seed)
        load_checkpoint(self.out / CLASSIFIER_FILE, clf.parameters, "classifier")
        return clf

    def denoiser(self) -> Denoiser:
        den = build_denoiser(self.config.denoiser_arch(), self.config.seed)
        load_checkpoint(self.out / DENOISER_FILE, den.parameters, "denoiser")
        return den

    def study_context(self) -> StudyContext:
        return StudyContext(self.config, self.data, self.classifier(), self.denoiser(), self.config.schedule())

    def source(self, index: int):
        if not 0 <= index < len(self.data):
            raise ContractViolation(f"source index {index} outside the {len(self.data)}-image dataset")
        return self.data.images[index], int(self.data.labels[index]), self.data.source_id(index)


def cmd_make_dataset(ws: Workspace, args) -> None:
    data = ws.data
    save_archive(
        {"images": data.images, "labels": data.labels, "masks": data.masks, "centroids": data.centroids},
        ws.out / "dataset.osna",
        {"kind": "dataset", "spec": data.spec.model_dump(mode="json")},
    )
    for i in range(min(8, len(data))):
        encode_pgm(data.images[i], ws.out / "dataset" / f"{data.source_id(i)}.pgm")


def cmd_train_classifier(ws: Workspace, args) -> None:
    clf = train_classifier(ws.data.labeled(), ws.config.classifier_train_config(), ws.config.classifier_arch())
    save_checkpoint(clf.parameters, ws.out / CLASSIFIER_FILE, "classifier")
    rows = [{"epoch": i + 1, "loss": loss} for i, loss in enumerate(clf.summary["epoch_losses"])]
    (ws.out / "classifier_training.csv").write_text(csv_text(["epoch", "loss"], rows), encoding="utf-8")
    logger.info(f"held-out accuracy {clf.summary['heldout_accuracy']:.4f}")


def cmd_train_ddpm(ws: Workspace, args) -> None:
    sched = ws.config.schedule()
    den = train_denoiser(ws.data.labeled_model_range(), sched, ws.config.denoiser_train_config(),
                         ws.config.denoiser_arch())
    save_checkpoint(den.parameters, ws.out / DENOISER_FILE, "denoiser")
    rows = [{"epoch": i + 1, "eps_mse": loss} for i, loss in enumerate(den.summary["epoch_losses"])]
    (ws.out / "denoiser_training.csv").write_text(csv_text(["epoch", "eps_mse"], rows), encoding="utf-8")


def cmd_invert(ws: Workspace, args) -> None:
    clf = ws.classifier()
    x_star, y, source_id = ws.source(args.source)
    ig = ws.config.ig_config(ws.config.seed)
    snapshots = invert_gradients(clf, target_gradient(clf, x_star, y), y, ig)
    rows = []
    for snap in snapshots:
        encode_pgm(snap.image, ws.out / "invert" / f"{source_id}_k{snap.step}.pgm")
        rows.append({"step": snap.step, "objective": snap.objective})
    noise = saliency_noise_from_snapshot(snapshots[-1], source_id, y, ws.config.seed)
    save_noise(noise, ws.out / "invert" / f"{source_id}_noise.osna")
    (ws.out / "invert" / "objective.csv").write_text(csv_text(["step", "objective"], rows), encoding="utf-8")


def cmd_generate(ws: Workspace, args) -> None:
    cfg = ws.config
    den = ws.denoiser()
    sched = cfg.schedule()
    gen = cfg.generation_config(cfg.seed)
    if args.export_trajectory:
        gen = gen.model_copy(update={"keep_trajectory": True})
    if args.noise is not None:
        noise = load_noise(args.noise)
        records = [generate_from_noise(noise, t, den, sched, gen, label=noise.tag) for t in cfg.targets]
    else:
        x_star, y, source_id = ws.source(args.source)
        records = generate_conditioned(x_star, y, cfg.ig_k, cfg.targets, ws.classifier(), den, sched, gen, source_id)
    out = ws.out / "generate"
    save_noise(records[0].noise, out / f"{records[0].source_id or 'noise'}_noise.osna")
    encode_pgm(records[0].noise.values, out / "noise.pgm")
    rows = []
    for r in records:
        encode_pgm(r.output, out / f"output_class{r.target_class}.pgm")
        if r.trajectory is not None:
            export_trajectory(r.trajectory, out / f"trajectory_class{r.target_class}")
        rows.append({
            "source_id": r.source_id, "method": r.method, "target_class": r.target_class,
            "iou": r.metrics.saliency_iou, "centroid_offset": r.metrics.centroid_offset, "blank": r.metrics.blank,
        })
    columns = ["source_id", "method", "target_class", "iou", "centroid_offset", "blank"]
    (out / "records.csv").write_text(csv_text(columns, rows), encoding="utf-8")


def _run_study(ws: Workspace, command: str, runner) -> None:
    result = runner(ws.study_context())
    notes: List[str] = []
    if command == "study-manip":
        for name in ws.config.manipulations:
            label = f"manip={name}"
            notes.append(f"{label}: centroid agreement {agreement_rate(result.extras, label):.3f}")
    write_reports(ws.out / command, command, result.reports, result.extras, notes)
    register_run(command, ws.config.seed, ws.config.model_dump(mode="json"), str(ws.out / command), result.reports)


def cmd_evaluate(ws: Workspace, args) -> None:
    cfg = ws.config
    den = ws.denoiser()
    sched = cfg.schedule()
    accuracy = sample_class_accuracy(den, sched, ws.classifier(), cfg.accuracy_samples_per_class, cfg.seed,
                                     (cfg.image_size, cfg.image_size))
    mse = evaluate_epsilon_mse(den, ws.data.labeled_model_range(), sched, cfg.seed)
    rows = [{"class_id": c, "sample_accuracy": acc} for c, acc in sorted(accuracy.items())]
    (ws.out / "evaluate").mkdir(parents=True, exist_ok=True)
    (ws.out / "evaluate" / "accuracy.csv").write_text(csv_text(["class_id", "sample_accuracy"], rows),
                                                       encoding="utf-8")
    (ws.out / "evaluate" / "summary.txt").write_text(
        "\n".join([f"class {c}: sample accuracy {a:.4f}" for c, a in sorted(accuracy.items())]
                  + [f"eps-MSE on the dataset: {mse:.6f}", f"min class accuracy: {min(accuracy.values()):.4f}"])
        + "\n",
        encoding="utf-8",
    )


COMMANDS = {
    "make-dataset": cmd_make_dataset,
    "train-classifier": cmd_train_classifier,
    "train-ddpm": cmd_train_ddpm,
    "invert": cmd_invert,
    "generate": cmd_generate,
    "study-steps": lambda ws, args: _run_study(ws, "study-steps", run_step_study),
    "study-manip": lambda ws, args: _run_study(ws, "study-manip", run_manipulation_study),
    "study-altmaps": lambda ws, args: _run_study(ws, "study-altmaps", run_altmaps_study),
    "evaluate": cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(get_settings().log_level)
    try:
        ws = Workspace(args)
        ws.write_config()
        COMMANDS[args.command](ws, args)
    except (ContractViolation, ArchiveError, PGMParseError, ValidationError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    logger.info(f"{args.command} finished, outputs in {ws.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
