from pipeline.archive import load_archive, load_checkpoint, load_noise, save_archive, save_checkpoint, save_noise
from pipeline.config import StudyConfig, load_config
from pipeline.dataset import DatasetSpec, ShapesDataset, make_shapes_dataset
from pipeline.evaluation import EvalReport, evaluate_localization, sample_class_accuracy
from pipeline.generation import GenerationConfig, GenerationRecord, export_trajectory, generate_conditioned
from pipeline.masks import iou, mask_centroid, object_mask_of_output
from pipeline.pgm import decode_pgm, encode_pgm
from pipeline.studies import StudyContext, run_altmaps_study, run_manipulation_study, run_step_study

__all__ = [
    "DatasetSpec",
    "EvalReport",
    "GenerationConfig",
    "GenerationRecord",
    "ShapesDataset",
    "StudyConfig",
    "StudyContext",
    "decode_pgm",
    "encode_pgm",
    "evaluate_localization",
    "export_trajectory",
    "generate_conditioned",
    "iou",
    "load_archive",
    "load_checkpoint",
    "load_config",
    "load_noise",
    "make_shapes_dataset",
    "mask_centroid",
    "object_mask_of_output",
    "run_altmaps_study",
    "run_manipulation_study",
    "run_step_study",
    "sample_class_accuracy",
    "save_archive",
    "save_checkpoint",
    "save_noise",
]
