from nets.base import Model, input_gradient, param_gradient
from nets.classifier import Classifier, ClassifierArch, build_classifier, classifier_loss
from nets.denoiser import Denoiser, DenoiserArch, build_denoiser, denoiser_predict
from nets.optim import SGD, Adam, make_optimizer
from nets.params import ParameterSet
from nets.toy import QuadraticModel
from nets.training import LabeledImages, TrainConfig, accuracy, train_classifier

__all__ = [
    "Adam",
    "Classifier",
    "ClassifierArch",
    "Denoiser",
    "DenoiserArch",
    "LabeledImages",
    "Model",
    "ParameterSet",
    "QuadraticModel",
    "SGD",
    "TrainConfig",
    "accuracy",
    "build_classifier",
    "build_denoiser",
    "classifier_loss",
    "denoiser_predict",
    "input_gradient",
    "make_optimizer",
    "param_gradient",
    "train_classifier",
]
