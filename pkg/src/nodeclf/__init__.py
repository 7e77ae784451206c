"""Text classifier with continuous hidden-state dynamics.

A document is featurized with TF-IDF, linearly encoded into a hidden
state, flowed from t=0 to t=1 under a learned derivative relu(W h + b),
and classified from the terminal state.  Gradients go through the flow by
integrating the sensitivity system backward in time, which keeps memory
independent of the solver's step count.  The same machinery powers the
interpretability outputs: per-word saliency scores and 2D vector-field /
trajectory exports.

Numeric kernels live in a compiled extension when it is built and in a
pure-Python twin otherwise; see :func:`backend_name`.
"""

from ._backend import backend_name
from .adjoint import AdjointState, backward, backward_discrete
from .dynamics import DynamicsParams, ParamGrad, evaluate, lipschitz_bound, vjp_params, vjp_state
from .evaluation import (EvalResult, LogisticModel, accuracy, auroc,
                         balanced_accuracy, benchmark, f1, f1_macro,
                         train_logistic)
from .interpret import (SaliencyReport, VectorFieldGrid, saliency, top_k,
                        trajectories, vector_field)
from .linalg import Matrix, Vector, axpy, dot, matvec, norm2, outer
from .model import (LabeledDataset, ModelGrad, NodeClassifier, TrainConfig,
                    forward, grad, init_classifier, loss, predict, train)
from .odesolve import SolverConfig, SolveStats, dense_trajectory, solve
from .serialize import load_model, save_model
from .text import TfidfModel, Vocabulary, fit, tokenize, transform

__all__ = [
    "AdjointState", "DynamicsParams", "EvalResult", "LabeledDataset",
    "LogisticModel", "Matrix", "ModelGrad", "NodeClassifier", "ParamGrad",
    "SaliencyReport", "SolveStats", "SolverConfig", "TfidfModel",
    "TrainConfig", "Vector", "VectorFieldGrid", "Vocabulary",
    "accuracy", "auroc", "axpy", "backend_name", "backward",
    "backward_discrete", "balanced_accuracy", "benchmark",
    "dense_trajectory", "dot", "evaluate", "f1", "f1_macro", "fit",
    "forward", "grad", "init_classifier", "lipschitz_bound", "load_model",
    "loss", "matvec", "norm2", "outer", "predict", "saliency",
    "save_model", "solve", "tokenize", "top_k", "train", "train_logistic",
    "trajectories", "transform", "vector_field", "vjp_params", "vjp_state",
]

__version__ = "0.1.0"
