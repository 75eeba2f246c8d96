"""Gaze-target prediction and head-pan control for desk-scale social scenes.

Submodules:
  scene       social-situation enumeration and timeline compilation
  features    feature encoding, gaze resampling, labeling, windowing, folds
  oracle      synthetic gaze personas with planted attention parameters
  numcore     tensor autodiff tape and the Adam optimizer
  models      LSTM and transformer sequence classifiers, checkpoints
  train       training protocol and k-fold cross-validation
  baselines   heuristic effective-attention models and GA fitting
  metrics     top-n accuracy, confusion matrices, accuracy reports
  controller  real-time head-pan decision loop
  service     interactive session service (TCP / WebSocket)
  cli         command-line entry points
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    baselines, controller, features, metrics, models, numcore, oracle,
    scene, train,
)
