"""GAN-based autoencoder fault detection for closed-loop systems."""

from .ganae import GanAutoencoder
from .grouptest import ManifoldPoint, two_sample_test
from .prior import PCAPrior
from .report import ConfusionReport, confusion_from_predictions
from .simulator import ClosedLoopSystem, Dataset, FaultSpec, simulate, window_normalize
from .svm import NuSVMClassifier

__all__ = [
    "ClosedLoopSystem",
    "ConfusionReport",
    "Dataset",
    "FaultSpec",
    "GanAutoencoder",
    "ManifoldPoint",
    "NuSVMClassifier",
    "PCAPrior",
    "confusion_from_predictions",
    "simulate",
    "two_sample_test",
    "window_normalize",
]

__version__ = "0.1.0"
