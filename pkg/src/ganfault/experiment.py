"""End-to-end benchmark on the synthetic plant.

A benchmark pairs a fault-free training run with a held-out test run in
which three faults (sensor bias, setpoint offset, stuck actuator) are
switched on in turn. The same seed always rebuilds the same data.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError
from .ganae import GanAutoencoder
from .report import confusion_from_predictions
from .simulator import ClosedLoopSystem, FaultSpec, simulate, window_normalize
from .svm import NuSVMClassifier, cross_validate_nu


def default_test_faults(horizon=4320):
    """Three non-overlapping faults spread across a test run of ``horizon`` steps."""
    span = horizon // 6
    return (
        FaultSpec("sensor-bias", 0, 4.0, span, 2 * span, "bias_y0"),
        FaultSpec("setpoint-offset", 2, -1.0, 5 * span // 2, 7 * span // 2, "setpoint_y2"),
        FaultSpec("stuck-actuator", 0, 0.25, 4 * span, 5 * span, "stuck_u0"),
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    window: int = 8
    stride: int = 2
    train_horizon: int = 5760
    test_horizon: int = 4320
    test_seed_offset: int = 1000
    svm_seed_offset: int = 2000
    faults: tuple = field(default_factory=default_test_faults)

    def system(self):
        return ClosedLoopSystem.default()


def make_benchmark(seed, config=None):
    """``(train, test)`` windows; normalization comes from the training run."""
    cfg = config or BenchmarkConfig()
    system = cfg.system()
    train = window_normalize(simulate(system, cfg.train_horizon, seed=seed), cfg.window, cfg.stride)
    test_raw = simulate(system, cfg.test_horizon, cfg.faults, seed=seed + cfg.test_seed_offset)
    test = window_normalize(test_raw, cfg.window, cfg.stride, norm=train.norm)
    return train, test


def make_svm_training_set(seed, config=None):
    """Labeled windows for the baseline: normal first half, fault type 1 second half.

    The run has the same length and windowing as the detector's training
    run, so both methods see the same number of windows.
    """
    cfg = config or BenchmarkConfig()
    f1 = cfg.faults[0]
    h = cfg.train_horizon
    fault = FaultSpec(f1.kind, f1.channel, f1.offset, h // 2, h, f1.name)
    raw = simulate(cfg.system(), h, [fault], seed=seed + cfg.svm_seed_offset)
    return window_normalize(raw, cfg.window, cfg.stride)


@dataclass
class DetectorResult:
    model: object
    report: object
    predictions: np.ndarray
    first_recon: float
    final_recon: float
    fault_tpr_by_type: dict


def _per_type_tpr(labels, predictions):
    out = {}
    for lab in sorted(set(labels) - {"normal"}):
        mask = labels == lab
        out[lab] = float(np.mean(predictions[mask] == "fault"))
    return out


def evaluate_detector(train, test, encoding_dim=None, random_state=0, **params):
    """Fit a :class:`GanAutoencoder` on ``train`` and score it on ``test``."""
    model = GanAutoencoder(encoding_dim=encoding_dim, random_state=random_state, **params)
    model.fit(train.X)
    pred = model.predict(test.X)
    labels = np.asarray(test.labels)
    report = confusion_from_predictions(labels, pred, name=f"gan-ae ({model.prior} prior)")
    rec = model.trace_.test_recon
    first = float(rec[0]) if len(rec) else float("nan")
    final = float(rec[-1]) if len(rec) else float("nan")
    return DetectorResult(model, report, pred, first, final, _per_type_tpr(labels, pred))


def evaluate_svm(svm_train, test, nu_grid=(0.5, 0.6, 0.7, 0.8, 0.9), folds=5, seed=0,
                 **svm_params):
    """Cross-validate nu, refit on all labeled windows and score on ``test``."""
    y = np.asarray(svm_train.binary_labels)
    best_nu, table = cross_validate_nu(svm_train.X, y, nu_grid, folds, seed, **svm_params)
    model = NuSVMClassifier(nu=best_nu, **svm_params).fit(svm_train.X, y)
    pred = model.predict(test.X)
    labels = np.asarray(test.labels)
    report = confusion_from_predictions(labels, pred, name=f"nu-svm (nu={best_nu:g})")
    res = DetectorResult(model, report, pred, float("nan"), float("nan"),
                         _per_type_tpr(labels, pred))
    res.cv_table = table
    return res


@dataclass
class ComparisonRow:
    seed: int
    orthogonal: DetectorResult
    gaussian: DetectorResult
    svm: DetectorResult

    @property
    def prior_wins(self):
        return self.orthogonal.report.TNR > self.gaussian.report.TNR

    @property
    def normal_wins(self):
        s = self.svm.report.TPR
        return self.orthogonal.report.TPR > s and self.gaussian.report.TPR > s


def compare_methods(seeds, config=None, detector_params=None, svm_params=None, log=None):
    """Orthogonal prior vs gaussian prior vs nu-SVM, one row per seed."""
    if not seeds:
        raise DomainError("need at least one seed")
    detector_params = dict(detector_params or {})
    svm_params = dict(svm_params or {})
    rows = []
    for seed in seeds:
        train, test = make_benchmark(seed, config)
        res = {}
        for prior in ("orthogonal", "gaussian"):
            res[prior] = evaluate_detector(train, test, random_state=seed, prior=prior,
                                           **detector_params)
        svm = evaluate_svm(make_svm_training_set(seed, config), test, seed=seed, **svm_params)
        row = ComparisonRow(seed, res["orthogonal"], res["gaussian"], svm)
        rows.append(row)
        if log is not None:
            log(f"seed {seed}: fault TPR orth={row.orthogonal.report.TNR:.3f} "
                f"gauss={row.gaussian.report.TNR:.3f}; normal TPR orth={row.orthogonal.report.TPR:.3f} "
                f"gauss={row.gaussian.report.TPR:.3f} svm={row.svm.report.TPR:.3f}")
    return rows
