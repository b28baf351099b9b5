"""Versioned model files.

A model file is a JSON document::

    {
      "format": "ganfault-model",
      "version": 1,
      "kind": "gan-ae" | "nu-svm",
      "params": {...},            # estimator constructor arguments
      "state": {...},             # fitted arrays, as nested lists of floats
      "normalization": {"lo": [...], "hi": [...]} | null,
      "window": int | null,
      "stride": int | null
    }

Floats are written with ``repr`` precision, so a save/load round trip is
exact.
"""

import json

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .exceptions import ParseError
from .ganae import EpochRecord, GanAutoencoder, Networks, TrainingTrace
from .neural import Layer, MlpParams
from .prior import PCAPrior, PcaModel, SubspacePrior
from .simulator import Normalization
from .svm import NuSVMClassifier

MODEL_FORMAT = "ganfault-model"
MODEL_VERSION = 1


def _mlp_to_dict(params):
    return [{"activation": L.activation, "W": L.W.tolist(), "b": L.b.tolist()}
            for L in params.layers]


def _mlp_from_dict(layers):
    return MlpParams([Layer(np.array(L["W"], dtype=float), np.array(L["b"], dtype=float),
                            L["activation"]) for L in layers])


def _gan_state(model):
    state = {
        "encoding_dim": model.encoding_dim_,
        "n_features_in": model.n_features_in_,
        "logit_threshold": model.logit_threshold_,
        "train_index": model.train_index_.tolist(),
        "test_index": model.test_index_.tolist(),
        "n_iter": model.n_iter_,
        "E": _mlp_to_dict(model.nets_.E),
        "G": _mlp_to_dict(model.nets_.G),
        "D": _mlp_to_dict(model.nets_.D),
        "trace": [vars(r) for r in model.trace_.records],
        "prior": None,
    }
    if model.prior_ is not None:
        pca, sp = model.prior_.pca_, model.prior_.prior_
        state["prior"] = {
            "encoding_dim": model.prior_.encoding_dim_,
            "pca": {"mean": pca.mean.tolist(), "directions": pca.directions.tolist(),
                    "explained_variance": pca.explained_variance.tolist(),
                    "ratios": pca.ratios.tolist()},
            "basis": sp.basis.tolist(),
            "n_complement": sp.n_complement,
            "mean": sp.mean.tolist(),
            "center": sp.center,
        }
    return state


def _gan_restore(params, state):
    params = dict(params)
    params["disc_hidden"] = tuple(params["disc_hidden"])
    model = GanAutoencoder(**params)
    model.encoding_dim_ = int(state["encoding_dim"])
    model.n_features_in_ = int(state["n_features_in"])
    model.classes_ = np.array(["fault", "normal"])
    model.logit_threshold_ = float(state["logit_threshold"])
    model.threshold_ = float(1.0 / (1.0 + np.exp(-model.logit_threshold_)))
    model.train_index_ = np.array(state["train_index"], dtype=int)
    model.test_index_ = np.array(state["test_index"], dtype=int)
    model.n_iter_ = int(state["n_iter"])
    model.nets_ = Networks(_mlp_from_dict(state["E"]), _mlp_from_dict(state["G"]),
                           _mlp_from_dict(state["D"]))
    model.trace_ = TrainingTrace([EpochRecord(**r) for r in state["trace"]])
    pr = state["prior"]
    if pr is None:
        model.prior_ = None
    else:
        prior = PCAPrior(encoding_dim=pr["encoding_dim"], center=pr["center"])
        p = pr["pca"]
        prior.pca_ = PcaModel(*(np.array(p[k], dtype=float) for k in
                                ("mean", "directions", "explained_variance", "ratios")))
        prior.encoding_dim_ = int(pr["encoding_dim"])
        prior.prior_ = SubspacePrior(np.array(pr["basis"], dtype=float), int(pr["n_complement"]),
                                     np.array(pr["mean"], dtype=float), bool(pr["center"]))
        prior.n_features_in_ = model.n_features_in_
        prior.source_ = None
        model.prior_ = prior
    return model


def _svm_state(model):
    return {
        "classes": [str(c) for c in model.classes_],
        "support": model.support_.tolist(),
        "support_vectors": model.support_vectors_.tolist(),
        "dual_coef": model.dual_coef_.tolist(),
        "intercept": model.intercept_,
        "margin_scale": model.margin_scale_,
        "alpha": model.alpha_.tolist(),
        "y_signed": model.y_signed_.tolist(),
        "kkt_violation": model.kkt_violation_,
        "n_iter": model.n_iter_,
        "n_features_in": model.n_features_in_,
    }


def _svm_restore(params, state):
    model = NuSVMClassifier(**params)
    model.classes_ = np.array(state["classes"], dtype=object)
    model.support_ = np.array(state["support"], dtype=int)
    model.support_vectors_ = np.array(state["support_vectors"], dtype=float)
    model.dual_coef_ = np.array(state["dual_coef"], dtype=float)
    model.intercept_ = float(state["intercept"])
    model.margin_scale_ = float(state["margin_scale"])
    model.alpha_ = np.array(state["alpha"], dtype=float)
    model.y_signed_ = np.array(state["y_signed"], dtype=float)
    model.kkt_violation_ = float(state["kkt_violation"])
    model.n_iter_ = int(state["n_iter"])
    model.n_features_in_ = int(state["n_features_in"])
    return model


def _jsonable_params(model):
    out = {}
    for k, v in model.get_params().items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def model_to_dict(model, normalization=None, window=None, stride=None):
    if isinstance(model, (GanAutoencoder, NuSVMClassifier)):
        check_is_fitted(model)
    if isinstance(model, GanAutoencoder):
        kind, state = "gan-ae", _gan_state(model)
    elif isinstance(model, NuSVMClassifier):
        kind, state = "nu-svm", _svm_state(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": kind,
        "params": _jsonable_params(model),
        "state": state,
        "normalization": None if normalization is None else normalization.to_dict(),
        "window": window,
        "stride": stride,
    }


def model_from_dict(doc):
    """Returns ``(model, normalization, window, stride)``."""
    if doc.get("format") != MODEL_FORMAT:
        raise ParseError("not a ganfault model file")
    if doc.get("version") != MODEL_VERSION:
        raise ParseError(
            f"model file schema version {doc.get('version')!r} is not supported "
            f"(expected {MODEL_VERSION})"
        )
    kind = doc.get("kind")
    try:
        if kind == "gan-ae":
            model = _gan_restore(doc["params"], doc["state"])
        elif kind == "nu-svm":
            model = _svm_restore(doc["params"], doc["state"])
        else:
            raise ParseError(f"unknown model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from None
    norm = doc.get("normalization")
    return (model, None if norm is None else Normalization.from_dict(norm),
            doc.get("window"), doc.get("stride"))


def save_model(path, model, normalization=None, window=None, stride=None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, normalization, window, stride), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
    return model_from_dict(doc)
