import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from ganfault.exceptions import ParseError
from ganfault.ganae import GanAutoencoder
from ganfault.modelio import load_model, model_from_dict, model_to_dict, save_model
from ganfault.numerics import rng_stream
from ganfault.simulator import Normalization
from ganfault.svm import NuSVMClassifier


def toy(n=120, d=6, seed=0):
    rng = rng_stream(seed)
    return np.clip(0.5 + 0.2 * rng.standard_normal((n, 2)) @ rng.uniform(size=(2, d)) / 2, 0, 1)


@pytest.mark.parametrize("prior", ["orthogonal", "gaussian"])
def test_gan_round_trip(tmp_path, prior):
    X = toy()
    m = GanAutoencoder(encoding_dim=2, prior=prior, epochs=2, hidden=8, disc_hidden=(6,),
                       threshold="auto").fit(X)
    norm = Normalization(np.zeros(6), np.ones(6))
    path = tmp_path / "m.json"
    save_model(path, m, norm, window=1, stride=1)
    back, bnorm, window, stride = load_model(path)
    assert (window, stride) == (1, 1)
    np.testing.assert_array_equal(bnorm.hi, norm.hi)
    np.testing.assert_array_equal(back.decision_function(X), m.decision_function(X))
    np.testing.assert_array_equal(back.transform(X), m.transform(X))
    np.testing.assert_array_equal(back.predict(X), m.predict(X))
    source = X if prior == "orthogonal" else None
    np.testing.assert_array_equal(back.generate(5, 3, X_source=source), m.generate(5, 3, X_source=source))
    assert back.get_params() == m.get_params()
    assert back.threshold_ == m.threshold_
    np.testing.assert_array_equal(back.trace_.objective, m.trace_.objective)


def test_svm_round_trip(tmp_path):
    rng = rng_stream(1)
    X = rng.standard_normal((40, 3))
    y = np.where(X[:, 0] > 0, "normal", "fault")
    m = NuSVMClassifier(nu=0.4).fit(X, y)
    path = tmp_path / "s.json"
    save_model(path, m)
    back, norm, window, stride = load_model(path)
    assert norm is None and window is None
    probe = rng.standard_normal((20, 3))
    np.testing.assert_array_equal(back.decision_function(probe), m.decision_function(probe))
    np.testing.assert_array_equal(back.predict(probe), m.predict(probe))


def test_version_and_format_errors(tmp_path):
    rng = rng_stream(2)
    X = rng.standard_normal((20, 2))
    doc = model_to_dict(NuSVMClassifier(nu=0.5).fit(X, np.where(X[:, 1] > 0, "normal", "fault")))
    doc["version"] = 99
    with pytest.raises(ParseError, match="version"):
        model_from_dict(doc)
    doc["version"], doc["format"] = 1, "other"
    with pytest.raises(ParseError):
        model_from_dict(doc)
    path = tmp_path / "bad.json"
    path.write_text("{\n\n  nope")
    with pytest.raises(ParseError) as err:
        load_model(path)
    assert err.value.line == 3


def test_unfitted_model_rejected():
    with pytest.raises(NotFittedError):
        model_to_dict(GanAutoencoder())
    with pytest.raises(TypeError):
        model_to_dict(object())
