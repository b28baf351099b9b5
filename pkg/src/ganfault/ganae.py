"""Adversarially trained autoencoder that learns to flag abnormal windows.

Encoder ``E`` (d -> d'), decoder/generator ``G`` (d' -> d) and
discriminator ``D`` (d -> 1) are trained together by gradient *ascent* on

    V = mean_x[(1 - L(x, G(E(x)))) + log D(x)] + mean_z[log(1 - D(G(z)))]

with ``L`` the reconstruction error normalised into [0, 1]. There is no
min-max game: every parameter climbs the same objective, so ``G`` is pushed
to produce samples that ``D`` can tell apart from normal data.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError, TrainingError
from .neural import AdamState, adam_step, init_mlp, mlp_backward, mlp_forward, recon_aggregate
from .numerics import rng_stream
from .prior import (
    PCAPrior,
    fit_pca,
    sample_gaussian_prior,
    sample_orthogonal_prior,
    select_encoding_dim,
)

logger = logging.getLogger(__name__)

EPS = 1e-7
PRIORS = ("orthogonal", "gaussian")


@dataclass
class Networks:
    E: object
    G: object
    D: object

    def arrays(self):
        return self.E.arrays() + self.G.arrays() + self.D.arrays()

    def copy(self):
        return Networks(self.E.copy(), self.G.copy(), self.D.copy())


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    train_recon: float
    test_recon: float


@dataclass
class TrainingTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def objective(self):
        return np.array([r.objective for r in self.records])

    @property
    def test_recon(self):
        return np.array([r.test_recon for r in self.records])

    @property
    def train_recon(self):
        return np.array([r.train_recon for r in self.records])


def build_networks(d, encoding_dim, rng, hidden=64, disc_hidden=(64, 32)):
    E = init_mlp([d, hidden, encoding_dim], ["tanh", "identity"], rng)
    G = init_mlp([encoding_dim, hidden, d], ["tanh", "sigmoid"], rng)
    D = init_mlp([d, *disc_hidden, 1], ["tanh"] * len(disc_hidden) + ["sigmoid"], rng)
    return Networks(E, G, D)


def _normalized_loss(X, R):
    d = X.shape[1]
    raw = np.sum((X - R) ** 2, axis=1) / d
    return np.minimum(raw, 1.0), raw < 1.0


def objective_and_grad(nets, X, Z, need_grad=True):
    """Batch estimate of V and, optionally, its gradient w.r.t. all parameters.

    Gradients follow :meth:`Networks.arrays` order. D outputs are clamped
    to ``[EPS, 1 - EPS]`` before the logs; clamped entries contribute zero
    gradient.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != nets.E.n_in:
        raise DomainError(f"data dimension {X.shape[1]} != model dimension {nets.E.n_in}")
    if Z.shape[1] != nets.G.n_in:
        raise DomainError(f"prior dimension {Z.shape[1]} != encoding dimension {nets.G.n_in}")
    if len(X) == 0 or len(Z) == 0:
        raise DomainError("batches must be nonempty")
    n1, n2 = len(X), len(Z)
    d = X.shape[1]

    codes, c_enc = mlp_forward(nets.E, X)
    R, c_rec = mlp_forward(nets.G, codes)
    L, unclamped = _normalized_loss(X, R)
    dx_raw, c_dx = mlp_forward(nets.D, X)
    G_z, c_gz = mlp_forward(nets.G, Z)
    dg_raw, c_dg = mlp_forward(nets.D, G_z)
    dx = np.clip(dx_raw[:, 0], EPS, 1 - EPS)
    dg = np.clip(dg_raw[:, 0], EPS, 1 - EPS)

    terms = {
        "reconstruction": float(np.mean(1.0 - L)),
        "data": float(np.mean(np.log(dx))),
        "noise": float(np.mean(np.log1p(-dg))),
    }
    V = terms["reconstruction"] + terms["data"] + terms["noise"]
    if not need_grad:
        return V, None, terms

    g_R = -(2.0 / (n1 * d)) * (R - X) * unclamped[:, None]
    gG_rec, g_codes = mlp_backward(nets.G, c_rec, g_R)
    gE, _ = mlp_backward(nets.E, c_enc, g_codes)

    inside_x = (dx_raw[:, 0] > EPS) & (dx_raw[:, 0] < 1 - EPS)
    gD_x, _ = mlp_backward(nets.D, c_dx, (inside_x / (n1 * dx))[:, None])

    inside_g = (dg_raw[:, 0] > EPS) & (dg_raw[:, 0] < 1 - EPS)
    gD_g, g_Gz = mlp_backward(nets.D, c_dg, (-inside_g.astype(float) / (n2 * (1.0 - dg)))[:, None])
    gG_z, _ = mlp_backward(nets.G, c_gz, g_Gz)

    grads = (
        gE
        + [a + b for a, b in zip(gG_rec, gG_z)]
        + [a + b for a, b in zip(gD_x, gD_g)]
    )
    for name, g in zip(("encoder", "generator", "discriminator"), (gE, gG_rec + gG_z, gD_x + gD_g)):
        if not all(np.all(np.isfinite(a)) for a in g):
            raise TrainingError(f"non-finite gradient in the {name} term")
    return V, grads, terms


def objective_upper_bound():
    """Supremum of V under the log clamping: perfect reconstruction, D at its clamps."""
    return 1.0 + 2.0 * np.log(1.0 - EPS)


def optimal_discriminator(p_data, p_noise):
    """``D*(x) = p_data / (p_data + p_noise)`` on a common finite support."""
    p_data = np.asarray(p_data, dtype=float)
    p_noise = np.asarray(p_noise, dtype=float)
    if p_data.shape != p_noise.shape:
        raise DomainError("distributions must share a support")
    if np.any(p_data < 0) or np.any(p_noise < 0):
        raise DomainError("probabilities must be nonnegative")
    denom = p_data + p_noise
    if np.any(denom == 0):
        raise DomainError(f"both distributions vanish at support points {np.flatnonzero(denom == 0).tolist()}")
    return p_data / denom


def tabular_discriminator_ascent(p_data, p_noise, steps=2000, lr=1.0, logits=None):
    """Climb the discriminator terms of V for a lookup-table ``D`` on a finite support.

    With the encoder and generator frozen, V restricted to ``D`` is
    ``sum_x p_data(x) log D(x) + p_noise(x) log(1 - D(x))``. ``D`` is
    parameterised through logits; returns the final table of ``D`` values.
    """
    p_data = np.asarray(p_data, dtype=float)
    p_noise = np.asarray(p_noise, dtype=float)
    theta = np.zeros_like(p_data) if logits is None else np.array(logits, dtype=float)
    for _ in range(steps):
        D = expit(theta)
        theta += lr * (p_data * (1.0 - D) - p_noise * D)
    return expit(theta)


class GanAutoencoder(ClassifierMixin, BaseEstimator):
    """Fault detector trained on normal windows only.

    ``predict`` returns ``"normal"`` where ``D(x) >= threshold`` and
    ``"fault"`` elsewhere. ``transform`` gives the encoder output.

    Parameters
    ----------
    encoding_dim : int or None
        Size of the code; None picks it from ``variance_threshold`` via PCA.
    prior : {"orthogonal", "gaussian"}
        Distribution of the generator's input.
    variance_threshold : float
        Cumulative PCA variance used when ``encoding_dim`` is None.
    epochs, batch_size, learning_rate : training schedule (Adam ascent).
    hidden : int
        Width of the encoder/decoder hidden layer.
    disc_hidden : tuple of int
        Hidden widths of the discriminator.
    threshold : float or "auto"
        Decision threshold on ``D(x)``. ``"auto"`` places it at the
        ``false_alarm_rate`` quantile of D over the held-out normal split.
    false_alarm_rate : float
        Target share of held-out normal windows flagged when
        ``threshold="auto"``.
    train_fraction : float
        Share of the data used for training; the rest tracks test
        reconstruction error.
    split : {"tail", "random"}
        ``"tail"`` holds out the last rows, which keeps overlapping
        windows of a time series on one side of the split.
    warm_start_epochs : int
        Optional plain-autoencoder epochs before joint training.
    center_prior : bool
        Centre data before projecting onto the prior basis.
    random_state : int
    """

    def __init__(
        self,
        encoding_dim=None,
        prior="orthogonal",
        variance_threshold=0.90,
        epochs=30,
        batch_size=64,
        learning_rate=1e-3,
        hidden=64,
        disc_hidden=(64, 32),
        threshold=0.5,
        false_alarm_rate=0.05,
        train_fraction=0.9,
        split="tail",
        warm_start_epochs=0,
        center_prior=True,
        random_state=0,
    ):
        self.encoding_dim = encoding_dim
        self.prior = prior
        self.variance_threshold = variance_threshold
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.hidden = hidden
        self.disc_hidden = disc_hidden
        self.threshold = threshold
        self.false_alarm_rate = false_alarm_rate
        self.train_fraction = train_fraction
        self.split = split
        self.warm_start_epochs = warm_start_epochs
        self.center_prior = center_prior
        self.random_state = random_state

    # -- training -----------------------------------------------------------

    def _sample_prior(self, n, rng, X_source=None):
        if self.prior == "orthogonal":
            if X_source is None:
                return self.prior_.sample(n, rng)
            return sample_orthogonal_prior(self.prior_.prior_, X_source, n, rng)
        return sample_gaussian_prior(self.encoding_dim_, n, rng)

    def fit(self, X, y=None):
        """Train on normal windows. If ``y`` is given, non-normal rows are dropped."""
        X = check_array(X, dtype=np.float64)
        if y is not None:
            y = np.asarray(y)
            if len(y) != len(X):
                raise DomainError("X and y lengths differ")
            X = X[y == "normal"]
        if self.prior not in PRIORS:
            raise DomainError(f"prior must be one of {PRIORS}, got {self.prior!r}")
        if not 0.0 < self.train_fraction <= 1.0:
            raise DomainError("train_fraction must lie in (0, 1]")
        if self.split not in ("tail", "random"):
            raise DomainError(f"split must be 'tail' or 'random', got {self.split!r}")
        n, d = X.shape
        rng = rng_stream(self.random_state)

        perm = rng.permutation(n) if self.split == "random" else np.arange(n)
        n_train = max(1, int(round(self.train_fraction * n)))
        self.train_index_ = np.sort(perm[:n_train])
        self.test_index_ = np.sort(perm[n_train:])
        X_train, X_test = X[self.train_index_], X[self.test_index_]

        if self.encoding_dim is None:
            k = min(select_encoding_dim(fit_pca(X_train).ratios, self.variance_threshold), d - 1)
        else:
            k = int(self.encoding_dim)
        if not 1 <= k < d:
            raise DomainError(f"encoding dim must satisfy 1 <= d' < {d}, got {k}")
        self.encoding_dim_ = k
        self.n_features_in_ = d
        self.classes_ = np.array(["fault", "normal"])
        if self.prior == "orthogonal":
            self.prior_ = PCAPrior(encoding_dim=k, center=self.center_prior).fit(X_train)
        else:
            self.prior_ = None

        self.nets_ = build_networks(d, k, rng, self.hidden, tuple(self.disc_hidden))
        self.trace_ = TrainingTrace()
        self.n_iter_ = 0
        if self.warm_start_epochs:
            self._warm_start(X_train, rng)
        self._adam = AdamState.zeros_like(self.nets_.arrays())
        for epoch in range(1, self.epochs + 1):
            self._run_epoch(epoch, X_train, X_test, rng)
        self._set_threshold(X_test if len(X_test) else X_train)
        return self

    def _set_threshold(self, X_holdout):
        if self.threshold == "auto":
            if not 0.0 <= self.false_alarm_rate < 1.0:
                raise DomainError("false_alarm_rate must lie in [0, 1)")
            self.logit_threshold_ = float(np.quantile(self._logits(X_holdout), self.false_alarm_rate))
        else:
            t = float(self.threshold)
            if not 0.0 < t < 1.0:
                raise DomainError("threshold must lie in (0, 1) or be 'auto'")
            self.logit_threshold_ = float(np.log(t) - np.log1p(-t))
        self.threshold_ = float(expit(self.logit_threshold_))

    def _warm_start(self, X_train, rng):
        arrays = self.nets_.E.arrays() + self.nets_.G.arrays()
        state = AdamState.zeros_like(arrays)
        n_e = len(self.nets_.E.arrays())
        for _ in range(self.warm_start_epochs):
            for batch in self._batches(len(X_train), rng):
                Xb = X_train[batch]
                codes, c_enc = mlp_forward(self.nets_.E, Xb)
                R, c_rec = mlp_forward(self.nets_.G, codes)
                gG, g_codes = mlp_backward(self.nets_.G, c_rec, 2.0 * (R - Xb) / Xb.size)
                gE, _ = mlp_backward(self.nets_.E, c_enc, g_codes)
                adam_step(arrays, gE[:n_e] + gG, state, lr=self.learning_rate)

    def _batches(self, n, rng):
        order = rng.permutation(n)
        bs = max(1, int(self.batch_size))
        return [order[i:i + bs] for i in range(0, n, bs)]

    def train_step(self, X_batch, rng):
        """One joint ascent step; returns V measured before the update."""
        Z = self._sample_prior(len(X_batch), rng)
        V, grads, _ = objective_and_grad(self.nets_, X_batch, Z)
        adam_step(self.nets_.arrays(), grads, self._adam, lr=self.learning_rate, ascent=True)
        self.n_iter_ += 1
        return V

    def _run_epoch(self, epoch, X_train, X_test, rng):
        values = []
        for batch in self._batches(len(X_train), rng):
            try:
                V = self.train_step(X_train[batch], rng)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from None
            if not np.isfinite(V):
                raise TrainingError(f"objective diverged at epoch {epoch}")
            values.append(V)
        train_rec = recon_aggregate(X_train, self.reconstruct(X_train))
        test_rec = (recon_aggregate(X_test, self.reconstruct(X_test))
                    if len(X_test) else float("nan"))
        rec = EpochRecord(epoch, float(np.mean(values)), train_rec, test_rec)
        self.trace_.records.append(rec)
        logger.debug("epoch %d: V=%.5f train_rec=%.5f test_rec=%.5f",
                     epoch, rec.objective, train_rec, test_rec)

    # -- inference ----------------------------------------------------------

    def _check(self, X):
        check_is_fitted(self, "nets_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected windows of length {self.n_features_in_}, got {X.shape[1]}")
        return X

    def _logits(self, X):
        # pre-activation of the final sigmoid unit
        return mlp_forward(self.nets_.D, X)[1].pre[-1][:, 0]

    def decision_function(self, X):
        """Log-odds of the discriminator, ``log D(x) - log(1 - D(x))``; positive leans normal."""
        return self._logits(self._check(X))

    def score_samples(self, X):
        """Discriminator output ``D(x)`` in (0, 1); close to 1 means normal."""
        return mlp_forward(self.nets_.D, self._check(X))[0][:, 0]

    def predict(self, X):
        return np.where(self.decision_function(X) >= self.logit_threshold_, "normal", "fault")

    def detect(self, X):
        """``(labels, D(x))`` for a batch of normalized windows."""
        X = self._check(X)
        return (np.where(self._logits(X) >= self.logit_threshold_, "normal", "fault"),
                mlp_forward(self.nets_.D, X)[0][:, 0])

    def transform(self, X):
        """Encode windows into R^{d'}."""
        return mlp_forward(self.nets_.E, self._check(X))[0]

    def decode(self, Z):
        check_is_fitted(self, "nets_")
        Z = check_array(Z, dtype=np.float64)
        if Z.shape[1] != self.encoding_dim_:
            raise DomainError(f"expected codes of length {self.encoding_dim_}, got {Z.shape[1]}")
        return mlp_forward(self.nets_.G, Z)[0]

    def reconstruct(self, X):
        return self.decode(self.transform(X))

    def sample_prior(self, n_samples, random_state=None, X_source=None):
        """Draw codes from the training prior.

        The orthogonal prior projects data windows; ``X_source`` replaces
        the stored training windows (needed after loading a model file).
        """
        check_is_fitted(self, "nets_")
        rng = rng_stream(self.random_state if random_state is None else random_state)
        if X_source is not None:
            X_source = self._check(X_source)
        return self._sample_prior(n_samples, rng, X_source)

    def generate(self, n_samples, random_state=None, X_source=None):
        """Generator output ``G(z)`` for fresh prior draws."""
        return self.decode(self.sample_prior(n_samples, random_state, X_source))

    def objective(self, X, Z):
        check_is_fitted(self, "nets_")
        return objective_and_grad(self.nets_, X, Z, need_grad=False)[0]
