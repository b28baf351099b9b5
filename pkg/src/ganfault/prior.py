"""PCA of normal data and the noise priors fed to the generator."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError
from .numerics import as_finite, orthonormal_complement, sym_eig


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    directions: np.ndarray  # d x d, columns by descending variance
    explained_variance: np.ndarray
    ratios: np.ndarray

    @property
    def dim(self):
        return len(self.mean)


@dataclass(frozen=True)
class SubspacePrior:
    """Mixed basis ``N`` (d x d') and the PCA it came from.

    The first ``n_complement`` columns of ``basis`` are orthogonal to the
    leading ``d'`` principal directions; any remaining columns are leading
    principal directions themselves.
    """

    basis: np.ndarray
    n_complement: int
    mean: np.ndarray
    center: bool = True

    @property
    def encoding_dim(self):
        return self.basis.shape[1]

    def project(self, X):
        Xc = X - self.mean if self.center else X
        return Xc @ self.basis


def _fix_signs(V):
    # largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def fit_pca(X):
    """PCA through the sample covariance of mean-centred ``X`` (rows are samples)."""
    X = as_finite(X, "X", ndim=2)
    n, d = X.shape
    if n < d + 1:
        raise DomainError(f"PCA in R^{d} needs at least {d + 1} samples, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    w, V = sym_eig(0.5 * (cov + cov.T))
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise DomainError("data has zero variance")
    return PcaModel(mean, _fix_signs(V), w, w / total)


def select_encoding_dim(ratios, threshold=0.90):
    """Smallest number of leading directions whose cumulative ratio reaches ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise DomainError("threshold must lie in (0, 1)")
    ratios = getattr(ratios, "ratios", ratios)
    cum = np.cumsum(np.asarray(ratios, dtype=float))
    hits = np.flatnonzero(cum >= threshold - 1e-12)
    return int(hits[0]) + 1 if len(hits) else len(cum)


def build_prior_basis(pca, encoding_dim, center=True, complement="pca"):
    """Mixed basis for the orthogonal prior.

    With ``2 d' > d`` the basis is ``[complement (d - d') | top (2d' - d)
    principal directions]``; otherwise all ``d'`` columns come from the
    complement, highest residual variance first. ``complement="gram-schmidt"``
    builds the complement by orthogonalising against the top directions
    instead of reusing trailing eigenvectors.
    """
    d = pca.dim
    k = int(encoding_dim)
    if not 1 <= k < d:
        raise DomainError(f"encoding dim must satisfy 1 <= d' < d = {d}, got {k}")
    S = pca.directions[:, :k]
    if complement == "pca":
        comp = pca.directions[:, k:]
    elif complement == "gram-schmidt":
        comp = orthonormal_complement(S)
    else:
        raise DomainError(f"unknown complement method {complement!r}")
    if 2 * k > d:
        N = np.hstack([comp, pca.directions[:, :2 * k - d]])
        n_comp = d - k
    else:
        N = comp[:, :k]
        n_comp = k
    return SubspacePrior(N, n_comp, pca.mean.copy(), center)


def sample_orthogonal_prior(prior, X_source, batch, rng):
    """``z = N^t x`` for ``x`` drawn uniformly with replacement from ``X_source``."""
    X_source = np.asarray(X_source, dtype=float)
    if len(X_source) == 0:
        raise DomainError("cannot sample the prior from an empty dataset")
    idx = rng.integers(0, len(X_source), size=batch)
    return prior.project(X_source[idx])


def sample_gaussian_prior(encoding_dim, batch, rng):
    return rng.standard_normal((batch, encoding_dim))


class PCAPrior(TransformerMixin, BaseEstimator):
    """Orthogonal-complement prior fitted on normal windows.

    Parameters
    ----------
    threshold : float
        Cumulative explained-variance ratio used to pick the encoding
        dimension when ``encoding_dim`` is None.
    encoding_dim : int or None
        Fixed encoding dimension, overriding ``threshold``.
    center : bool
        Project mean-centred data (default) or the raw vectors.
    complement : {"pca", "gram-schmidt"}
        How the orthogonal complement is built.

    Attributes
    ----------
    pca_ : PcaModel
    encoding_dim_ : int
    prior_ : SubspacePrior
    """

    def __init__(self, threshold=0.90, encoding_dim=None, center=True, complement="pca"):
        self.threshold = threshold
        self.encoding_dim = encoding_dim
        self.center = center
        self.complement = complement

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.pca_ = fit_pca(X)
        if self.encoding_dim is None:
            k = select_encoding_dim(self.pca_.ratios, self.threshold)
            # d' = d leaves no complement; fall back to the largest valid dim
            k = min(k, X.shape[1] - 1)
        else:
            k = int(self.encoding_dim)
        self.encoding_dim_ = k
        self.prior_ = build_prior_basis(self.pca_, k, self.center, self.complement)
        self.source_ = X
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "prior_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.prior_.project(X)

    def sample(self, n_samples, rng):
        check_is_fitted(self, "prior_")
        if getattr(self, "source_", None) is None:
            raise DomainError("no stored source windows (model loaded from file?); pass data explicitly")
        return sample_orthogonal_prior(self.prior_, self.source_, n_samples, rng)
