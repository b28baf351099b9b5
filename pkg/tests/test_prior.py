import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganfault.exceptions import DomainError
from ganfault.numerics import rng_stream
from ganfault.prior import (
    PCAPrior,
    PcaModel,
    build_prior_basis,
    fit_pca,
    sample_gaussian_prior,
    sample_orthogonal_prior,
    select_encoding_dim,
)


def axis_pca(d):
    """PCA whose directions are the coordinate axes, variances descending."""
    var = np.arange(d, 0, -1, dtype=float)
    return PcaModel(np.zeros(d), np.eye(d), var, var / var.sum())


def test_pca_on_a_line():
    t = np.linspace(-1, 1, 50)
    X = np.outer(t, [1.0, 2.0, -2.0]) + 0.5
    pca = fit_pca(X)
    np.testing.assert_allclose(pca.ratios, [1, 0, 0], atol=1e-10)
    np.testing.assert_allclose(np.abs(pca.directions[:, 0]), [1 / 3, 2 / 3, 2 / 3], atol=1e-12)


def test_pca_isotropic_cloud():
    X = rng_stream(0).standard_normal((10_000, 4))
    r = fit_pca(X).ratios
    assert np.all((r >= 0.22) & (r <= 0.28))


def test_pca_centering_and_invariants():
    X = rng_stream(1).standard_normal((200, 5)) @ np.diag([3, 2, 1, 0.5, 0.1]) + 7
    pca = fit_pca(X)
    proj = (X - pca.mean) @ pca.directions
    assert np.abs(proj.mean(axis=0)).max() < 1e-10
    assert np.abs(pca.directions.T @ pca.directions - np.eye(5)).max() < 1e-10
    assert abs(pca.ratios.sum() - 1) < 1e-12
    assert np.all(np.diff(pca.ratios) <= 0) and np.all(pca.ratios >= 0)
    np.testing.assert_allclose(pca.explained_variance, np.linalg.eigvalsh(np.cov(X.T))[::-1],
                               rtol=1e-10)


def test_pca_too_few_samples():
    with pytest.raises(DomainError):
        fit_pca(np.ones((3, 3)))


@pytest.mark.parametrize("ratios, thr, expect", [
    ((0.6, 0.35, 0.05), 0.9, 2),
    ((1.0, 0.0, 0.0), 0.9, 1),
    ((0.6, 0.35, 0.05), 0.99, 3),
    ((0.5, 0.4, 0.1), 0.9, 2),
])
def test_select_encoding_dim(ratios, thr, expect):
    assert select_encoding_dim(ratios, thr) == expect


def test_select_encoding_dim_bad_threshold():
    with pytest.raises(DomainError):
        select_encoding_dim((1.0,), 1.0)


def test_basis_mixed_case():
    prior = build_prior_basis(axis_pca(3), 2)
    assert prior.n_complement == 1
    np.testing.assert_allclose(np.abs(prior.basis), np.eye(3)[:, [2, 0]])


def test_basis_half_case():
    prior = build_prior_basis(axis_pca(4), 2)
    assert prior.n_complement == 2
    # spans {e3, e4}
    P = prior.basis @ prior.basis.T
    np.testing.assert_allclose(P, np.diag([0, 0, 1, 1]), atol=1e-12)


@pytest.mark.parametrize("method", ["pca", "gram-schmidt"])
@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 10), data=st.data())
def test_basis_properties(method, d, data):
    k = data.draw(st.integers(1, d - 1))
    X = rng_stream(data.draw(st.integers(0, 999))).standard_normal((3 * d, d))
    pca = fit_pca(X)
    prior = build_prior_basis(pca, k, complement=method)
    N = prior.basis
    S = pca.directions[:, :k]
    assert N.shape == (d, k)
    assert np.abs(N.T @ N - np.eye(k)).max() <= 1e-10
    comp = N[:, :prior.n_complement]
    assert np.abs(comp.T @ S).max() <= 1e-10
    if 2 * k > d:
        np.testing.assert_allclose(N[:, d - k:], pca.directions[:, :2 * k - d])
    # N differs from S as a subspace
    assert np.linalg.svd(S.T @ N, compute_uv=False).min() < 1 - 1e-8


def test_basis_errors():
    with pytest.raises(DomainError):
        build_prior_basis(axis_pca(3), 3)
    with pytest.raises(DomainError):
        build_prior_basis(axis_pca(3), 0)
    with pytest.raises(DomainError):
        build_prior_basis(axis_pca(3), 1, complement="magic")


def test_orthogonal_prior_hand_example():
    prior = build_prior_basis(axis_pca(3), 2, center=False)
    X = np.array([[0.2, 0.7, 0.4]])
    z = sample_orthogonal_prior(prior, X, 3, rng_stream(0))
    np.testing.assert_allclose(np.abs(z), np.tile([0.4, 0.2], (3, 1)))


def test_orthogonal_prior_zero_on_subspace():
    rng = rng_stream(3)
    X = rng.standard_normal((100, 2)) @ np.array([[1.0, 2.0, 0.0, 1.0], [0.0, 1.0, 1.0, -1.0]]) + 2.0
    prior = PCAPrior(encoding_dim=2).fit(X)
    assert prior.prior_.n_complement == 2
    z = prior.sample(50, rng_stream(1))
    assert np.abs(z).max() < 1e-10


def test_complement_energy_bounded_by_residual():
    X = rng_stream(4).standard_normal((500, 6)) @ np.diag([5, 3, 1, 0.3, 0.2, 0.1])
    pca = fit_pca(X)
    k = 4
    prior = build_prior_basis(pca, k)
    comp = prior.basis[:, :prior.n_complement]
    energy = np.mean(np.sum(((X - pca.mean) @ comp) ** 2, axis=1))
    total = pca.explained_variance.sum() * (len(X) - 1) / len(X)
    assert energy <= total * (1 - np.cumsum(pca.ratios)[k - 1]) + 1e-12


def test_prior_sampling_determinism_and_errors():
    X = rng_stream(0).standard_normal((30, 4))
    p = PCAPrior(encoding_dim=3).fit(X)
    np.testing.assert_array_equal(p.sample(10, rng_stream(5)), p.sample(10, rng_stream(5)))
    with pytest.raises(DomainError):
        sample_orthogonal_prior(p.prior_, np.empty((0, 4)), 3, rng_stream(0))
    assert p.transform(X).shape == (30, 3)
    assert p.get_params()["encoding_dim"] == 3


def test_prior_picks_dim_from_threshold():
    X = rng_stream(0).standard_normal((300, 3)) * np.array([10.0, 1.0, 0.1])
    p = PCAPrior(threshold=0.9).fit(X)
    assert p.encoding_dim_ == 1


def test_gaussian_prior_moments():
    z = sample_gaussian_prior(3, 100_000, rng_stream(0))
    assert np.abs(z.mean(axis=0)).max() < 0.02
    zz = sample_gaussian_prior(2, 10_000, rng_stream(1))
    assert abs(np.corrcoef(zz.T)[0, 1]) < 0.03
    np.testing.assert_array_equal(sample_gaussian_prior(2, 5, rng_stream(2)),
                                  sample_gaussian_prior(2, 5, rng_stream(2)))
