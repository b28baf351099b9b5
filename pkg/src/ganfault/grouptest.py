"""Kernel two-sample test on covariance descriptors of encoded samples.

Each descriptor ``C = y y^T`` (or an average over a window of codes) is
factored as ``U R U^T`` with ``U`` on the Stiefel manifold and ``R``
symmetric positive definite. Points are compared with the sum of a
Stiefel distance and the GL-invariant SPD distance, fed to a Gaussian
kernel, and the two sets are compared by their maximum mean discrepancy.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .numerics import as_finite, sym_eig

SPD_JITTER = 1e-10


@dataclass(frozen=True)
class ManifoldPoint:
    U: np.ndarray  # d' x k, orthonormal columns
    R: np.ndarray  # k x k SPD

    @property
    def rank(self):
        return self.R.shape[0]

    def matrix(self):
        return self.U @ self.R @ self.U.T


@dataclass(frozen=True)
class TestResult:
    statistic: float
    threshold: float
    reject: bool
    mmd_squared: float
    alpha: float
    n1: int
    n2: int
    literal_inequality: bool = False


def _sign_fix(U):
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s


def psd_factorize(C, rank):
    """Rank-``k`` factorization ``C ~ U diag(top-k eigenvalues) U^T``."""
    C = as_finite(C, "C", ndim=2)
    k = int(rank)
    if C.shape[0] != C.shape[1]:
        raise DomainError("descriptor must be square")
    if not 1 <= k <= C.shape[0]:
        raise DomainError(f"rank must lie in [1, {C.shape[0]}]")
    w, V = sym_eig(C)
    if w[-1] < -1e-10 * max(abs(w[0]), 1e-300):
        raise DomainError("descriptor is not positive semidefinite")
    if w[0] <= 0 or w[k - 1] <= 1e-10 * w[0]:
        raise DomainError(
            f"descriptor has numerical rank below {k}; use a smaller rank or a longer window"
        )
    return ManifoldPoint(_sign_fix(V[:, :k]), np.diag(w[:k]))


def rank_one_point(y):
    """Closed-form factorization of ``y y^T``: unit direction and squared norm."""
    y = as_finite(y, "y", ndim=1)
    nrm2 = float(y @ y)
    if nrm2 <= 0:
        raise DomainError("zero code vector has no rank-1 descriptor")
    u = _sign_fix((y / np.sqrt(nrm2))[:, None])
    return ManifoldPoint(u, np.array([[nrm2]]))


def descriptors(codes, window=None):
    """Manifold points for a set of codes.

    ``window=None`` gives one rank-1 descriptor per code. An integer ``w``
    averages ``y y^T`` over consecutive non-overlapping groups of ``w`` codes
    and keeps rank ``min(w, d')``.
    """
    codes = as_finite(codes, "codes", ndim=2)
    if window is None or window == 1:
        return [rank_one_point(y) for y in codes]
    w = int(window)
    k = min(w, codes.shape[1])
    pts = []
    for s in range(0, len(codes) - w + 1, w):
        block = codes[s:s + w]
        pts.append(psd_factorize(block.T @ block / w, k))
    return pts


def _check_spd(X, name):
    X = as_finite(X, name, ndim=2)
    if X.shape[0] != X.shape[1] or np.abs(X - X.T).max() > 1e-8 * max(np.abs(X).max(), 1.0):
        raise DomainError(f"{name} is not symmetric")
    return 0.5 * (X + X.T)


def _gen_eigvals(X, Y):
    # eigenvalues of X^{-1} Y via the symmetric form L^{-1} Y L^{-T}
    if X.shape == (1, 1):
        return np.array([Y[0, 0] / X[0, 0]])
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        raise DomainError("X is not positive definite") from None
    Li = np.linalg.inv(L)
    M = Li @ Y @ Li.T
    return sym_eig(0.5 * (M + M.T))[0]


def spd_distance(X, Y):
    """``sqrt(trace(Log(X^{-1} Y)^2))``, the GL-invariant (affine-invariant) distance."""
    X = _check_spd(X, "X")
    Y = _check_spd(Y, "Y")
    if X.shape != Y.shape:
        raise DomainError("SPD matrices differ in size")
    k = X.shape[0]
    X = X + SPD_JITTER * np.eye(k)
    Y = Y + SPD_JITTER * np.eye(k)
    if np.min(np.diag(X)) <= 0 or np.min(np.diag(Y)) <= 0:
        raise DomainError("SPD matrices must have positive diagonal")
    lam = _gen_eigvals(X, Y)
    if np.any(lam <= 0):
        raise DomainError("Y is not positive definite")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def stiefel_distance(U1, U2):
    """Sign- and rotation-invariant distance between orthonormal frames.

    Rank 1 gives the angle ``arccos |u1 . u2|``; higher ranks use the 2-norm of the
    principal angles between the column spans.
    """
    U1 = as_finite(U1, "U1")
    U2 = as_finite(U2, "U2")
    if U1.ndim == 1:
        U1 = U1[:, None]
    if U2.ndim == 1:
        U2 = U2[:, None]
    if U1.shape != U2.shape:
        raise DomainError(f"shape mismatch {U1.shape} vs {U2.shape}")
    k = U1.shape[1]
    for U, name in ((U1, "U1"), (U2, "U2")):
        if np.abs(U.T @ U - np.eye(k)).max() > 1e-6:
            raise DomainError(f"{name} does not have orthonormal columns")
    if k == 1:
        return float(_unit_angle(U1[:, 0], U2[:, 0]))
    return float(np.sqrt(np.sum(principal_angles(U1, U2) ** 2)))


def _unit_angle(u, v):
    # 2 atan2(|u - s v|, |u + s v|) is accurate near 0, unlike arccos
    s = 1.0 if u @ v >= 0 else -1.0
    return 2.0 * np.arctan2(np.linalg.norm(u - s * v), np.linalg.norm(u + s * v))


def principal_angles(U1, U2):
    """Principal angles between two column spans, accurate for small angles.

    Cosines come from the SVD of ``U1^T U2`` and sines from the SVD of the
    part of ``U2`` outside ``span(U1)``; each angle uses whichever of the
    two is better conditioned.
    """
    M = U1.T @ U2
    cos = np.clip(np.linalg.svd(M, compute_uv=False), 0.0, 1.0)
    sin = np.clip(np.linalg.svd(U2 - U1 @ M, compute_uv=False), 0.0, 1.0)[::-1]
    return np.where(cos > np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))


def product_distance(P1, P2):
    """l1 combination of the Stiefel and SPD distances."""
    if P1.U.shape != P2.U.shape:
        raise DomainError("manifold points differ in shape")
    return stiefel_distance(P1.U, P2.U) + spd_distance(P1.R, P2.R)


def product_kernel(P1, P2):
    return float(np.exp(-product_distance(P1, P2) ** 2))


def _rank_one_arrays(points):
    U = np.stack([p.U[:, 0] for p in points])
    r = np.array([p.R[0, 0] for p in points])
    return U, np.log(r + SPD_JITTER)


def kernel_matrix(A, B):
    """Gram matrix ``k(A_i, B_j)``; vectorised for rank-1 points."""
    if A and B and A[0].rank == 1 and all(p.rank == 1 for p in A) and all(p.rank == 1 for p in B):
        Ua, la = _rank_one_arrays(A)
        Ub, lb = _rank_one_arrays(B)
        if Ua.shape[1] != Ub.shape[1]:
            raise DomainError("manifold points differ in shape")
        c = Ua @ Ub.T
        theta = np.arccos(np.clip(np.abs(c), 0.0, 1.0))
        ii, jj = np.nonzero(np.abs(c) > 0.9)
        for s in range(0, len(ii), 65536):
            i, j = ii[s:s + 65536], jj[s:s + 65536]
            sb = np.sign(c[i, j])[:, None] * Ub[j]
            theta[i, j] = 2.0 * np.arctan2(np.linalg.norm(Ua[i] - sb, axis=1),
                                           np.linalg.norm(Ua[i] + sb, axis=1))
        d = theta + np.abs(la[:, None] - lb[None, :])
        return np.exp(-d * d)
    return np.array([[product_kernel(a, b) for b in B] for a in A])


def mmd_squared(A, B):
    """Biased (V-statistic) estimate of the squared MMD between two point sets."""
    if len(A) == 0 or len(B) == 0:
        raise DomainError("both sets must be nonempty")
    kaa = kernel_matrix(A, A).mean()
    kab = kernel_matrix(A, B).mean()
    kbb = kernel_matrix(B, B).mean()
    return float(kaa - 2.0 * kab + kbb)


def mmd_threshold(n1, n2, alpha):
    """``2 sqrt(1/max(n1, n2)) (1 + sqrt(-log alpha))``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    return 2.0 * np.sqrt(1.0 / max(n1, n2)) * (1.0 + np.sqrt(-np.log(alpha)))


def two_sample_test(A, B, alpha=0.05, literal_inequality=False):
    """Level-``alpha`` MMD test of H0: both sets come from one distribution.

    By default H0 is rejected when MMD exceeds the threshold. Setting
    ``literal_inequality`` flips the comparison to ``MMD < threshold``.
    """
    m2 = mmd_squared(A, B)
    stat = float(np.sqrt(max(m2, 0.0)))
    tau = float(mmd_threshold(len(A), len(B), alpha))
    reject = stat < tau if literal_inequality else stat > tau
    return TestResult(stat, tau, bool(reject), m2, alpha, len(A), len(B), literal_inequality)
