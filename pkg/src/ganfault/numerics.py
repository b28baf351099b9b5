"""Dense linear-algebra primitives shared by the rest of the package."""

import numpy as np

from .exceptions import DomainError, NumericalError

_MASK64 = (1 << 64) - 1


def as_finite(a, name="array", ndim=None):
    """Return ``a`` as a float64 array, rejecting NaN/Inf and wrong rank."""
    arr = np.asarray(a, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DomainError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def rng_stream(seed):
    """Deterministic random stream for ``seed`` (any integer, folded to 64 bits).

    The returned generator provides ``uniform``, ``standard_normal``,
    ``integers`` and friends. One stream per consumer; never share across
    threads.
    """
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def sym_eig(A, max_sweeps=60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with eigenvalues ``w`` sorted descending and the
    matching orthonormal eigenvectors in the columns of ``V``.
    """
    A = as_finite(A, "A", ndim=2)
    n = A.shape[0]
    if A.shape[1] != n:
        raise DomainError(f"A must be square, got shape {A.shape}")
    scale = np.abs(A).max() if A.size else 0.0
    if n and np.abs(A - A.T).max() > 1e-10 * max(scale, 1e-300):
        raise DomainError("A is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n == 0 or scale == 0.0:
        return np.zeros(n), V

    eps = np.finfo(float).eps
    floor = eps * eps * np.sqrt(float(np.sum(A * A)))
    for sweep in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                # negligible relative to the diagonal: rotation would not change anything
                if abs(apq) <= max(eps * np.sqrt(abs(A[p, p] * A[q, q])), floor):
                    continue
                rotated += 1
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                cp = A[:, p].copy()
                cq = A[:, q]
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp = A[p, :].copy()
                rq = A[q, :]
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if rotated == 0:
            break
    else:
        raise NumericalError(
            f"Jacobi eigensolver did not converge after {max_sweeps} sweeps"
            f" ({max_sweeps * n * (n - 1) // 2} rotation slots)"
        )

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def _orthonormalize_against(v, Q):
    # two passes of modified Gram-Schmidt
    for _ in range(2):
        for j in range(Q.shape[1]):
            v = v - (Q[:, j] @ v) * Q[:, j]
    return v


def orthonormal_complement(S_basis):
    """Orthonormal basis of the orthogonal complement of ``span(S_basis)``.

    ``S_basis`` is ``d x d'`` with linearly independent columns and
    ``d' < d``; the result is ``d x (d - d')``.
    """
    S = as_finite(S_basis, "S_basis", ndim=2)
    d, k = S.shape
    if k >= d:
        raise DomainError(f"complement of a {k}-dimensional subspace of R^{d} is empty")

    Q = np.zeros((d, 0))
    for j in range(k):
        col = S[:, j]
        norm0 = np.linalg.norm(col)
        v = _orthonormalize_against(col, Q)
        nv = np.linalg.norm(v)
        if norm0 == 0.0 or nv <= 1e-10 * norm0:
            raise DomainError("S_basis is rank deficient")
        Q = np.column_stack([Q, v / nv])

    out = []
    for _ in range(d - k):
        # greedy: extend with the coordinate axis least explained so far
        R = np.eye(d) - Q @ Q.T
        i = int(np.argmax(np.linalg.norm(R, axis=0)))
        v = _orthonormalize_against(np.eye(d)[:, i], Q)
        v /= np.linalg.norm(v)
        Q = np.column_stack([Q, v])
        out.append(v)
    return np.column_stack(out)
