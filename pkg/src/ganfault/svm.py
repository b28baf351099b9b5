"""nu-SVM baseline trained on labeled normal/fault windows.

The dual is solved by two-variable working-set decomposition in the
style of LIBSVM's nu-solver. Internally the problem is

    min 1/2 a^T Q a   s.t.  sum_{c_i=+1} a_i = sum_{c_i=-1} a_i = nu*l/2,
                            0 <= a_i <= 1,

with ``Q_ij = c_i c_j K(x_i, x_j)``. Stored coefficients are rescaled by
``1/l`` so that ``0 <= alpha_i <= 1/l`` and ``sum alpha_i = nu``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DomainError, NumericalError
from .numerics import rng_stream

TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """``rbf``: exp(-|x-y|^2 / (2 sigma^2)); ``polynomial``: (scale x.y + coef0)^degree."""

    kind: str = "rbf"
    sigma: float = 1.0
    degree: int = 3
    coef0: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "polynomial"):
            raise DomainError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.sigma > 0:
            raise DomainError("rbf sigma must be positive")
        if self.kind == "polynomial" and self.degree < 1:
            raise DomainError("polynomial degree must be >= 1")

    def gram(self, X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        if X.shape[1] != Y.shape[1]:
            raise DomainError(f"dimension mismatch {X.shape[1]} vs {Y.shape[1]}")
        if self.kind == "rbf":
            sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
            return np.exp(-np.maximum(sq, 0.0) / (2.0 * self.sigma**2))
        return (self.scale * (X @ Y.T) + self.coef0) ** self.degree

    def grad_x(self, X_sv, x):
        """Gradient of ``K(x_sv_i, x)`` w.r.t. ``x``, one row per support vector."""
        if self.kind == "rbf":
            diff = X_sv - x
            k = np.exp(-(diff * diff).sum(1) / (2.0 * self.sigma**2))
            return (k / self.sigma**2)[:, None] * diff
        inner = self.scale * (X_sv @ x) + self.coef0
        return (self.degree * inner ** (self.degree - 1) * self.scale)[:, None] * X_sv


def kernel_eval(spec, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DomainError(f"length mismatch {x.shape} vs {y.shape}")
    return float(spec.gram(x[None, :], y[None, :])[0, 0])


@dataclass
class DualSolution:
    alpha: np.ndarray  # raw scale, 0 <= alpha <= 1
    grad: np.ndarray  # Q alpha
    rho: float
    r: float
    iterations: int


def _select_working_set(y, alpha, G, Q, QD, eps):
    up = alpha < 1.0
    low = alpha > 0.0
    pos = y > 0
    neg = ~pos

    # first index: most violating per class (I_up for +1 is alpha<C, etc.)
    cand_p = pos & up
    cand_n = neg & low
    ip = int(np.flatnonzero(cand_p)[np.argmax(-G[cand_p])]) if cand_p.any() else -1
    in_ = int(np.flatnonzero(cand_n)[np.argmax(G[cand_n])]) if cand_n.any() else -1
    gmaxp = -G[ip] if ip >= 0 else -np.inf
    gmaxn = G[in_] if in_ >= 0 else -np.inf

    jp = pos & low
    jn = neg & up
    gmaxp2 = G[jp].max() if jp.any() else -np.inf
    gmaxn2 = -G[jn].min() if jn.any() else -np.inf
    if max(gmaxp + gmaxp2, gmaxn + gmaxn2) < eps:
        return None

    best, best_j = np.inf, -1
    if ip >= 0 and jp.any():
        idx = np.flatnonzero(jp)
        gd = gmaxp + G[idx]
        ok = gd > 0
        if ok.any():
            quad = np.maximum(QD[ip] + QD[idx] - 2.0 * Q[ip, idx], TAU)
            obj = np.where(ok, -(gd * gd) / quad, np.inf)
            k = int(np.argmin(obj))
            if obj[k] < best:
                best, best_j = obj[k], int(idx[k])
    if in_ >= 0 and jn.any():
        idx = np.flatnonzero(jn)
        gd = gmaxn - G[idx]
        ok = gd > 0
        if ok.any():
            quad = np.maximum(QD[in_] + QD[idx] - 2.0 * Q[in_, idx], TAU)
            obj = np.where(ok, -(gd * gd) / quad, np.inf)
            k = int(np.argmin(obj))
            if obj[k] < best:
                best, best_j = obj[k], int(idx[k])
    if best_j < 0:
        return None
    i = ip if y[best_j] > 0 else in_
    return i, best_j


def kkt_violation(y, alpha, G):
    """Largest per-class gap between the most violating up/low pair (raw scale)."""
    y = np.asarray(y)
    gaps = []
    for cls in (1, -1):
        mask = y == cls
        up = mask & (alpha < 1.0)
        low = mask & (alpha > 0.0)
        if not up.any() or not low.any():
            gaps.append(0.0)
            continue
        # for class c the scaled gradient is -c*G; sign cancels within a class
        gaps.append(float((-G[up]).max() - (-G[low]).min()))
    return max(max(gaps), 0.0)


def _calculate_rho(y, alpha, G):
    rs = []
    for cls in (1, -1):
        mask = y == cls
        free = mask & (alpha > 0) & (alpha < 1)
        if free.any():
            rs.append(G[free].mean())
        else:
            at_ub = mask & (alpha >= 1)
            at_lb = mask & (alpha <= 0)
            lb = G[at_ub].max() if at_ub.any() else -np.inf
            ub = G[at_lb].min() if at_lb.any() else np.inf
            rs.append(0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb)
                      else (ub if np.isfinite(ub) else lb))
    r1, r2 = rs
    return 0.5 * (r1 - r2), 0.5 * (r1 + r2)


def solve_nu_dual(K, y, nu, eps=1e-3, max_iter=1_000_000):
    """Decomposition solver for the nu-SVC dual on a precomputed Gram matrix."""
    y = np.asarray(y, dtype=float)
    l = len(y)
    n_pos = int((y > 0).sum())
    n_neg = l - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("both classes must be present")
    bound = 2.0 * min(n_pos, n_neg) / l
    if not 0.0 < nu <= bound + 1e-12:
        raise DomainError(f"nu={nu} infeasible; must satisfy 0 < nu <= 2*min(l+, l-)/l = {bound:.6g}")

    alpha = np.zeros(l)
    sum_pos = sum_neg = nu * l / 2.0
    for i in range(l):
        if y[i] > 0:
            alpha[i] = min(1.0, sum_pos)
            sum_pos -= alpha[i]
        else:
            alpha[i] = min(1.0, sum_neg)
            sum_neg -= alpha[i]

    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    G = Q @ alpha
    it = 0
    while True:
        ws = _select_working_set(y, alpha, G, Q, QD, eps)
        if ws is None:
            break
        if it >= max_iter:
            raise NumericalError(f"nu-SVC solver did not converge in {max_iter} iterations")
        it += 1
        i, j = ws
        old_i, old_j = alpha[i], alpha[j]
        quad = max(QD[i] + QD[j] - 2.0 * Q[i, j], TAU)
        delta = (G[i] - G[j]) / quad
        total = old_i + old_j
        ai, aj = old_i - delta, old_j + delta
        if total > 1.0:
            if ai > 1.0:
                ai, aj = 1.0, total - 1.0
        elif aj < 0.0:
            aj, ai = 0.0, total
        if total > 1.0:
            if aj > 1.0:
                aj, ai = 1.0, total - 1.0
        elif ai < 0.0:
            ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += Q[:, i] * (ai - old_i) + Q[:, j] * (aj - old_j)

    rho, r = _calculate_rho(y, alpha, G)
    return DualSolution(alpha, G, rho, r, it)


def dual_objective_grad(K, y, alpha):
    """Gradient of ``1/2 a^T Q a`` (raw scale)."""
    y = np.asarray(y, dtype=float)
    return ((y[:, None] * y[None, :]) * K) @ alpha


class NuSVMClassifier(ClassifierMixin, BaseEstimator):
    """Binary nu-SVC with RBF or polynomial kernel.

    Labels may be any two values; ``positive_label`` (default ``"normal"``)
    is encoded +1. The decision value is
    ``sum_i alpha_i c_i K(x_i, x) - bias`` and exact zeros are assigned to
    the negative class.
    """

    def __init__(self, nu=0.5, kernel="rbf", sigma=1.0, degree=3, coef0=1.0, scale=1.0,
                 tol=1e-3, max_iter=1_000_000, positive_label="normal"):
        self.nu = nu
        self.kernel = kernel
        self.sigma = sigma
        self.degree = degree
        self.coef0 = coef0
        self.scale = scale
        self.tol = tol
        self.max_iter = max_iter
        self.positive_label = positive_label

    @property
    def kernel_spec(self):
        return KernelSpec(self.kernel, self.sigma, self.degree, self.coef0, self.scale)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes = np.unique(y)
        if len(classes) != 2:
            raise DomainError(f"need exactly two classes, got {classes.tolist()}")
        if self.positive_label in classes:
            neg = classes[classes != self.positive_label][0]
            self.classes_ = np.array([neg, self.positive_label], dtype=object)
        else:
            self.classes_ = classes
        c = np.where(y == self.classes_[1], 1.0, -1.0)
        spec = self.kernel_spec
        K = spec.gram(X, X)
        sol = solve_nu_dual(K, c, self.nu, self.tol, self.max_iter)
        l = len(c)
        self.kkt_violation_ = kkt_violation(c, sol.alpha, sol.grad)
        self.n_iter_ = sol.iterations
        sv = sol.alpha > 0
        self.alpha_ = sol.alpha / l
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (sol.alpha * c)[sv] / l
        self.intercept_ = sol.rho / l
        self.margin_scale_ = sol.r / l
        self.y_signed_ = c
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.kernel_spec.gram(X, self.support_vectors_) @ self.dual_coef_ - self.intercept_

    def decision_gradient(self, x):
        """Gradient of the decision value w.r.t. a single input ``x``."""
        check_is_fitted(self, "dual_coef_")
        x = np.asarray(x, dtype=float)
        return self.dual_coef_ @ self.kernel_spec.grad_x(self.support_vectors_, x)

    def predict(self, X):
        f = self.decision_function(X)
        return np.where(f > 0, self.classes_[1], self.classes_[0])

    def margin_delta(self, X, y):
        """Minimum signed functional margin ``min_i c_i f(x_i)`` over a labeled set."""
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if len(X) == 0:
            raise DomainError("empty dataset")
        c = np.where(y == self.classes_[1], 1.0, -1.0)
        return float(np.min(c * self.decision_function(X)))


def _stratified_folds(y, folds, rng):
    idx = np.empty(len(y), dtype=int)
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        rng.shuffle(members)
        idx[members] = np.arange(len(members)) % folds
    return idx


def cross_validate_nu(X, y, nu_grid=(0.5, 0.6, 0.7, 0.8, 0.9), folds=5, seed=0, **svm_params):
    """Stratified k-fold accuracy for each ``nu``; returns ``(best_nu, table)``.

    ``table`` maps nu to mean accuracy; nu values infeasible on some fold
    score NaN. Ties go to the smallest nu.
    """
    X = check_array(X, dtype=np.float64)
    y = np.asarray(y)
    if folds < 2:
        raise DomainError("folds must be >= 2")
    if len(nu_grid) == 0:
        raise DomainError("nu grid is empty")
    for attempt in range(5):
        rng = rng_stream(seed + attempt)
        fold_of = _stratified_folds(y, folds, rng)
        if all(len(np.unique(y[fold_of != f])) == 2 and len(np.unique(y[fold_of == f])) == 2
               for f in range(folds)):
            break
    else:
        raise DomainError("could not build folds containing both classes after 5 attempts")

    table = {}
    for nu in sorted(nu_grid):
        accs = []
        for f in range(folds):
            tr, te = fold_of != f, fold_of == f
            try:
                model = NuSVMClassifier(nu=nu, **svm_params).fit(X[tr], y[tr])
            except DomainError:
                accs = None
                break
            accs.append(np.mean(model.predict(X[te]) == y[te]))
        table[nu] = float(np.mean(accs)) if accs is not None else float("nan")
    valid = {nu: a for nu, a in table.items() if np.isfinite(a)}
    if not valid:
        raise DomainError("no nu in the grid is feasible on every fold")
    best = max(valid.values())
    best_nu = min(nu for nu, a in valid.items() if a == best)
    return best_nu, table
