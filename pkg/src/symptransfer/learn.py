"""Weighted logistic regression by IRLS, Wald statistics, and rank-sum AUC."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit, ndtr
from scipy.stats import rankdata

log = logging.getLogger(__name__)

FALLBACK_RIDGE = 1e-4
SEPARATION_BOUND = 30.0
GRAD_TOL = 1e-6
ALIAS_TOL = 1e-8


class LearnerError(ValueError):
    pass


class SingleClassError(LearnerError):
    pass


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    """A fitted logistic model.

    ``z`` and ``p`` hold per-feature Wald statistics; aliased features (exact
    linear dependence on the intercept or earlier columns) are fixed at a
    zero coefficient and carry NaN statistics.  Both are ``None`` when the
    information matrix could not be inverted.
    """

    coef: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    ridge_used: float
    z: np.ndarray | None
    p: np.ndarray | None
    intercept_z: float
    intercept_p: float
    aliased: tuple[int, ...] = ()
    grad_norm: float = 0.0
    separated: bool = False
    feature_names: tuple[str, ...] | None = None

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    def wald(self, j: int) -> tuple[float, float] | None:
        if self.z is None or np.isnan(self.z[j]):
            return None
        return float(self.z[j]), float(self.p[j])


def _design(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.hstack([np.ones((X.shape[0], 1)), X])


def objective(params, X, y, w=None, ridge: float = 0.0) -> float:
    """Weighted log-likelihood minus ``ridge/2 * |params|^2``.

    ``params`` is ``[intercept, coef...]``.
    """
    A = _design(X)
    y = np.asarray(y, float)
    w = np.ones_like(y) if w is None else np.asarray(w, float)
    eta = A @ params
    ll = np.sum(w * (y * eta - np.logaddexp(0.0, eta)))
    return float(ll - 0.5 * ridge * params @ params)


def gradient(params, X, y, w=None, ridge: float = 0.0) -> np.ndarray:
    """Analytic gradient of :func:`objective`."""
    A = _design(X)
    y = np.asarray(y, float)
    w = np.ones_like(y) if w is None else np.asarray(w, float)
    return A.T @ (w * (y - expit(A @ params))) - ridge * params


def _compress(A, y, w):
    """Merge rows with identical (x, y); weights add."""
    keyed = np.ascontiguousarray(np.hstack([A, y[:, None]]))
    rows = keyed.view(np.dtype((np.void, keyed.itemsize * keyed.shape[1]))).ravel()
    _, first, inv = np.unique(rows, return_index=True, return_inverse=True)
    uniq = keyed[first]
    return uniq[:, :-1], uniq[:, -1], np.bincount(inv.ravel(), weights=w, minlength=len(first))


def _aliased_columns(A, w) -> list[int]:
    """Columns of ``A`` that are linear combinations of earlier columns."""
    B = A * np.sqrt(w)[:, None]
    norms = np.linalg.norm(B, axis=0)
    if B.shape[0] < B.shape[1]:
        B = np.vstack([B, np.zeros((B.shape[1] - B.shape[0], B.shape[1]))])
    r = np.abs(np.diag(linalg.qr(B, mode="r", check_finite=False)[0]))
    return [j for j in range(A.shape[1]) if norms[j] == 0 or r[j] <= ALIAS_TOL * norms[j]]


def _newton(A, y, w, ridge, max_iter, check_separation):
    """Damped Newton ascent. Returns (params, converged, iters, separated, H)."""
    k = A.shape[1]
    b = np.zeros(k)
    eye = np.eye(k)

    def f(beta):
        eta = A @ beta
        return np.sum(w * (y * eta - np.logaddexp(0.0, eta))) - 0.5 * ridge * beta @ beta

    fb = f(b)
    H = None
    for it in range(1, max_iter + 1):
        p = expit(A @ b)
        g = A.T @ (w * (y - p)) - ridge * b
        H = (A * (w * p * (1 - p))[:, None]).T @ A + ridge * eye
        if np.linalg.norm(g) <= GRAD_TOL:
            return b, True, it - 1, False, H
        try:
            step = linalg.cho_solve(linalg.cho_factor(H, check_finite=False), g)
        except linalg.LinAlgError:
            return b, False, it, check_separation, None
        t = 1.0
        for _ in range(40):
            cand = b + t * step
            fc = f(cand)
            if fc >= fb:
                break
            t *= 0.5
        else:
            return b, False, it, False, H
        b, fb = cand, fc
        if check_separation and np.max(np.abs(b)) > SEPARATION_BOUND:
            return b, False, it, True, None
    p = expit(A @ b)
    g = A.T @ (w * (y - p)) - ridge * b
    H = (A * (w * p * (1 - p))[:, None]).T @ A + ridge * eye
    return b, bool(np.linalg.norm(g) <= GRAD_TOL), max_iter, False, H


def fit_logistic(
    X,
    y,
    w=None,
    *,
    ridge: float = 0.0,
    max_iter: int = 100,
    feature_names=None,
) -> TrainedClassifier:
    """Maximize the (optionally ridged) weighted log-likelihood.

    If the unpenalized fit diverges, hits a singular Hessian, or any
    parameter exceeds magnitude 30 (separation), the fit is redone with
    ``ridge = 1e-4`` and ``ridge_used`` records it.  The ridge term covers
    the intercept too, otherwise a class-pure cell would still diverge.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise LearnerError("X must be 2-dimensional")
    y = np.asarray(y, dtype=float)
    w = np.ones(X.shape[0]) if w is None else np.asarray(w, dtype=float)
    if y.shape != (X.shape[0],) or w.shape != y.shape:
        raise LearnerError("X, y and w disagree on the number of rows")
    if ridge < 0:
        raise LearnerError("ridge must be nonnegative")
    live = w > 0
    if live.sum() < 2:
        raise LearnerError("need at least 2 rows with positive weight")
    classes = np.unique(y[live])
    if classes.size < 2:
        raise SingleClassError(f"only class {int(classes[0])} present")

    A, yc, wc = _compress(_design(X[live]), y[live], w[live])
    k = A.shape[1]
    aliased = _aliased_columns(A, wc)
    keep = [j for j in range(k) if j not in set(aliased)]
    Ak = A[:, keep]

    b, converged, iters, separated, H = _newton(
        Ak, yc, wc, ridge, max_iter, check_separation=ridge < FALLBACK_RIDGE
    )
    ridge_used = ridge
    if (not converged or separated) and ridge < FALLBACK_RIDGE:
        log.debug("logistic fit fell back to ridge (separated=%s)", separated)
        ridge_used = FALLBACK_RIDGE
        b, converged, more, _, H = _newton(
            Ak, yc, wc, ridge_used, max_iter, check_separation=False
        )
        iters += more
        separated = separated or not converged

    params = np.zeros(k)
    params[keep] = b
    p_hat = expit(Ak @ b)
    grad = Ak.T @ (wc * (yc - p_hat)) - ridge_used * b

    z = pv = None
    if H is not None:
        try:
            cov = linalg.cho_solve(linalg.cho_factor(H, check_finite=False), np.eye(len(keep)))
            se = np.sqrt(np.diag(cov))
            zk = b / se
            z = np.full(k, np.nan)
            z[keep] = zk
            pv = np.full(k, np.nan)
            pv[keep] = 2.0 * ndtr(-np.abs(zk))
        except linalg.LinAlgError:
            z = pv = None

    return TrainedClassifier(
        coef=params[1:],
        intercept=float(params[0]),
        converged=bool(converged),
        iterations=int(iters),
        ridge_used=float(ridge_used),
        z=None if z is None else z[1:],
        p=None if pv is None else pv[1:],
        intercept_z=float("nan") if z is None else float(z[0]),
        intercept_p=float("nan") if pv is None else float(pv[0]),
        aliased=tuple(j - 1 for j in aliased if j > 0),
        grad_norm=float(np.linalg.norm(grad)),
        separated=bool(separated),
        feature_names=None if feature_names is None else tuple(map(str, feature_names)),
    )


def fit_dataset(d, **kwargs) -> TrainedClassifier:
    return fit_logistic(d.X, d.y, d.w, feature_names=d.space.names(), **kwargs)


def decision_function(c: TrainedClassifier, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != c.n_features:
        raise LearnerError(
            f"expected {c.n_features} columns, got {X.shape[1] if X.ndim == 2 else X.shape}"
        )
    return c.intercept + X @ c.coef


def predict_prob(c: TrainedClassifier, X) -> np.ndarray:
    return expit(decision_function(c, X))


def auc(scores, labels) -> float | None:
    """Mann-Whitney AUC with ties credited 1/2; ``None`` for single-class input."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def dump_model(c: TrainedClassifier, names=None) -> str:
    names = names if names is not None else c.feature_names
    if names is None:
        names = [f"x{j}" for j in range(c.n_features)]

    def fmt_p(v):
        return "NA" if v is None or np.isnan(v) else repr(float(v))

    lines = [f"__intercept__\t{c.intercept!r}\t{fmt_p(c.intercept_p)}"]
    for j, name in enumerate(names):
        pj = None if c.p is None else c.p[j]
        lines.append(f"{name}\t{float(c.coef[j])!r}\t{fmt_p(pj)}")
    return "\n".join(lines) + "\n"
