# -*- coding: utf-8 -*-

"""Linear quantile regression.

The check-loss problem is solved as a bounded linear program with a
Frisch-Newton primal-dual interior point method (Mehrotra predictor-corrector).
A simplex solve through ``scipy.optimize.linprog`` serves as reference.
"""
import logging
import math
from collections import abc
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg
from arch.bootstrap import CircularBlockBootstrap
from scipy import sparse
from scipy.optimize import linprog

from .errors import (
    BootstrapFailure,
    DimensionMismatch,
    NonConvergence,
    NumericalError,
    RankDeficientDesign,
)
from .util import progress

logger = logging.getLogger(__name__)

__all__ = [
    "check_loss",
    "Dataset",
    "QuantileFit",
    "QuantileProcess",
    "BootstrapConfig",
    "fit_lqr",
    "fit_lqr_lp",
    "predict_quantile",
    "quantile_process",
    "mbb_covariance",
]

GAP_TOL = 1e-8
MAX_ITER = 200
_STEP_SHRINK = 0.9995


def check_loss(x, alpha):
    """Quantile check function ``(alpha - 1{x < 0}) * x``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    x = np.asarray(x, dtype=float)
    loss = np.where(x < 0, (alpha - 1.0) * x, alpha * x)
    return float(loss) if loss.ndim == 0 else loss


@dataclass
class Dataset:
    """Response and design matrix of one quantile regression.

    The first column of ``x`` is the intercept.
    """

    y: np.ndarray
    x: np.ndarray
    labels: List[str]
    dates: Optional[pd.DatetimeIndex] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        n, p = self.x.shape
        if len(self.y) != n:
            raise DimensionMismatch(f"y has {len(self.y)} rows, x has {n}")
        if len(self.labels) != p:
            raise DimensionMismatch(f"{len(self.labels)} labels for {p} columns")
        if self.dates is not None:
            self.dates = pd.DatetimeIndex(self.dates)
            if len(self.dates) != n:
                raise DimensionMismatch(f"{len(self.dates)} dates for {n} rows")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x))):
            raise ValueError("dataset contains non-finite values")
        if n <= p:
            raise ValueError(f"need more rows than columns, got n={n}, p={p}")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(self.y[idx], self.x[idx], list(self.labels), None if self.dates is None else self.dates[idx])


@dataclass
class QuantileFit:
    alpha: float
    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    labels: List[str] = field(default_factory=list)
    cov: Optional[np.ndarray] = None
    tstats: Optional[np.ndarray] = None
    iterations: int = 0
    duality_gap: float = 0.0

    def predict(self, x_row):
        return predict_quantile(self, x_row)

    def to_dict(self):
        out = {
            "alpha": self.alpha,
            "labels": list(self.labels),
            "beta": self.beta,
            "objective": self.objective,
            "iterations": self.iterations,
            "duality_gap": self.duality_gap,
        }
        if self.cov is not None:
            out["std_errors"] = np.sqrt(np.diag(self.cov))
            out["tstats"] = self.tstats
        return out

    def coefficient_table(self) -> pd.DataFrame:
        table = pd.DataFrame({"alpha": self.alpha, "term": self.labels, "beta": self.beta})
        if self.cov is not None:
            table["std_error"] = np.sqrt(np.diag(self.cov))
            table["tstat"] = self.tstats
        return table


@dataclass
class BootstrapConfig:
    """Moving-block bootstrap settings; ``block_length=None`` means ``ceil(n ** (1/3))``."""

    replications: int = 999
    block_length: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.replications < 100:
            raise ValueError(f"need at least 100 bootstrap replications, got {self.replications}")

    def resolve_block_length(self, n) -> int:
        b = self.block_length if self.block_length is not None else int(math.ceil(n ** (1.0 / 3.0)))
        if not 1 <= b <= n:
            raise ValueError(f"block_length must be in [1, {n}], got {b}")
        return b


def _check_rank(x):
    _, r, _ = scipy.linalg.qr(x, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    tol = d.max() * max(x.shape) * np.finfo(float).eps if d.size else 0.0
    rank = int(np.sum(d > tol))
    if rank < x.shape[1]:
        raise RankDeficientDesign(f"design matrix has rank {rank} < {x.shape[1]} columns")


def _step_length(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _solve_normal(a, q, rhs):
    m = (a * q) @ a.T
    try:
        return scipy.linalg.solve(m, a @ rhs, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(m, a @ rhs, rcond=None)[0]


def _frisch_newton(x, y, alpha, tol=GAP_TOL, max_iter=MAX_ITER):
    """Interior point solve of the dual of the check-loss problem.

    Solves ``max y'd  s.t. X'd = (1 - alpha) X'1, 0 <= d <= 1`` in its
    minimisation form; the multipliers of the equality constraint are the
    regression coefficients. Returns ``(beta, iterations, gap)``.
    """
    n, p = x.shape
    a = x.T
    c = -y
    u = np.ones(n)
    xp = np.full(n, 1.0 - alpha)
    b = a @ xp
    s = u - xp
    dual = np.linalg.lstsq(a.T, c, rcond=None)[0]
    r = c - a.T @ dual
    r = r + 0.001 * (r == 0)
    z = np.where(r > 0, r, 0.0)
    w = z - r
    gap = c @ xp - dual @ b + w @ u

    it = 0
    while gap > tol * n and it < max_iter:
        it += 1
        # affine step
        q = 1.0 / (z / xp + w / s)
        r = z - w
        dy = _solve_normal(a, q, q * r)
        dx = q * (a.T @ dy - r)
        ds = -dx
        dz = -z * (dx / xp + 1.0)
        dw = -w * (ds / s + 1.0)
        fp = min(_STEP_SHRINK * min(_step_length(xp, dx), _step_length(s, ds)), 1.0)
        fd = min(_STEP_SHRINK * min(_step_length(w, dw), _step_length(z, dz)), 1.0)

        if min(fp, fd) < 1.0:
            # centering and second-order correction
            mu = z @ xp + w @ s
            g = (z + fd * dz) @ (xp + fp * dx) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * (g / mu) ** 3 / (2.0 * n)
            dxdz = dx * dz
            dsdw = ds * dw
            xinv = 1.0 / xp
            sinv = 1.0 / s
            xi = mu * (xinv - sinv)
            rhs = r + dxdz - dsdw - xi
            dy = _solve_normal(a, q, q * rhs)
            dx = q * (a.T @ dy - rhs)
            ds = -dx
            dz = mu * xinv - z - xinv * z * dx - dxdz
            dw = mu * sinv - w - sinv * w * ds - dsdw
            fp = min(_STEP_SHRINK * min(_step_length(xp, dx), _step_length(s, ds)), 1.0)
            fd = min(_STEP_SHRINK * min(_step_length(w, dw), _step_length(z, dz)), 1.0)

        xp = xp + fp * dx
        s = s + fp * ds
        dual = dual + fd * dy
        w = w + fd * dw
        z = z + fd * dz
        gap = c @ xp - dual @ b + w @ u
        if not np.isfinite(gap):
            raise NonConvergence(f"interior point diverged at iteration {it}")

    if gap > tol * n:
        raise NonConvergence(f"duality gap {gap / n:.3g} after {it} iterations")
    return -dual, it, gap / n


def _vertex_polish(x, y, alpha, beta):
    """Move an interior solution onto the nearest optimal vertex.

    An optimal basic solution interpolates ``p`` observations; taking those with
    the smallest residuals and solving exactly gives exact zero residuals.
    """
    n, p = x.shape
    resid = y - x @ beta
    h = np.argsort(np.abs(resid), kind="mergesort")[:p]
    xh = x[h]
    if np.linalg.cond(xh) > 1e10:
        return beta
    candidate = np.linalg.solve(xh, y[h])
    f_old = np.mean(check_loss(resid, alpha))
    f_new = np.mean(check_loss(y - x @ candidate, alpha))
    return candidate if f_new <= f_old + 1e-12 * max(1.0, abs(f_old)) else beta


def _fit_beta(x, y, alpha, tol=GAP_TOL, max_iter=MAX_ITER):
    beta, it, gap = _frisch_newton(x, y, alpha, tol, max_iter)
    return _vertex_polish(x, y, alpha, beta), it, gap


def fit_lqr(
    data: Dataset,
    alpha: float,
    tol: float = GAP_TOL,
    max_iter: int = MAX_ITER,
    bootstrap: Optional[BootstrapConfig] = None,
) -> QuantileFit:
    """Fit one linear conditional quantile by minimising the mean check loss.

    Parameters
    ----------
    data :
        Response and full-rank design.
    alpha :
        Quantile level in (0, 1).
    tol :
        Duality gap tolerance on the mean check loss.
    max_iter :
        Interior point iteration cap.
    bootstrap :
        If given, attach a moving-block bootstrap covariance and t-statistics.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    _check_rank(data.x)
    beta, it, gap = _fit_beta(data.x, data.y, alpha, tol, max_iter)
    resid = data.y - data.x @ beta
    fit = QuantileFit(
        alpha=alpha,
        beta=beta,
        residuals=resid,
        objective=float(np.mean(check_loss(resid, alpha))),
        labels=list(data.labels),
        iterations=it,
        duality_gap=gap,
    )
    if bootstrap is not None:
        fit.cov, fit.tstats = mbb_covariance(data, alpha, bootstrap, beta=beta)
    return fit


def fit_lqr_lp(data: Dataset, alpha: float) -> QuantileFit:
    """Reference solve of the primal LP with the dual simplex of HiGHS."""
    n, p = data.x.shape
    c = np.concatenate([np.zeros(p), alpha * np.ones(n), (1.0 - alpha) * np.ones(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    eye = sparse.identity(n, format="csr")
    a_eq = sparse.hstack([sparse.csr_matrix(data.x), eye, -eye], format="csr")
    res = linprog(c, A_eq=a_eq, b_eq=data.y, bounds=bounds, method="highs-ds")
    if not res.success:
        raise NonConvergence(f"LP solve failed: {res.message}")
    beta = res.x[:p]
    resid = data.y - data.x @ beta
    return QuantileFit(alpha, beta, resid, float(np.mean(check_loss(resid, alpha))), list(data.labels))


def predict_quantile(fit: QuantileFit, x_row) -> float:
    x_row = np.asarray(x_row, dtype=float).ravel()
    if len(x_row) != len(fit.beta):
        raise DimensionMismatch(f"x_row has {len(x_row)} entries, fit has {len(fit.beta)} coefficients")
    if not np.all(np.isfinite(x_row)):
        raise ValueError("x_row contains non-finite values")
    return float(x_row @ fit.beta)


class QuantileProcess(abc.Sequence):
    """Fits over an increasing grid of quantile levels.

    Attributes
    ----------
    fits :
        One :class:`QuantileFit` per level.
    crossings :
        Number of sample rows whose fitted quantiles decrease somewhere along the grid.
    """

    def __init__(self, fits: List[QuantileFit], crossings: int):
        self.fits = fits
        self.crossings = crossings

    def __len__(self):
        return len(self.fits)

    def __getitem__(self, i):
        return self.fits[i]

    @property
    def alphas(self):
        return np.array([f.alpha for f in self.fits])

    def coefficient_table(self) -> pd.DataFrame:
        return pd.concat([f.coefficient_table() for f in self.fits], ignore_index=True)

    def to_dict(self):
        return {"fits": [f.to_dict() for f in self.fits], "crossings": self.crossings}


def quantile_process(
    data: Dataset, alphas: Sequence[float], bootstrap: Optional[BootstrapConfig] = None, progbar: bool = False
) -> QuantileProcess:
    """Fit every level of ``alphas`` and report quantile crossing in the sample."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or len(alphas) == 0 or np.any(np.diff(alphas) <= 0) or alphas[0] <= 0 or alphas[-1] >= 1:
        raise ValueError("alphas must be strictly increasing inside (0, 1)")
    fits = [fit_lqr(data, float(a), bootstrap=bootstrap) for a in progress(alphas, progbar=progbar)]
    fitted = data.x @ np.column_stack([f.beta for f in fits])
    crossings = int(np.sum(np.any(np.diff(fitted, axis=1) < -1e-9, axis=1)))
    if crossings:
        logger.warning("quantile crossing in %d of %d sample rows", crossings, data.n)
    return QuantileProcess(fits, crossings)


def mbb_covariance(
    data: Dataset, alpha: float, cfg: BootstrapConfig = BootstrapConfig(), beta=None, progbar: bool = False
):
    """Moving-block bootstrap covariance of the quantile regression coefficients.

    Blocks of consecutive rows are drawn with wrap-around. Returns
    ``(cov, tstats)``; t-statistics are taken at ``beta`` (refitted if not given).
    """
    block = cfg.resolve_block_length(data.n)
    if beta is None:
        beta = _fit_beta(data.x, data.y, alpha)[0]
    bs = CircularBlockBootstrap(block, data.y, data.x, seed=np.random.default_rng(cfg.seed))
    draws, failed = [], 0
    for pos, _ in progress(bs.bootstrap(cfg.replications), total=cfg.replications, progbar=progbar):
        y_b, x_b = pos
        try:
            draws.append(_fit_beta(x_b, y_b, alpha)[0])
        except (NumericalError, np.linalg.LinAlgError):
            failed += 1
    if failed > 0.05 * cfg.replications:
        raise BootstrapFailure(f"{failed} of {cfg.replications} bootstrap refits failed")
    if failed:
        logger.warning("%d of %d bootstrap refits failed and were skipped", failed, cfg.replications)
    cov = np.atleast_2d(np.cov(np.asarray(draws), rowvar=False))
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    scale = np.maximum(np.abs(beta), 1e-12)
    if np.any(se <= 1e-10 * scale):
        flat = [label for label, s, b in zip(data.labels, se, scale) if s <= 1e-10 * b]
        logger.warning("near-zero bootstrap variance for %s", flat)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.asarray(beta) / se
    return cov, tstats
