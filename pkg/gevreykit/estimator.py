"""
Empirical Gevrey orders from coefficient growth of a computed BiSeries.

Fits run in log space: log|u| against log n! with n, log n and a constant as
nuisance terms, over the trusted window minus a 20% burn-in.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import gammaln

from .series import BiSeries, UniSeries, log_abs, log_borel_m, majorant_abs

BURN_IN = 0.2
MIN_POINTS = 8
REGULARITY_MIN_POINTS = 30


@dataclass(frozen=True)
class LineFit:
    """One least-squares fit of log-magnitudes against log n!."""
    index: int  # fixed row k (or column l) of the fit
    slope: float  # coefficient of log n!, i.e. order - 1
    stderr: float
    window: Tuple[int, int]
    points: int
    rms: float


@dataclass
class FitComponent:
    value: Optional[float] = None
    stderr: Optional[float] = None
    fits: List[LineFit] = field(default_factory=list)
    skipped: List[Tuple[int, str]] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'value': self.value,
            'stderr': self.stderr,
            'fits': [
                {'index': f.index, 'order': 1.0 + f.slope, 'stderr': f.stderr,
                 'window': list(f.window), 'points': f.points, 'rms': f.rms}
                for f in self.fits
            ],
            'skipped': [{'index': i, 'reason': r} for i, r in self.skipped],
            'flags': list(self.flags),
        }


@dataclass
class GevreyFit:
    sigma: FitComponent
    s: FitComponent

    def to_dict(self) -> Dict:
        return {'sigma_hat': self.sigma.to_dict(), 's_hat': self.s.to_dict()}


def _window_start(last: int) -> int:
    return max(1, int(math.ceil(BURN_IN * last)))


def fit_growth(n: Sequence[int], logs: Sequence[float]) -> Tuple[float, float, float]:
    """
    Fit logs ~ a*log n! + b*n + c*log n + d.

    Returns:
        (a, stderr of a, rms residual)
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(logs, dtype=float)
    X = np.column_stack([gammaln(n + 1.0), n, np.log(n), np.ones_like(n)])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    rss = float(resid @ resid)
    if rank < X.shape[1]:
        return float(coef[0]), math.inf, math.sqrt(rss / len(y))
    cov = (rss / dof) * np.linalg.inv(X.T @ X)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))), math.sqrt(rss / len(y))


def _aggregate(component: FitComponent, label: str):
    if not component.fits:
        return
    orders = np.array([1.0 + f.slope for f in component.fits])
    errors = np.array([f.stderr for f in component.fits])
    component.value = float(orders.mean())
    spread = float(orders.std()) if len(orders) > 1 else 0.0
    component.stderr = max(float(errors.mean()), spread)
    if component.value < 1.0:
        component.flags.append(f"{label} < 1: convergent in this direction")


def _fit_sequence(index: int, positions: Sequence[int],
                  values: Sequence[Fraction]) -> Tuple[Optional[LineFit], str]:
    last = len(values) - 1
    start = _window_start(last)
    pts, logs = [], []
    for n in range(start, last + 1):
        if values[n] != 0:
            pts.append(positions[n])
            logs.append(log_abs(values[n]))
    if len(pts) < MIN_POINTS:
        reason = "all zero" if not any(values) else f"only {len(pts)} nonzero coefficients in window"
        return None, reason
    slope, stderr, rms = fit_growth(pts, logs)
    return LineFit(index, slope, stderr, (start, last), len(pts), rms), ""


def fit_sigma(u: BiSeries, k_rows: Optional[Sequence[int]] = None) -> FitComponent:
    """
    sigma_hat from x-direction growth, one fit per row, averaged.

    Rows with fewer than 8 nonzero coefficients in their window are skipped
    and recorded.
    """
    rows = list(k_rows) if k_rows is not None else list(range(1, u.trunc_t + 1))
    component = FitComponent()
    for k in rows:
        row = u.row(k)
        fit, reason = _fit_sequence(k, list(range(row.trunc + 1)), row.coeffs)
        if fit is None:
            component.skipped.append((k, reason))
        else:
            component.fits.append(fit)
    _aggregate(component, "sigma")
    return component


def _row_maxima(u: BiSeries, sigma_hat: float, rho: float) -> List[float]:
    """S_k = max_l log|u_{k,l}| + l log rho - (sigma_hat - 1) log l!."""
    out = []
    for k in range(u.trunc_t + 1):
        row = u.row(k)
        best = -math.inf
        for l, value in enumerate(row.coeffs):
            if value != 0:
                best = max(best, log_abs(value) + l * math.log(rho) - (sigma_hat - 1.0) * float(gammaln(l + 1.0)))
        out.append(best)
    return out


def fit_s(u: BiSeries, mode: str = "rows", sigma_hat: Optional[float] = None,
          rho: float = 0.5) -> FitComponent:
    """
    s_hat from t-direction growth.

    Args:
        u: computed series
        mode: "rows" fits the sigma_hat-normalized row maxima against log k!;
            "columns" fits each fixed-l column separately
        sigma_hat: x-order used for the normalization (fitted when omitted)
        rho: trial radius for the normalization

    Returns:
        FitComponent for s
    """
    component = FitComponent()
    if mode == "columns":
        for l in range(u.trunc_x + 1):
            column = [u.coeff(k, l) for k in range(u.trunc_t + 1)]
            fit, reason = _fit_sequence(l, list(range(u.trunc_t + 1)), column)
            if fit is None:
                component.skipped.append((l, reason))
            else:
                component.fits.append(fit)
        _aggregate(component, "s")
        return component
    if mode != "rows":
        raise ValueError(f"Unknown fit_s mode: {mode}")

    if sigma_hat is None:
        sigma_hat = fit_sigma(u).value or 1.0
    maxima = _row_maxima(u, max(sigma_hat, 1.0), rho)
    last = len(maxima) - 1
    start = _window_start(last)
    ks = [k for k in range(start, last + 1) if math.isfinite(maxima[k])]
    if len(ks) < MIN_POINTS:
        component.skipped.append((0, f"only {len(ks)} nonzero rows in window"))
        return component
    slope, stderr, rms = fit_growth(ks, [maxima[k] for k in ks])
    component.fits.append(LineFit(0, slope, stderr, (start, last), len(ks), rms))
    _aggregate(component, "s")
    return component


def estimate(u: BiSeries, rho: float = 0.5, k_rows: Optional[Sequence[int]] = None) -> GevreyFit:
    sigma = fit_sigma(u, k_rows)
    return GevreyFit(sigma, fit_s(u, "rows", sigma.value, rho))


class Verdict(Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class MembershipResult:
    s: Fraction
    sigma: Fraction
    verdict: Verdict
    root_estimate: float  # max n-th root of the normalized coefficients over the tail
    growth_exponent: Optional[float] = None
    stderr: Optional[float] = None
    margin: Optional[float] = None
    window: Tuple[int, int] = (0, 0)

    def to_dict(self) -> Dict:
        return {
            's': float(self.s),
            'sigma': float(self.sigma),
            'verdict': self.verdict.value,
            'root_estimate': self.root_estimate,
            'growth_exponent': self.growth_exponent,
            'stderr': self.stderr,
            'margin': self.margin,
            'window': list(self.window),
        }


def membership_test(u: BiSeries, s, sigma, rho: float = 0.5) -> MembershipResult:
    """
    Root test on a_{k,l} / (k!^{s-1} l!^{sigma-1}) over the tail n = k + l.

    consistent: the n-th roots stay below 1/rho;
    inconsistent: the n-th roots grow like n^gamma with gamma > 2 stderr;
    inconclusive otherwise.
    """
    s, sigma = Fraction(s), Fraction(sigma)
    entries = [(k, l, v) for k, l, v in u.items() if v != 0 and k + l > 0]
    if not entries:
        return MembershipResult(s, sigma, Verdict.CONSISTENT, 0.0)
    n_max = max(k + l for k, l, _ in u.items())
    start = _window_start(n_max)
    diagonal: Dict[int, float] = {}
    for k, l, v in entries:
        n = k + l
        if n < start:
            continue
        log_b = log_abs(v) - float(s - 1) * float(gammaln(k + 1.0)) - float(sigma - 1) * float(gammaln(l + 1.0))
        diagonal[n] = max(diagonal.get(n, -math.inf), log_b)
    if not diagonal:
        return MembershipResult(s, sigma, Verdict.INCONCLUSIVE, math.nan, window=(start, n_max))
    roots = {n: value / n for n, value in diagonal.items()}
    log_root = max(roots.values())
    root = math.exp(log_root) if log_root < 700 else math.inf
    if log_root <= -math.log(rho):
        return MembershipResult(s, sigma, Verdict.CONSISTENT, root, window=(start, n_max))

    ns = sorted(roots)
    if len(ns) < MIN_POINTS:
        return MembershipResult(s, sigma, Verdict.INCONCLUSIVE, root, window=(start, n_max))
    X = np.column_stack([np.log(ns), np.ones(len(ns))])
    y = np.array([roots[n] for n in ns])
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(ns) - 2, 1)
    cov = (float(resid @ resid) / dof) * np.linalg.inv(X.T @ X)
    gamma, stderr = float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))
    margin = gamma - 2.0 * stderr
    verdict = Verdict.INCONSISTENT if margin > 0 else Verdict.INCONCLUSIVE
    return MembershipResult(s, sigma, verdict, root, gamma, stderr, margin, (start, n_max))


def membership_grid(u: BiSeries, s_values: Sequence, sigma_values: Sequence,
                    rho: float = 0.5) -> pd.DataFrame:
    """Verdict table over every (s, sigma) pair with s, sigma >= 1."""
    records = []
    for s in s_values:
        for sigma in sigma_values:
            if Fraction(s) < 1 or Fraction(sigma) < 1:
                continue
            result = membership_test(u, s, sigma, rho)
            records.append(result.to_dict())
    columns = ["s", "sigma", "verdict", "root_estimate", "growth_exponent", "stderr", "margin"]
    return pd.DataFrame(records, columns=columns + ["window"]).drop(columns=["window"])


@dataclass
class BoundCheck:
    per_k: Dict[int, bool]
    witness: Optional[Tuple[int, int]] = None

    @property
    def passed(self) -> bool:
        return all(self.per_k.values())


def verify_bound_e64(u: BiSeries, k_max: Optional[int] = None) -> BoundCheck:
    """
    Exact check u_{k,l} / l! <= 2^{k-1} binom(l + 2k - 2, l) on every trusted l.

    The right side is the x^l coefficient of 2^{k-1} / (1 - x)^{2k-1}.
    """
    k_max = u.trunc_t if k_max is None else min(k_max, u.trunc_t)
    per_k: Dict[int, bool] = {}
    witness = None
    for k in range(k_max + 1):
        row = u.row(k)
        bad = None
        for l, value in enumerate(row.coeffs):
            if k == 0:
                if value != 0:
                    bad = (k, l)
            elif value / math.factorial(l) > 2 ** (k - 1) * math.comb(l + 2 * k - 2, l):
                bad = (k, l)
            if bad:
                break
        if bad and witness is None:
            witness = bad
        per_k[k] = bad is None
    return BoundCheck(per_k, witness)


@dataclass(frozen=True)
class RegularityCheck:
    k: int
    excess: Optional[float]  # fitted Gevrey excess of the Borel-normalized row
    stderr: Optional[float]
    rate: Optional[float]  # geometric growth rate of the normalized coefficients
    bounded: Optional[bool]

    def to_dict(self) -> Dict:
        return {'k': self.k, 'excess': self.excess, 'stderr': self.stderr,
                'rate': self.rate, 'bounded': self.bounded}


def gevrey_regularity_in_x(u: BiSeries, k: int, sigma, m: int = 0,
                           tolerance: float = 0.1) -> RegularityCheck:
    """
    B_sigma^(m)[|u_k|] looks geometrically bounded: no leftover log l! growth
    beyond tolerance + 2 stderr.

    Needs REGULARITY_MIN_POINTS nonzero coefficients after burn-in; shorter rows
    give bounded=None.
    """
    row: UniSeries = majorant_abs(u.row(k))
    logs = log_borel_m(row, float(sigma), m)
    start = _window_start(row.trunc)
    ls = [l for l in range(start, row.trunc + 1) if math.isfinite(logs[l])]
    if len(ls) < REGULARITY_MIN_POINTS:
        return RegularityCheck(k, None, None, None, None)
    excess, stderr, _ = fit_growth(ls, [logs[l] for l in ls])
    slope = np.polyfit(np.array(ls, dtype=float), np.array([logs[l] for l in ls]), 1)[0]
    return RegularityCheck(k, excess, stderr, float(math.exp(slope)),
                           excess <= tolerance + 2.0 * stderr)
