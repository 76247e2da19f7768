"""
Newton polygon at x = 0, the conditions (N), (GP) and (R), and the indices
sigma0 (irregularity in x), s0 and s1 (Gevrey order in t).
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .equation import (
    EquationSpec, IndexPair, MultiIndex, NormalizedEquation, canonical_linear, eval_L, normalize,
)
from .series import UniSeries, format_rat, valuation2
from .validation import InvariantBreach, ValidationLevel, ValidationResult

Point = Tuple[int, int]
Valuation = Union[int, float]


def _as_point(point) -> Point:
    if isinstance(point, IndexPair):
        return point.as_tuple()
    j, alpha = point
    return (int(j), int(alpha))


def resolve_threads(threads: int) -> int:
    """0 means one worker per CPU."""
    if threads and threads > 0:
        return threads
    return os.cpu_count() or 1


def _map_rows(fn: Callable, rows: Iterable, threads: int = 1) -> List:
    """Map over grid rows; results come back in row order whatever the worker count."""
    rows = list(rows)
    workers = resolve_threads(threads)
    if workers <= 1 or len(rows) < 2:
        return [fn(r) for r in rows]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, rows))


@dataclass(frozen=True)
class NewtonPolygon:
    """Vertices (m_1, n_1) = (m, 0), ..., (m_p, n_p) with m_i decreasing and n_i increasing."""
    vertices: Tuple[Point, ...]

    @property
    def m(self) -> int:
        return self.vertices[0][0]

    @property
    def p(self) -> int:
        return len(self.vertices)

    @property
    def slopes(self) -> Tuple[Fraction, ...]:
        """s_i = (n_{i+1} - n_i) / (m_i - m_{i+1}) for i = 1..p-1."""
        return tuple(
            Fraction(n2 - n1, m1 - m2)
            for (m1, n1), (m2, n2) in zip(self.vertices, self.vertices[1:])
        )

    def height(self, j: int) -> Fraction:
        """Height of the upper boundary above abscissa j (j <= m)."""
        if j > self.m:
            raise ValueError(f"No polygon boundary above j={j} > m={self.m}")
        last_m, last_n = self.vertices[-1]
        if j <= last_m:
            return Fraction(last_n)
        for (m1, n1), (m2, n2) in zip(self.vertices, self.vertices[1:]):
            if m2 <= j <= m1:
                return n1 + Fraction(n2 - n1, m1 - m2) * (m1 - j)
        raise ValueError(f"Abscissa {j} not covered by polygon edges")

    def contains(self, point) -> bool:
        j, alpha = _as_point(point)
        return j <= self.m and alpha <= self.height(j)

    def to_dict(self) -> Dict:
        return {
            'vertices': [list(v) for v in self.vertices],
            'slopes': [format_rat(s) for s in self.slopes],
        }


def build_polygon(lambda0: Iterable) -> NewtonPolygon:
    """
    Upper boundary of the convex hull of the quadrants {x <= j, y <= alpha}.

    Args:
        lambda0: exponent pairs (IndexPair or (j, alpha)); must contain (m, 0)
            where m is the largest j

    Returns:
        NewtonPolygon with vertices listed from (m, 0) leftwards
    """
    points = {_as_point(p) for p in lambda0}
    if not points:
        raise ValueError("Cannot build a polygon from an empty point set")
    m = max(j for j, _ in points)
    if (m, 0) not in points:
        raise ValueError(f"Point set must contain ({m}, 0)")
    top = max(alpha for _, alpha in points)
    left = max(j for j, alpha in points if alpha == top)

    # keep the highest point per abscissa in [left, m]
    best: Dict[int, int] = {}
    for j, alpha in points:
        if j >= left:
            best[j] = max(best.get(j, alpha), alpha)
    chain: List[Point] = []
    for pt in sorted(best.items()):
        while len(chain) >= 2:
            (ox, oy), (ax, ay) = chain[-2], chain[-1]
            cross = (ax - ox) * (pt[1] - oy) - (ay - oy) * (pt[0] - ox)
            if cross >= 0:
                chain.pop()
            else:
                break
        chain.append(pt)
    return NewtonPolygon(tuple(reversed(chain)))


def distance_d(poly: NewtonPolygon, point) -> Fraction:
    """d_{j,alpha}: signed height of the point above the polygon boundary (<= 0 inside)."""
    j, alpha = _as_point(point)
    if j > poly.m:
        raise ValueError(f"distance_d undefined for j={j} > m={poly.m}")
    return alpha - poly.height(j)


def phi(poly: NewtonPolygon, k: int, l: int) -> int:
    """phi(k, l) = sum over vertices of k^{m_i} l^{n_i}."""
    return sum(k ** mi * l ** ni for mi, ni in poly.vertices)


@dataclass(frozen=True)
class CharPoly:
    edge_index: int
    coefficients: Tuple[Fraction, ...]  # ascending powers of X
    roots: Tuple[complex, ...]
    radii: Tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, x: Fraction) -> Fraction:
        total = Fraction(0)
        for c in reversed(self.coefficients):
            total = total * x + c
        return total

    def to_dict(self) -> Dict:
        return {
            'edge': self.edge_index,
            'coefficients': [format_rat(c) for c in self.coefficients],
            'roots': [
                {'re': z.real, 'im': z.imag, 'radius': r}
                for z, r in zip(self.roots, self.radii)
            ],
        }


def _polished_roots(coefficients: Sequence[Fraction]) -> Tuple[Tuple[complex, ...], Tuple[float, ...]]:
    """Companion-matrix roots, one Newton step each, with inclusion radius deg*|P/P'|."""
    degree = len(coefficients) - 1
    if degree < 1:
        return (), ()
    desc = np.array([float(c) for c in reversed(coefficients)], dtype=float)
    deriv = np.polyder(desc)
    roots, radii = [], []
    for z in np.roots(desc):
        z = complex(z)
        slope = complex(np.polyval(deriv, z))
        if slope != 0:
            z = z - complex(np.polyval(desc, z)) / slope
            slope = complex(np.polyval(deriv, z))
        value = abs(complex(np.polyval(desc, z)))
        radius = degree * value / abs(slope) if slope != 0 else math.inf
        radius = max(radius, 8 * np.finfo(float).eps * (1.0 + abs(z)))
        roots.append(z)
        radii.append(float(radius))
    order = sorted(range(len(roots)), key=lambda n: (round(roots[n].real, 12), round(roots[n].imag, 12)))
    return tuple(roots[n] for n in order), tuple(radii[n] for n in order)


def char_poly(norm: NormalizedEquation, poly: NewtonPolygon, i: int) -> CharPoly:
    """
    Characteristic polynomial on edge i (1-based; edge p is the horizontal half line).

    P_i(X) = sum over Lambda_0 points on the edge of c_{j,alpha}(0) X^{j - m_{i+1}};
    P_p(X) = sum over points on alpha = n_p of c_{j,alpha}(0) X^j, or 1 when m_p = 0.
    """
    if not 1 <= i <= poly.p:
        raise ValueError(f"Edge index {i} outside 1..{poly.p}")
    if i < poly.p:
        (m1, _), (m2, _) = poly.vertices[i - 1], poly.vertices[i]
        coeffs = [Fraction(0)] * (m1 - m2 + 1)
        for pair in norm.lambda0:
            if m2 <= pair.j <= m1 and poly.height(pair.j) == pair.alpha:
                coeffs[pair.j - m2] += norm.c0(pair)
    else:
        mp, np_ = poly.vertices[-1]
        if mp == 0:
            coeffs = [Fraction(1)]
        else:
            coeffs = [Fraction(0)] * (mp + 1)
            for pair in norm.lambda0:
                if pair.alpha == np_ and pair.j <= mp:
                    coeffs[pair.j] += norm.c0(pair)
    roots, radii = _polished_roots(coeffs)
    return CharPoly(i, tuple(coeffs), roots, radii)


class GPStatus(Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class GPVerdict:
    status: GPStatus
    edge: Optional[int] = None
    root: Optional[complex] = None
    distance: Optional[float] = None
    detail: str = ""
    polynomials: Tuple[CharPoly, ...] = ()

    def to_dict(self) -> Dict:
        return {
            'status': self.status.value,
            'edge': self.edge,
            'root': None if self.root is None else {'re': self.root.real, 'im': self.root.imag},
            'distance': self.distance,
            'detail': self.detail,
        }


def _distance_to_ray(z: complex) -> float:
    """Distance from z to [0, +inf)."""
    return abs(z.imag) if z.real >= 0 else abs(z)


def _real_root_witness(cp: CharPoly, z: complex, radius: float) -> Optional[Fraction]:
    """A proven root of P in [0, +inf) near z, or None when nothing can be proven."""
    if cp.coefficients[0] == 0 and abs(z) <= 10 * radius:
        return Fraction(0)
    if z.real <= 0:
        return None
    width = max(10 * radius, 1e-9 * abs(z), 1e-12)
    lo, hi = Fraction(z.real - width), Fraction(z.real + width)
    if lo <= 0:
        return None
    v_lo, v_hi = cp.evaluate(lo), cp.evaluate(hi)
    if v_lo == 0:
        return lo
    if v_hi == 0:
        return hi
    if (v_lo > 0) != (v_hi > 0):
        return (lo + hi) / 2
    return None


def check_gp(norm: NormalizedEquation, poly: NewtonPolygon) -> GPVerdict:
    """
    Roots of P_i (i < p) must avoid [0, +inf); roots of P_p must avoid 1, 2, 3, ...

    A root closer to the forbidden set than 10 times its inclusion radius is
    either proven to lie on it (exact evaluation) or reported as uncertain.
    """
    polys = tuple(char_poly(norm, poly, i) for i in range(1, poly.p + 1))
    uncertain: Optional[GPVerdict] = None
    for cp in polys:
        last = cp.edge_index == poly.p
        for z, radius in zip(cp.roots, cp.radii):
            if last:
                n = max(1, int(round(z.real)))
                distance = abs(z - n)
                if distance > 10 * radius:
                    continue
                if cp.evaluate(Fraction(n)) == 0:
                    return GPVerdict(GPStatus.FAILS, cp.edge_index, complex(n), 0.0,
                                     f"P_{cp.edge_index}({n}) = 0", polys)
            else:
                distance = _distance_to_ray(z)
                if distance > 10 * radius:
                    continue
                witness = _real_root_witness(cp, z, radius)
                if witness is not None:
                    return GPVerdict(GPStatus.FAILS, cp.edge_index, complex(float(witness)), 0.0,
                                     f"P_{cp.edge_index} has a root in [0, +inf) near {float(witness):.6g}", polys)
            if uncertain is None:
                uncertain = GPVerdict(
                    GPStatus.UNCERTAIN, cp.edge_index, z, distance,
                    f"root {z:.6g} of P_{cp.edge_index} within {distance:.3g} of the forbidden set "
                    f"(inclusion radius {radius:.3g})", polys)
    return uncertain if uncertain is not None else GPVerdict(GPStatus.HOLDS, polynomials=polys)


@dataclass(frozen=True)
class NVerdict:
    holds: bool
    exact_cert: bool
    verified_on_grid: Optional[int]  # grid bound K_N, None when a zero was found
    asymptotic_cert: bool
    witness: Optional[Point] = None
    c0_grid: Optional[Fraction] = None  # min |L|/phi over the grid
    status: str = ""

    def to_dict(self) -> Dict:
        return {
            'holds': self.holds,
            'exact_cert': self.exact_cert,
            'verified_on_grid': self.verified_on_grid,
            'asymptotic_cert': self.asymptotic_cert,
            'witness': None if self.witness is None else list(self.witness),
            'c0_grid': None if self.c0_grid is None else format_rat(self.c0_grid),
            'status': self.status,
        }


def check_N(norm: NormalizedEquation, grid_n: int = 40, poly: Optional[NewtonPolygon] = None,
            gp: Optional[GPVerdict] = None, threads: int = 1) -> NVerdict:
    """
    Non-resonance L(k, l) != 0 on N* x N.

    Certified exactly when every c_{j,alpha}(0) <= 0 (then L(k,l) >= k^m >= 1);
    otherwise checked on 1 <= k <= grid_n, 0 <= l <= grid_n and justified
    asymptotically only if (GP) holds.
    """
    poly = poly or build_polygon(norm.lambda0)
    gp = gp or check_gp(norm, poly)
    exact = all(norm.c0(pair) <= 0 for pair in norm.lambda_all)

    def scan(k: int):
        zero = None
        ratio = None
        for l in range(grid_n + 1):
            value = eval_L(norm, k, l)
            if value == 0 and zero is None:
                zero = (k, l)
            r = abs(value) / phi(poly, k, l)
            ratio = r if ratio is None else min(ratio, r)
        return zero, ratio

    results = _map_rows(scan, range(1, grid_n + 1), threads)
    zeros = [z for z, _ in results if z is not None]
    ratios = [r for _, r in results if r is not None]
    c0 = min(ratios) if ratios else None
    asymptotic = gp.status is GPStatus.HOLDS

    if zeros:
        k, l = zeros[0]
        return NVerdict(False, False, None, asymptotic, (k, l), c0, f"resonance: L({k},{l}) = 0")
    if exact:
        status = "exact: every c_{j,alpha}(0) <= 0, so L(k,l) >= k^m >= 1"
    elif asymptotic:
        status = f"no zero for k,l <= {grid_n}; beyond the grid by |L| >= c0*phi under (GP)"
    else:
        status = f"no zero for k,l <= {grid_n}; no certificate beyond the grid ((GP) {gp.status.value})"
    return NVerdict(True, exact, grid_n, asymptotic, None, c0, status)


def sigma0(norm: NormalizedEquation, poly: NewtonPolygon) -> Tuple[Fraction, Tuple[IndexPair, ...]]:
    """sigma0 = max[1, max over Lambda_1 of (p + d)/p] with the attaining pairs."""
    best = Fraction(1)
    attained: List[IndexPair] = []
    for pair in sorted(norm.lambda1):
        p = norm.p[pair]
        value = (p + distance_d(poly, pair)) / p
        if value > best:
            best, attained = value, [pair]
        elif value == best and value > 1:
            attained.append(pair)
    return best, tuple(attained)


def is_regular_singular(norm: NormalizedEquation, poly: NewtonPolygon) -> bool:
    """(R): every Lambda_1 point lies in the polygon."""
    return all(distance_d(poly, pair) <= 0 for pair in norm.lambda1)


def _derivative_at_zero(series: UniSeries, mu: int) -> Optional[Fraction]:
    if mu > series.trunc:
        return None
    return series.coeffs[mu] * math.factorial(mu)


def _sorted_table(norm: NormalizedEquation) -> List[Tuple[Tuple[int, MultiIndex], UniSeries]]:
    table = norm.spec.nonlinear_table()
    return sorted(table.items(), key=lambda kv: (kv[0][0], kv[0][1].entries))


def mu_range(norm: NormalizedEquation) -> range:
    """Orders of x-derivatives scanned for s0: mu < m, or every known order for a general index set."""
    if not norm.spec.is_general:
        return range(norm.m)
    orders = [series.trunc for (_, nu), series in _sorted_table(norm) if nu.order >= 1]
    return range(max(orders, default=-1) + 1)


def partial_valuation(norm: NormalizedEquation, mu: int, pair: IndexPair) -> Valuation:
    """
    L_{mu,j,alpha}: valuation at x = 0 of d/dz_{j,alpha} d^mu/dx^mu of the nonlinear part.
    """
    F: Dict[Tuple[int, MultiIndex], UniSeries] = {}
    for (i, nu), series in _sorted_table(norm):
        count = nu.get(pair)
        value = _derivative_at_zero(series, mu) if count else None
        if value is not None:
            F[(i, nu.without_one(pair))] = UniSeries.from_coeffs([value * count])
    return valuation2(F, at_x_zero=True)


def _z_pairs(norm: NormalizedEquation) -> List[IndexPair]:
    return sorted({pair for (_, nu), _ in _sorted_table(norm) for pair in nu.support})


def _s0_numerator(pair: IndexPair, mu: int, sigma: Fraction, m: int, general: bool) -> Fraction:
    grown = mu + sigma * (pair.alpha - mu)
    if general:
        return pair.j + max(Fraction(pair.alpha), grown) - m
    return pair.j + grown - m


def s0_by_valuation(norm: NormalizedEquation, sigma: Fraction) -> Tuple[Fraction, Optional[Dict]]:
    """s0 = 1 + max[0, max over mu and (j,alpha) of numerator / L_{mu,j,alpha}]."""
    general = norm.spec.is_general
    best, where = Fraction(0), None
    pairs = _z_pairs(norm)
    for mu in mu_range(norm):
        for pair in pairs:
            order = partial_valuation(norm, mu, pair)
            if order == math.inf:
                continue
            value = _s0_numerator(pair, mu, sigma, norm.m, general) / order
            if value > best:
                best = value
                where = {'mu': mu, 'pair': list(pair.as_tuple()), 'valuation': order}
    return 1 + best, where


def s0_by_terms(norm: NormalizedEquation, sigma: Fraction) -> Tuple[Fraction, Optional[Dict]]:
    """
    s0 = 1 + max[0, sup over mu and terms with (d^mu a_{i,nu})(0) != 0 of (m_{nu,mu} - m)/(i + |nu| - 1)],
    m_{nu,mu} = max over the support of j + max{alpha, mu + sigma(alpha - mu)}.
    """
    best, where = Fraction(0), None
    for mu in mu_range(norm):
        for (i, nu), series in _sorted_table(norm):
            if nu.order == 0:
                continue
            value = _derivative_at_zero(series, mu)
            if not value:
                continue
            m_nu = max(p.j + max(Fraction(p.alpha), mu + sigma * (p.alpha - mu)) for p in nu.support)
            ratio = (m_nu - norm.m) / (i + nu.order - 1)
            if ratio > best:
                best = ratio
                where = {'mu': mu, 'i': i, 'nu': nu.to_list()}
    return 1 + best, where


def s1_index(norm: NormalizedEquation, sigma: Fraction) -> Tuple[Fraction, Optional[Dict]]:
    """s1: as s0 but with 0 <= mu <= max alpha and only pairs with alpha >= mu."""
    top_alpha = max(p.alpha for p in norm.spec.index_pairs)
    best, where = Fraction(0), None
    pairs = _z_pairs(norm)
    for mu in range(top_alpha + 1):
        for pair in pairs:
            if pair.alpha < mu:
                continue
            order = partial_valuation(norm, mu, pair)
            if order == math.inf:
                continue
            value = (pair.j + mu + sigma * (pair.alpha - mu) - norm.m) / order
            if value > best:
                best = value
                where = {'mu': mu, 'pair': list(pair.as_tuple()), 'valuation': order}
    return 1 + best, where


@dataclass(frozen=True)
class IndexResult:
    sigma0: Fraction
    s0: Fraction
    s0_alt: Fraction
    s1: Fraction
    sigma0_attribution: Tuple[IndexPair, ...] = ()
    s0_attribution: Optional[Dict] = None
    s0_alt_attribution: Optional[Dict] = None
    s1_attribution: Optional[Dict] = None
    truncation_limited: bool = False

    @property
    def s0_equals_s1(self) -> bool:
        return self.s0 == self.s1

    def to_dict(self) -> Dict:
        return {
            'sigma0': format_rat(self.sigma0),
            's0': format_rat(self.s0),
            's0_alt': format_rat(self.s0_alt),
            's1': format_rat(self.s1),
            's0_equals_s1': self.s0_equals_s1,
            'truncation_limited': self.truncation_limited,
            'attribution': {
                'sigma0': [list(p.as_tuple()) for p in self.sigma0_attribution],
                's0': self.s0_attribution,
                's0_alt': self.s0_alt_attribution,
                's1': self.s1_attribution,
            },
        }


def compute_indices(norm: NormalizedEquation, poly: Optional[NewtonPolygon] = None) -> IndexResult:
    """sigma0, s0 by both routes (must agree exactly), and s1."""
    poly = poly or build_polygon(norm.lambda0)
    sig, sig_at = sigma0(norm, poly)
    s0_val, s0_at = s0_by_valuation(norm, sig)
    s0_alt, s0_alt_at = s0_by_terms(norm, sig)
    if s0_val != s0_alt:
        raise InvariantBreach(
            f"s0 routes disagree: {format_rat(s0_val)} (valuations) vs {format_rat(s0_alt)} (terms)")
    s1_val, s1_at = s1_index(norm, sig)
    limited = norm.spec.is_general and any(
        series.coeffs[-1] != 0 for (_, nu), series in _sorted_table(norm) if nu.order >= 1)
    return IndexResult(sig, s0_val, s0_alt, s1_val, sig_at, s0_at, s0_alt_at, s1_at, limited)


def holomorphic_in_t_criterion(norm: NormalizedEquation, sigma: Fraction) -> Optional[bool]:
    """
    sigma0 <= (m - j - mu)/(alpha - mu) for every (j, alpha) with alpha > mu that
    meets a term whose mu-th x-derivative is nonzero at 0 (0 <= mu < m).
    Equivalent to s0 = 1; None for a general index set.
    """
    if norm.spec.is_general:
        return None
    for mu in range(norm.m):
        for (i, nu), series in _sorted_table(norm):
            if nu.order == 0 or not _derivative_at_zero(series, mu):
                continue
            for pair in nu.support:
                if pair.alpha > mu and sigma > Fraction(norm.m - pair.j - mu, pair.alpha - mu):
                    return False
    return True


def optimality_hypotheses(norm: NormalizedEquation) -> Dict[str, bool]:
    """Sign conditions under which (s0, sigma0) is the exact Gevrey order."""
    a = norm.spec.a
    c1 = not a.is_zero() and all(v >= 0 for v in a.coeffs)
    c2 = all(norm.c0(pair) <= 0 for pair in norm.lambda_all)
    c3 = all(all(v >= 0 for v in norm.c[pair].coeffs[1:]) for pair in norm.lambda_all)
    c4 = all(all(v >= 0 for v in term.series.coeffs) for term in norm.spec.nonlinear)
    return {'c1': c1, 'c2': c2, 'c3': c3, 'c4': c4, 'all': c1 and c2 and c3 and c4}


class EquationType(Enum):
    FUCHSIAN = "fuchsian"
    GOURSAT = "goursat"
    TOTALLY_CHARACTERISTIC = "totally_characteristic"


def classify_type(spec: EquationSpec) -> EquationType:
    """By the coefficients b_{j,alpha} with alpha > 0 in the d/dx basis."""
    b = {pair: s for pair, s in canonical_linear(spec).items() if pair.alpha > 0}
    if all(s.is_zero() for s in b.values()):
        return EquationType.FUCHSIAN
    if any(s.constant != 0 for s in b.values()):
        return EquationType.GOURSAT
    return EquationType.TOTALLY_CHARACTERISTIC


def phi_dominates(poly: NewtonPolygon, point, k_max: int = 200, l_max: int = 200,
                  threads: int = 1) -> Optional[Point]:
    """k^j l^alpha <= phi(k, l) on 1 <= k <= k_max, 0 <= l <= l_max; returns a violating (k, l) or None."""
    j, alpha = _as_point(point)

    def row(k: int):
        for l in range(l_max + 1):
            if k ** j * l ** alpha > phi(poly, k, l):
                return (k, l)
        return None

    return next((w for w in _map_rows(row, range(1, k_max + 1), threads) if w), None)


def exterior_weight_bound(poly: NewtonPolygon, point, p: int, sigma: Fraction,
                          k_max: int = 200, l_max: int = 200, threads: int = 1) -> Optional[Point]:
    """
    k^j (l-p)^alpha <= phi(k, l) (l!/(l-p)!)^(sigma-1) for l >= p, compared as
    integer powers after clearing the denominator of sigma - 1.
    """
    j, alpha = _as_point(point)
    excess = Fraction(sigma) - 1
    r, q = excess.numerator, excess.denominator

    def row(k: int):
        for l in range(p, l_max + 1):
            lhs = (k ** j * (l - p) ** alpha) ** q
            rhs = phi(poly, k, l) ** q * math.perm(l, p) ** r
            if lhs > rhs:
                return (k, l)
        return None

    return next((w for w in _map_rows(row, range(1, k_max + 1), threads) if w), None)


def floor_power(l: int, h: Fraction) -> int:
    """floor(l^h) for rational h >= 0, exactly."""
    h = Fraction(h)
    if l <= 1 or h == 0:
        return 1 if l >= 1 or h == 0 else 0
    a, b = h.numerator, h.denominator
    target = l ** a
    k = int(round(l ** float(h)))
    while k > 0 and k ** b > target:
        k -= 1
    while (k + 1) ** b <= target:
        k += 1
    return k


def vertex_domination_ratio(poly: NewtonPolygon, i: int, h: Fraction, l_max: int = 500) -> Fraction:
    """
    max over 1 <= l <= l_max of phi(k, l) / (k^{m_i} l^{n_i}) along k = max(1, floor(l^h)).

    Bounded when s_i <= h <= s_{i-1}: the i-th vertex monomial dominates phi there.
    """
    mi, ni = poly.vertices[i - 1]
    worst = Fraction(0)
    for l in range(1, l_max + 1):
        k = max(1, floor_power(l, h))
        worst = max(worst, Fraction(phi(poly, k, l), k ** mi * l ** ni))
    return worst


@dataclass
class ConditionReport:
    n: NVerdict
    gp: GPVerdict
    r: bool

    @property
    def c0_grid(self) -> Optional[Fraction]:
        return self.n.c0_grid

    @property
    def failed(self) -> bool:
        return not self.n.holds or self.gp.status is GPStatus.FAILS

    def to_dict(self) -> Dict:
        return {
            'N': self.n.to_dict(),
            'GP': self.gp.to_dict(),
            'R': self.r,
            'c0_grid': None if self.c0_grid is None else format_rat(self.c0_grid),
        }


def predicted_class(indices: IndexResult, conditions: ConditionReport) -> str:
    if conditions.failed:
        return "undetermined (condition failure)"
    if indices.sigma0 == 1 and indices.s0 == 1:
        return "convergent"
    label = f"G({format_rat(indices.s0)}, {format_rat(indices.sigma0)})"
    if indices.s0 > indices.s1:
        label += f"; G({format_rat(indices.s1)}, {format_rat(indices.sigma0)}) not excluded"
    return label


@dataclass
class AnalysisReport:
    name: str
    norm: NormalizedEquation
    equation_type: EquationType
    polygon: NewtonPolygon
    conditions: ConditionReport
    indices: IndexResult
    holomorphic_in_t: Optional[bool]
    optimality: Dict[str, bool]
    diagnostics: ValidationResult = field(default_factory=ValidationResult)

    @property
    def predicted_class(self) -> str:
        return predicted_class(self.indices, self.conditions)

    def to_dict(self) -> Dict:
        norm, poly = self.norm, self.polygon
        spec = norm.spec
        return {
            'name': self.name,
            'm': spec.m,
            'trunc_x': spec.trunc_x,
            'index_set': "Im" if spec.index_set is None else [list(p.as_tuple()) for p in sorted(spec.index_set)],
            'equation_type': self.equation_type.value,
            'polygon': poly.to_dict(),
            'lambda0': [list(p.as_tuple()) for p in sorted(norm.lambda0)],
            'lambda1': [list(p.as_tuple()) for p in sorted(norm.lambda1)],
            'p': {str(pair): order for pair, order in sorted(norm.p.items())},
            'd': {str(pair): format_rat(distance_d(poly, pair)) for pair in sorted(norm.lambda1)},
            'characteristic_polynomials': [cp.to_dict() for cp in self.conditions.gp.polynomials],
            'conditions': self.conditions.to_dict(),
            'indices': self.indices.to_dict(),
            'holomorphic_in_t': self.holomorphic_in_t,
            'optimality_hypotheses': self.optimality,
            'predicted_class': self.predicted_class,
            'diagnostics': self.diagnostics.to_dict(),
        }


def analyze(spec: EquationSpec, grid_n: int = 40, threads: int = 1) -> AnalysisReport:
    """
    Full analysis of an equation.

    Args:
        spec: equation data
        grid_n: bound K_N for the (N) grid check
        threads: worker count for grid checks (0 = one per CPU)

    Returns:
        AnalysisReport
    """
    eq_type = classify_type(spec)
    norm = normalize(spec)
    poly = build_polygon(norm.lambda0)
    gp = check_gp(norm, poly)
    n = check_N(norm, grid_n, poly, gp, threads)
    conditions = ConditionReport(n, gp, is_regular_singular(norm, poly))
    indices = compute_indices(norm, poly)

    diagnostics = ValidationResult()
    diagnostics.extend(norm.diagnostics)
    if gp.status is GPStatus.UNCERTAIN:
        diagnostics.add_issue(ValidationLevel.WARNING, "GP", gp.detail,
                              recommendation="Characteristic roots this close to the forbidden set are not decided")
    elif gp.status is GPStatus.FAILS:
        diagnostics.add_issue(ValidationLevel.ERROR, "GP", gp.detail)
    if not n.holds:
        diagnostics.add_issue(ValidationLevel.CRITICAL, "N", n.status,
                              recommendation="No unique formal solution exists; solve stops at the witness")
    if indices.truncation_limited:
        diagnostics.add_issue(ValidationLevel.WARNING, "truncation",
                              "s0 scanned only the known orders of the nonlinear coefficients",
                              recommendation="Raise trunc_x")
    if indices.s0 > indices.s1:
        diagnostics.add_issue(ValidationLevel.INFO, "indices",
                              f"s0 = {format_rat(indices.s0)} exceeds s1 = {format_rat(indices.s1)}; "
                              f"s0 need not be the optimal order in t")

    return AnalysisReport(
        name=spec.name,
        norm=norm,
        equation_type=eq_type,
        polygon=poly,
        conditions=conditions,
        indices=indices,
        holomorphic_in_t=holomorphic_in_t_criterion(norm, indices.sigma0),
        optimality=optimality_hypotheses(norm),
        diagnostics=diagnostics,
    )


def edge_domination_ratio(poly: NewtonPolygon, i: int, l_max: int = 500) -> Fraction:
    """vertex_domination_ratio along the slope of edge i (h = 0 on the last vertex)."""
    h = poly.slopes[i - 1] if i < poly.p else Fraction(0)
    return vertex_domination_ratio(poly, i, h, l_max)


def two_term_ratio(poly: NewtonPolygon, i: int, h: Fraction, l_max: int = 500) -> Fraction:
    """
    max over l of phi(k, l) / (k^{m_i} l^{n_i} + k^{m_{i+1}} l^{n_{i+1}}) along k = max(1, floor(l^h)).

    Bounded for s_{i+1} <= h <= s_{i-1}, where the two vertices of edge i carry phi.
    """
    if not 1 <= i < poly.p:
        raise ValueError(f"Edge {i} has no second vertex (p = {poly.p})")
    (m1, n1), (m2, n2) = poly.vertices[i - 1], poly.vertices[i]
    worst = Fraction(0)
    for l in range(1, l_max + 1):
        k = max(1, floor_power(l, h))
        worst = max(worst, Fraction(phi(poly, k, l), k ** m1 * l ** n1 + k ** m2 * l ** n2))
    return worst
