"""
Exact formal solution u(t, x) = sum_{k>=1} u_k(x) t^k.

Each u_k solves C(x; k, x d/dx) u_k = f_k(x), where f_k is the t^k coefficient
of a(x) t plus the nonlinear part evaluated on u_1, ..., u_{k-1}.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .equation import (
    Basis, EquationSpec, IndexPair, NormalizedEquation, canonical_linear, eval_L, normalize,
)
from .series import BiSeries, UniSeries, dx, falling_factorial, mul
from .validation import InvariantBreach

Factors = Tuple[IndexPair, ...]


class ResonanceError(ValueError):
    """L(k, l) = 0: the recurrence for u_k has no unique solution."""

    def __init__(self, k: int, l: int):
        self.k = k
        self.l = l
        super().__init__(f"Resonance: L({k},{l}) = 0, condition (N) fails")

    @property
    def witness(self) -> Tuple[int, int]:
        return (self.k, self.l)


def required_trunc(spec: EquationSpec, K_t: int, L_x: int) -> int:
    """
    Working x-order that leaves L_x trusted in every row k <= K_t.

    d/dx-basis linear terms cost their alpha once (c = x^-alpha b); every
    further t-degree costs the largest derivative applied inside the nonlinear part.
    """
    linear_loss = max((t.alpha for t in spec.linear if t.basis is Basis.DX), default=0)
    return L_x + linear_loss + max(K_t - 1, 0) * spec.max_derivative()


@dataclass
class SolveState:
    """Partial solution u_0 = 0, u_1, ..., u_k and the memoized factor series built from it."""
    norm: NormalizedEquation
    rows: List[UniSeries] = field(default_factory=list)
    factor_cache: Dict[Tuple[IndexPair, int], UniSeries] = field(default_factory=dict)
    product_cache: Dict[Tuple[Factors, int], UniSeries] = field(default_factory=dict)

    def __post_init__(self):
        if not self.rows:
            self.rows.append(UniSeries.zeros(self.norm.spec.trunc_x))

    @property
    def degree(self) -> int:
        """Largest completed t-degree."""
        return len(self.rows) - 1

    @property
    def trusted(self) -> Tuple[int, ...]:
        return tuple(row.trunc for row in self.rows)

    @property
    def one(self) -> UniSeries:
        return UniSeries.from_coeffs([1], self.norm.spec.trunc_x)

    def push(self, row: UniSeries):
        self.rows.append(row)

    def factor(self, pair: IndexPair, d: int) -> UniSeries:
        """t^d coefficient of (t d/dt)^j d^alpha/dx^alpha u."""
        key = (pair, d)
        if key not in self.factor_cache:
            self.factor_cache[key] = dx(self.rows[d], pair.alpha).scale(d ** pair.j)
        return self.factor_cache[key]

    def product(self, factors: Factors, d: int) -> UniSeries:
        """t^d coefficient of the product of the listed factors (d >= len(factors))."""
        if not factors:
            return self.one if d == 0 else UniSeries.zeros(self.norm.spec.trunc_x)
        if len(factors) == 1:
            return self.factor(factors[0], d)
        key = (factors, d)
        if key in self.product_cache:
            return self.product_cache[key]
        r = len(factors)
        head, last = factors[:-1], factors[-1]
        total: Optional[UniSeries] = None
        for e in range(r - 1, d):
            term = mul(self.product(head, e), self.factor(last, d - e))
            total = term if total is None else total + term
        if total is None:
            total = UniSeries.zeros(self.norm.spec.trunc_x)
        self.product_cache[key] = total
        return total

    def solution(self) -> BiSeries:
        return BiSeries(tuple(self.rows))


def solve_linear_step(norm: NormalizedEquation, k: int, g: UniSeries) -> UniSeries:
    """
    Solve C(x; k, x d/dx) w = g coefficient by coefficient.

    L(k,l) w_l = g_l + sum over pairs and i >= 1 of c_{j,alpha,i} k^j [l-i]_alpha w_{l-i}

    Raises:
        ResonanceError: L(k, l) = 0 for some l within the trusted order
    """
    trunc = min([g.trunc] + [series.trunc for series in norm.c.values()])
    tails = [
        (pair, k ** pair.j, [(i, c) for i, c in enumerate(series.coeffs[1:trunc + 1], start=1) if c != 0])
        for pair, series in sorted(norm.c.items())
    ]
    w: List[Fraction] = []
    for l in range(trunc + 1):
        L = eval_L(norm, k, l)
        if L == 0:
            raise ResonanceError(k, l)
        total = g.coeffs[l]
        for pair, weight, tail in tails:
            for i, c in tail:
                if i > l:
                    break
                total += c * weight * falling_factorial(l - i, pair.alpha) * w[l - i]
        w.append(total / L)
    return UniSeries(tuple(w), trunc)


def _term_table(spec: EquationSpec) -> List[Tuple[int, Factors, UniSeries]]:
    return [
        (i, nu.factors(), series)
        for (i, nu), series in sorted(spec.nonlinear_table().items(),
                                      key=lambda kv: (kv[0][0], kv[0][1].entries))
    ]


def build_rhs(norm: NormalizedEquation, state: SolveState, k: int) -> UniSeries:
    """f_k: t^k coefficient of a(x) t plus the nonlinear part on u_1..u_{k-1}; f_1 = a(x) plus pure t^1 terms (none)."""
    if state.degree < k - 1:
        raise ValueError(f"build_rhs({k}) needs u_1..u_{k - 1}, only {state.degree} rows are known")
    spec = norm.spec
    f = spec.a if k == 1 else UniSeries.zeros(spec.a.trunc)
    for i, factors, series in _term_table(spec):
        d = k - i
        if d < len(factors):
            continue
        f = f + mul(series, state.product(factors, d))
    return f


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Ordered tuples of `parts` positive integers summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def build_rhs_enumerated(norm: NormalizedEquation, rows: Sequence[UniSeries], k: int) -> UniSeries:
    """
    Same value as build_rhs, by expanding every product over all splittings of
    the t-degree among its factors.
    """
    spec = norm.spec
    one = UniSeries.from_coeffs([1], spec.trunc_x)
    f = spec.a if k == 1 else UniSeries.zeros(spec.a.trunc)
    for i, factors, series in _term_table(spec):
        d = k - i
        if d < len(factors):
            continue
        total: Optional[UniSeries] = None
        for degrees in _compositions(d, len(factors)):
            term = one
            for pair, e in zip(factors, degrees):
                term = mul(term, dx(rows[e], pair.alpha).scale(e ** pair.j))
            total = term if total is None else total + term
        if total is None:
            continue
        f = f + mul(series, total)
    return f


def solve_state(norm: NormalizedEquation, K_t: int, L_x: int) -> SolveState:
    """Run the recurrence through t^K_t at the working order for L_x; returns the filled state."""
    if K_t < 0 or L_x < 0:
        raise ValueError(f"Truncation orders must be nonnegative, got K_t={K_t}, L_x={L_x}")
    work = required_trunc(norm.spec, K_t, L_x)
    if work != norm.spec.trunc_x:
        norm = normalize(norm.spec.padded(work))
    state = SolveState(norm)
    for k in range(1, K_t + 1):
        state.push(solve_linear_step(norm, k, build_rhs(norm, state, k)))
    for k, trunc in enumerate(state.trusted):
        if trunc < L_x:
            raise InvariantBreach(f"Row t^{k} trusted only through x^{trunc} < {L_x}")
    return state


def solve_formal(norm: NormalizedEquation, K_t: int, L_x: int) -> BiSeries:
    """
    Unique formal solution with u(0, x) = 0 through t^K_t, x^L_x.

    Args:
        norm: normalized equation
        K_t: last t-degree
        L_x: last x-degree, trusted in every row

    Returns:
        BiSeries with rows 0..K_t

    Raises:
        ResonanceError: with the (k, l) witness
    """
    return solve_state(norm, K_t, L_x).solution().truncate(K_t, L_x)


def residual(norm: NormalizedEquation, u: BiSeries, spec: Optional[EquationSpec] = None) -> BiSeries:
    """
    LHS - RHS of the equation on u by direct substitution.

    (t d/dt)^m u - sum b_{j,alpha} (t d/dt)^j d^alpha u - a t - sum a_{i,nu} t^i prod Z^nu,
    with every linear term in the d/dx basis. Rows keep their own trusted orders.
    """
    spec = spec or norm.spec
    width = max(row.trunc for row in u.rows)
    if width > spec.trunc_x:
        spec = spec.padded(width)
    b = canonical_linear(spec)
    K = u.trunc_t

    result = u.euler_t(norm.m)
    for pair, series in sorted(b.items()):
        if not series.is_zero():
            result = result - u.euler_t(pair.j).dx(pair.alpha).scale_x(series)

    forcing = [UniSeries.zeros(spec.trunc_x) for _ in range(K + 1)]
    if K >= 1:
        forcing[1] = spec.a
    result = result - BiSeries(tuple(forcing))

    one_rows = [UniSeries.from_coeffs([1], spec.trunc_x)] + [UniSeries.zeros(spec.trunc_x)] * K
    for i, factors, series in _term_table(spec):
        product = BiSeries(tuple(one_rows))
        for pair in factors:
            product = product.mul(u.euler_t(pair.j).dx(pair.alpha))
        result = result - product.shift_t(i).scale_x(series)
    return result


def check_residual(norm: NormalizedEquation, u: BiSeries, spec: Optional[EquationSpec] = None) -> BiSeries:
    """residual() that must vanish on its trusted region."""
    r = residual(norm, u, spec)
    if not r.is_zero():
        k, l = min(r.nonzero())
        raise InvariantBreach(f"Residual is nonzero at (k,l) = ({k},{l})")
    return r
