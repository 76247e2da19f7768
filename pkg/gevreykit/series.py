"""
Exact truncated formal power series.

UniSeries holds f(x) = f_0 + f_1 x + ... + f_L x^L together with L, the last
order that is actually known. BiSeries stacks one UniSeries per power of t;
each row keeps its own trusted order because derivatives in x eat into it.
"""
import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln

Rat = Fraction
RatLike = Union[Fraction, int, str]

CSV_HEADER = ["k", "l", "numerator", "denominator"]


class SeriesError(ValueError):
    """Base class for series kernel errors."""


class TruncationError(SeriesError):
    """Raised when an operation would need coefficients beyond the trusted order."""


class SeriesDomainError(SeriesError):
    """Raised for arguments outside an operator's domain (sigma < 1, bad literal)."""


def parse_rat(value: RatLike) -> Fraction:
    """Parse an integer, Fraction or "p/q" string into an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise SeriesDomainError(f"Invalid rational literal: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/", 1)
                return Fraction(int(num), int(den))
            return Fraction(int(text))
        except (ValueError, ZeroDivisionError):
            raise SeriesDomainError(f"Invalid rational literal: {value!r}") from None
    raise SeriesDomainError(f"Invalid rational literal: {value!r}")


def format_rat(value: Fraction) -> str:
    """Render a rational the way series literals are written."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def falling_factorial(n: int, alpha: int) -> int:
    """[n]_alpha = n(n-1)...(n-alpha+1); zero when 0 <= n < alpha."""
    result = 1
    for r in range(alpha):
        result *= n - r
    return result


def log_abs(value: Fraction) -> float:
    """Natural log of |value| for arbitrarily large rationals (-inf for zero)."""
    if value == 0:
        return -math.inf
    return math.log(abs(value.numerator)) - math.log(value.denominator)


@dataclass(frozen=True)
class UniSeries:
    """
    Truncated series in x with exact coefficients 0..trunc.

    The constructor truncates: coefficients past trunc are not trusted and are
    dropped. from_coeffs and parse_series_literal reject nonzero ones instead.
    """
    coeffs: Tuple[Fraction, ...]
    trunc: int  # last trusted order

    def __post_init__(self):
        if self.trunc < 0:
            raise TruncationError(f"Trusted order must be nonnegative, got {self.trunc}")
        values = tuple(parse_rat(c) for c in self.coeffs[:self.trunc + 1])
        values += (Fraction(0),) * (self.trunc + 1 - len(values))
        object.__setattr__(self, "coeffs", values)

    @classmethod
    def from_coeffs(cls, values: Iterable[RatLike], trunc: Optional[int] = None) -> "UniSeries":
        """
        Build from leading coefficients; missing orders up to trunc are zero.

        Raises:
            TruncationError: if a nonzero coefficient lies beyond trunc
        """
        values = tuple(values)
        if trunc is None:
            trunc = max(len(values) - 1, 0)
        if any(parse_rat(v) != 0 for v in values[trunc + 1:]):
            raise TruncationError(f"Nonzero coefficients beyond order {trunc}")
        return cls(values, trunc)

    @classmethod
    def zeros(cls, trunc: int) -> "UniSeries":
        return cls((), trunc)

    @classmethod
    def monomial(cls, power: int, trunc: int, coeff: RatLike = 1) -> "UniSeries":
        values = [0] * (trunc + 1)
        if power <= trunc:
            values[power] = coeff
        return cls(tuple(values), trunc)

    @classmethod
    def geometric(cls, trunc: int, ratio: RatLike = 1) -> "UniSeries":
        """1/(1 - ratio*x) truncated."""
        r = parse_rat(ratio)
        return cls(tuple(r ** l for l in range(trunc + 1)), trunc)

    def __len__(self) -> int:
        return self.trunc + 1

    def __getitem__(self, l: int) -> Fraction:
        if l < 0:
            return Fraction(0)
        if l > self.trunc:
            raise TruncationError(f"Coefficient x^{l} requested beyond trusted order {self.trunc}")
        return self.coeffs[l]

    @property
    def constant(self) -> Fraction:
        return self.coeffs[0]

    def valuation(self) -> Optional[int]:
        """Index of the first nonzero coefficient, None if zero up to trunc."""
        for l, c in enumerate(self.coeffs):
            if c != 0:
                return l
        return None

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def truncate(self, trunc: int) -> "UniSeries":
        if trunc > self.trunc:
            raise TruncationError(f"Cannot extend trusted order {self.trunc} to {trunc} by truncation")
        return UniSeries(self.coeffs[:trunc + 1], trunc)

    def padded(self, trunc: int) -> "UniSeries":
        """
        Extend with zeros up to a larger order.

        Only meaningful for polynomial data (declared coefficients followed by
        zeros), which is what equation files and fixtures contain.
        """
        if trunc < self.trunc:
            return self.truncate(trunc)
        return UniSeries(self.coeffs, trunc)

    def shift(self, k: int) -> "UniSeries":
        """Multiply by x^k; the trusted order moves up by k."""
        if k < 0:
            return self.shift_down(-k)
        return UniSeries((Fraction(0),) * k + self.coeffs, self.trunc + k)

    def shift_down(self, k: int) -> "UniSeries":
        """Divide by x^k, requiring the first k coefficients to vanish."""
        if k > self.trunc:
            raise TruncationError(f"Cannot divide by x^{k}: trusted order is only {self.trunc}")
        if any(c != 0 for c in self.coeffs[:k]):
            raise SeriesDomainError(f"Series is not divisible by x^{k}")
        return UniSeries(self.coeffs[k:], self.trunc - k)

    def scale(self, factor: RatLike) -> "UniSeries":
        f = parse_rat(factor)
        return UniSeries(tuple(c * f for c in self.coeffs), self.trunc)

    def __add__(self, other: "UniSeries") -> "UniSeries":
        trunc = min(self.trunc, other.trunc)
        return UniSeries(tuple(self.coeffs[l] + other.coeffs[l] for l in range(trunc + 1)), trunc)

    def __sub__(self, other: "UniSeries") -> "UniSeries":
        trunc = min(self.trunc, other.trunc)
        return UniSeries(tuple(self.coeffs[l] - other.coeffs[l] for l in range(trunc + 1)), trunc)

    def __neg__(self) -> "UniSeries":
        return UniSeries(tuple(-c for c in self.coeffs), self.trunc)

    def __mul__(self, other: "UniSeries") -> "UniSeries":
        return mul(self, other)

    def to_literal(self) -> List[str]:
        return [format_rat(c) for c in self.coeffs]

    def __repr__(self) -> str:
        shown = ", ".join(format_rat(c) for c in self.coeffs[:8])
        more = ", ..." if self.trunc >= 8 else ""
        return f"UniSeries([{shown}{more}], trunc={self.trunc})"


def parse_series_literal(values: Sequence[RatLike], trunc: int) -> UniSeries:
    """Series literal: list of "p/q" or integer strings, index = power of x."""
    if trunc < 0:
        raise TruncationError(f"Trusted order must be nonnegative, got {trunc}")
    try:
        return UniSeries.from_coeffs([parse_rat(v) for v in values], trunc)
    except TruncationError:
        raise TruncationError(f"Literal has nonzero terms beyond order {trunc}") from None


def mul(f: UniSeries, g: UniSeries) -> UniSeries:
    """Cauchy product, trusted to min(f.trunc, g.trunc)."""
    trunc = min(f.trunc, g.trunc)
    fs = [(i, c) for i, c in enumerate(f.coeffs[:trunc + 1]) if c != 0]
    gs = [(i, c) for i, c in enumerate(g.coeffs[:trunc + 1]) if c != 0]
    out = [Fraction(0)] * (trunc + 1)
    for i, a in fs:
        for j, b in gs:
            if i + j > trunc:
                break
            out[i + j] += a * b
    return UniSeries(tuple(out), trunc)


def dx(f: UniSeries, order: int) -> UniSeries:
    """order-th derivative; the trusted order drops by `order`."""
    if order < 0:
        raise SeriesDomainError(f"Derivative order must be nonnegative, got {order}")
    if order > f.trunc:
        raise TruncationError(f"d/dx^{order} exhausts trusted order {f.trunc}")
    if order == 0:
        return f
    trunc = f.trunc - order
    return UniSeries(
        tuple(f.coeffs[l + order] * falling_factorial(l + order, order) for l in range(trunc + 1)),
        trunc,
    )


def falling_op(f: UniSeries, alpha: int) -> UniSeries:
    """[x d/dx]_alpha f, i.e. coefficient l multiplied by l(l-1)...(l-alpha+1)."""
    if alpha == 0:
        return f
    return UniSeries(tuple(c * falling_factorial(l, alpha) for l, c in enumerate(f.coeffs)), f.trunc)


def euler_op(f: UniSeries, power: int) -> UniSeries:
    """(x d/dx)^power f."""
    if power == 0:
        return f
    return UniSeries(tuple(c * l ** power for l, c in enumerate(f.coeffs)), f.trunc)


def majorant_abs(f: UniSeries) -> UniSeries:
    return UniSeries(tuple(abs(c) for c in f.coeffs), f.trunc)


def common_trunc(f: UniSeries, g: UniSeries) -> int:
    return min(f.trunc, g.trunc)


def dominance(g: UniSeries, f: UniSeries) -> Tuple[bool, int]:
    """(g_l >= f_l for every l up to the common trusted order, that order)."""
    n = common_trunc(f, g)
    return all(g.coeffs[l] >= f.coeffs[l] for l in range(n + 1)), n


def dominates(g: UniSeries, f: UniSeries) -> bool:
    """True iff g_l >= f_l for every l up to the common trusted order; see dominance() for that order."""
    return dominance(g, f)[0]


def _integer_excess(sigma: Fraction) -> int:
    sigma = parse_rat(sigma)
    if sigma < 1:
        raise SeriesDomainError(f"Borel order sigma must be >= 1, got {format_rat(sigma)}")
    excess = sigma - 1
    if excess.denominator != 1:
        raise SeriesDomainError(
            f"Exact Borel weights need sigma - 1 integral (sigma={format_rat(sigma)}); use log_borel_m"
        )
    return excess.numerator


def borel_m(f: UniSeries, sigma: RatLike, m: int) -> UniSeries:
    """Coefficient j becomes f_j / ((j-m)!)^(sigma-1) for j >= m; lower orders pass through."""
    power = _integer_excess(parse_rat(sigma))
    if power == 0:
        return f
    return UniSeries(
        tuple(c / math.factorial(j - m) ** power if j >= m else c for j, c in enumerate(f.coeffs)),
        f.trunc,
    )


def log_borel_m(f: UniSeries, sigma: float, m: int = 0) -> np.ndarray:
    """log|B_sigma^(m) f| coefficient-wise as floats (any real sigma >= 1)."""
    if sigma < 1:
        raise SeriesDomainError(f"Borel order sigma must be >= 1, got {sigma}")
    logs = np.array([log_abs(c) for c in f.coeffs], dtype=float)
    j = np.arange(f.trunc + 1)
    weights = gammaln(np.maximum(j - m, 0) + 1.0) * (float(sigma) - 1.0)
    return logs - weights


def inverse_power_series(C: RatLike, R: RatLike, b: int, trunc: int) -> UniSeries:
    """Coefficients of C/(R - x)^b, i.e. C (b)_j / (j! R^(b+j))."""
    C, R = parse_rat(C), parse_rat(R)
    if R <= 0:
        raise SeriesDomainError("Radius R must be positive")
    values = []
    rising = Fraction(1)
    for j in range(trunc + 1):
        values.append(C * rising / (math.factorial(j) * R ** (b + j)))
        rising *= b + j
    return UniSeries(tuple(values), trunc)


def nagumo_constant(a: float, sigma: float, k: int, mu: int = 0) -> float:
    """e^(k sigma) * prod_{h=1..k} (a + mu + h sigma)^sigma."""
    value = math.exp(k * sigma)
    for h in range(1, k + 1):
        value *= (a + mu + h * sigma) ** sigma
    return value


def _multi_order(nu) -> int:
    order = getattr(nu, "order", None)
    if order is not None:
        return order
    if isinstance(nu, Mapping):
        return sum(nu.values())
    return int(nu)


def valuation2(F: Mapping[Tuple[int, object], UniSeries], at_x_zero: bool = True) -> Union[int, float]:
    """
    min{i + |nu|} over Taylor terms of F with a nonzero coefficient.

    With at_x_zero the coefficient is evaluated at x = 0, otherwise any nonzero
    coefficient up to truncation counts. Returns math.inf when nothing survives.
    """
    best: Union[int, float] = math.inf
    for (i, nu), series in F.items():
        alive = series.constant != 0 if at_x_zero else not series.is_zero()
        if alive:
            best = min(best, i + _multi_order(nu))
    return best


@dataclass(frozen=True)
class GevreyOrder:
    s: Fraction
    sigma: Fraction

    def __post_init__(self):
        object.__setattr__(self, "s", parse_rat(self.s))
        object.__setattr__(self, "sigma", parse_rat(self.sigma))
        if self.s < 1 or self.sigma < 1:
            raise SeriesDomainError(
                f"Gevrey order needs s >= 1 and sigma >= 1, got ({format_rat(self.s)}, {format_rat(self.sigma)})"
            )

    def __str__(self) -> str:
        return f"G({format_rat(self.s)}, {format_rat(self.sigma)})"


@dataclass(frozen=True)
class BiSeries:
    """Sum of u_{k,l} t^k x^l stored as one UniSeries per t-degree k = 0..trunc_t."""
    rows: Tuple[UniSeries, ...]

    def __post_init__(self):
        if not self.rows:
            raise SeriesDomainError("BiSeries needs at least the t^0 row")
        object.__setattr__(self, "rows", tuple(self.rows))

    @classmethod
    def zeros(cls, trunc_t: int, trunc_x: int) -> "BiSeries":
        return cls(tuple(UniSeries.zeros(trunc_x) for _ in range(trunc_t + 1)))

    @classmethod
    def from_coefficients(cls, coeffs: Mapping[Tuple[int, int], RatLike], trunc_t: int, trunc_x: int) -> "BiSeries":
        grid = [[Fraction(0)] * (trunc_x + 1) for _ in range(trunc_t + 1)]
        for (k, l), value in coeffs.items():
            if k > trunc_t or l > trunc_x:
                raise TruncationError(f"Coefficient ({k},{l}) outside ({trunc_t},{trunc_x})")
            grid[k][l] = parse_rat(value)
        return cls(tuple(UniSeries(tuple(row), trunc_x) for row in grid))

    @property
    def trunc_t(self) -> int:
        return len(self.rows) - 1

    @property
    def trunc_x(self) -> int:
        """Largest L such that every row is trusted through x^L."""
        return min(row.trunc for row in self.rows)

    def row_trunc(self, k: int) -> int:
        return self.rows[k].trunc

    def row(self, k: int) -> UniSeries:
        if k > self.trunc_t:
            raise TruncationError(f"Row t^{k} requested beyond trusted t-order {self.trunc_t}")
        return self.rows[k]

    def coeff(self, k: int, l: int) -> Fraction:
        return self.row(k)[l]

    def items(self) -> Iterator[Tuple[int, int, Fraction]]:
        """All trusted (k, l, value) triples in (k, l) order, zeros included."""
        for k, row in enumerate(self.rows):
            for l, value in enumerate(row.coeffs):
                yield k, l, value

    def nonzero(self) -> Dict[Tuple[int, int], Fraction]:
        return {(k, l): v for k, l, v in self.items() if v != 0}

    def truncate(self, trunc_t: int, trunc_x: Optional[int] = None) -> "BiSeries":
        rows = self.rows[:trunc_t + 1]
        if trunc_x is not None:
            rows = tuple(r.truncate(min(r.trunc, trunc_x)) for r in rows)
        return BiSeries(rows)

    def _zip(self, other: "BiSeries", op) -> "BiSeries":
        n = min(self.trunc_t, other.trunc_t)
        return BiSeries(tuple(op(self.rows[k], other.rows[k]) for k in range(n + 1)))

    def __add__(self, other: "BiSeries") -> "BiSeries":
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other: "BiSeries") -> "BiSeries":
        return self._zip(other, lambda a, b: a - b)

    def euler_t(self, power: int) -> "BiSeries":
        """(t d/dt)^power: row k scaled by k^power."""
        if power == 0:
            return self
        return BiSeries(tuple(row.scale(k ** power) for k, row in enumerate(self.rows)))

    def dx(self, order: int) -> "BiSeries":
        return BiSeries(tuple(dx(row, order) for row in self.rows))

    def scale_x(self, f: UniSeries) -> "BiSeries":
        return BiSeries(tuple(mul(f, row) for row in self.rows))

    def shift_t(self, i: int) -> "BiSeries":
        """Multiply by t^i keeping the same t-truncation."""
        if i == 0:
            return self
        pad = UniSeries.zeros(self.rows[0].trunc)
        rows = (pad,) * i + self.rows
        return BiSeries(rows[:self.trunc_t + 1])

    def mul(self, other: "BiSeries") -> "BiSeries":
        """Cauchy product in t (and x), truncated at the smaller t-order."""
        n = min(self.trunc_t, other.trunc_t)
        rows = []
        for d in range(n + 1):
            acc = None
            for e in range(d + 1):
                a, b = self.rows[e], other.rows[d - e]
                if a.is_zero() or b.is_zero():
                    term = UniSeries.zeros(min(a.trunc, b.trunc))
                else:
                    term = mul(a, b)
                acc = term if acc is None else acc + term
            rows.append(acc)
        return BiSeries(tuple(rows))

    def is_zero(self) -> bool:
        return all(row.is_zero() for row in self.rows)


def write_biseries_csv(u: BiSeries, path: str) -> str:
    """Dump every trusted coefficient (zeros included) as k,l,numerator,denominator."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for k, l, value in u.items():
            writer.writerow([k, l, value.numerator, value.denominator])
    return path


def read_biseries_csv(path: str) -> BiSeries:
    """Inverse of write_biseries_csv; each row's trusted order is its largest l."""
    rows: Dict[int, Dict[int, Fraction]] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise SeriesDomainError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for line_no, record in enumerate(reader, start=2):
            try:
                k, l, num, den = (int(v) for v in record)
                value = Fraction(num, den)
            except (ValueError, ZeroDivisionError):
                raise SeriesDomainError(f"{path}: line {line_no}: malformed record {record}") from None
            rows.setdefault(k, {})[l] = value
    if not rows:
        raise SeriesDomainError(f"{path}: no coefficients")
    trunc_t = max(rows)
    out = []
    for k in range(trunc_t + 1):
        if k not in rows:
            raise SeriesDomainError(f"{path}: row k={k} missing")
        entries = rows[k]
        trunc = max(entries)
        if len(entries) != trunc + 1:
            raise SeriesDomainError(f"{path}: row k={k} has gaps below l={trunc}")
        out.append(UniSeries(tuple(entries[l] for l in range(trunc + 1)), trunc))
    return BiSeries(tuple(out))
