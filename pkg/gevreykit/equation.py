"""
Equation data model and normalization.

An equation is

    (t d/dt)^m u = a(x) t + sum b_{j,alpha}(x) (t d/dt)^j (d/dx)^alpha u
                   + sum a_{i,nu}(x) t^i prod z_{j,alpha}^nu_{j,alpha},

with z_{j,alpha} = (t d/dt)^j (d/dx)^alpha u. Normalization rewrites the linear
part as C(x; t d/dt, x d/dx) with c_{j,alpha}(x) = b_{j,alpha}(x) / x^alpha.
"""
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.special import stirling2

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .series import (
    SeriesError, UniSeries, falling_factorial, falling_op, mul, parse_series_literal,
)
from .validation import ValidationLevel, ValidationResult


class EquationError(ValueError):
    """Malformed or inadmissible equation data."""


class Basis(Enum):
    """How a linear term is written in the input."""
    DX = "dx"        # b(x) (t d/dt)^j (d/dx)^alpha
    EULER = "euler"  # h(x) (t d/dt)^j (x d/dx)^alpha


@dataclass(frozen=True, order=True)
class IndexPair:
    j: int      # order of t d/dt
    alpha: int  # order of d/dx

    def __post_init__(self):
        if not isinstance(self.j, int) or not isinstance(self.alpha, int) or self.j < 0 or self.alpha < 0:
            raise EquationError(f"Index pair needs nonnegative integers, got ({self.j}, {self.alpha})")

    def in_im(self, m: int) -> bool:
        return self.j < m and self.j + self.alpha <= m

    def as_tuple(self) -> Tuple[int, int]:
        return (self.j, self.alpha)

    def __str__(self) -> str:
        return f"({self.j},{self.alpha})"


def im_pairs(m: int) -> FrozenSet[IndexPair]:
    """I_m = {(j, alpha) : j + alpha <= m, j < m}."""
    return frozenset(IndexPair(j, a) for j in range(m) for a in range(m - j + 1))


@dataclass(frozen=True)
class MultiIndex:
    """Sparse exponent vector nu over index pairs; entries sorted, powers positive."""
    entries: Tuple[Tuple[IndexPair, int], ...] = ()

    def __post_init__(self):
        merged: Dict[IndexPair, int] = {}
        for pair, power in self.entries:
            if not isinstance(power, int) or power < 0:
                raise EquationError(f"Power of z{pair} must be a nonnegative integer, got {power}")
            merged[pair] = merged.get(pair, 0) + power
        object.__setattr__(self, "entries", tuple(sorted((p, n) for p, n in merged.items() if n > 0)))

    @classmethod
    def of(cls, powers: Union[Mapping[IndexPair, int], Iterable[Tuple[IndexPair, int]]]) -> "MultiIndex":
        items = powers.items() if isinstance(powers, Mapping) else powers
        return cls(tuple(items))

    @classmethod
    def unit(cls, pair: IndexPair, power: int = 1) -> "MultiIndex":
        return cls(((pair, power),))

    @property
    def order(self) -> int:
        return sum(n for _, n in self.entries)

    @property
    def support(self) -> Tuple[IndexPair, ...]:
        return tuple(p for p, _ in self.entries)

    def get(self, pair: IndexPair) -> int:
        for p, n in self.entries:
            if p == pair:
                return n
        return 0

    def without_one(self, pair: IndexPair) -> "MultiIndex":
        return MultiIndex(tuple((p, n - 1 if p == pair else n) for p, n in self.entries))

    def factors(self) -> Tuple[IndexPair, ...]:
        """Support listed with multiplicity, in sorted order."""
        return tuple(p for p, n in self.entries for _ in range(n))

    def to_list(self) -> List[Dict[str, int]]:
        return [{"j": p.j, "alpha": p.alpha, "power": n} for p, n in self.entries]

    def __str__(self) -> str:
        if not self.entries:
            return "1"
        return "*".join(f"z{p}^{n}" if n > 1 else f"z{p}" for p, n in self.entries)


@dataclass(frozen=True)
class LinearTerm:
    j: int
    alpha: int
    series: UniSeries
    basis: Basis = Basis.DX

    @property
    def pair(self) -> IndexPair:
        return IndexPair(self.j, self.alpha)


@dataclass(frozen=True)
class NonlinearTerm:
    i: int  # power of t
    nu: MultiIndex
    series: UniSeries

    @property
    def weight(self) -> int:
        return self.i + self.nu.order


@dataclass(frozen=True)
class EquationSpec:
    """Full equation data. All series are polynomial data padded to trunc_x."""
    m: int
    a: UniSeries
    linear: Tuple[LinearTerm, ...] = ()
    nonlinear: Tuple[NonlinearTerm, ...] = ()
    trunc_x: int = 40
    index_set: Optional[FrozenSet[IndexPair]] = None  # None means I_m
    name: str = "equation"

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise EquationError(f"m must be a positive integer, got {self.m}")
        if self.trunc_x < 0:
            raise EquationError(f"trunc_x must be nonnegative, got {self.trunc_x}")
        object.__setattr__(self, "a", self.a.padded(self.trunc_x))
        object.__setattr__(self, "linear", tuple(
            replace(t, series=t.series.padded(self.trunc_x)) for t in self.linear))
        object.__setattr__(self, "nonlinear", tuple(
            replace(t, series=t.series.padded(self.trunc_x)) for t in self.nonlinear))
        if self.index_set is not None:
            object.__setattr__(self, "index_set", frozenset(self.index_set))

        for n, term in enumerate(self.linear):
            if not term.pair.in_im(self.m):
                raise EquationError(f"linear[{n}]: term {term.pair} is outside I_{self.m}")
        allowed = self.index_pairs
        for n, term in enumerate(self.nonlinear):
            if term.i < 0:
                raise EquationError(f"nonlinear[{n}].i must be nonnegative, got {term.i}")
            if term.weight < 2:
                raise EquationError(
                    f"nonlinear[{n}]: i + |nu| = {term.weight} < 2; linear and forcing terms have dedicated slots")
            for pair in term.nu.support:
                if pair not in allowed:
                    raise EquationError(f"nonlinear[{n}]: z{pair} is not in the declared index set")

    @property
    def is_general(self) -> bool:
        return self.index_set is not None

    @property
    def index_pairs(self) -> FrozenSet[IndexPair]:
        return self.index_set if self.index_set is not None else im_pairs(self.m)

    def padded(self, trunc_x: int) -> "EquationSpec":
        return replace(self, trunc_x=trunc_x)

    def nonlinear_table(self) -> Dict[Tuple[int, MultiIndex], UniSeries]:
        """(i, nu) -> a_{i,nu}(x), merging repeated keys."""
        table: Dict[Tuple[int, MultiIndex], UniSeries] = {}
        for term in self.nonlinear:
            key = (term.i, term.nu)
            table[key] = table[key] + term.series if key in table else term.series
        return table

    def max_derivative(self) -> int:
        """Largest d/dx order any nonlinear term applies to u."""
        return max((p.alpha for t in self.nonlinear for p in t.nu.support), default=0)


@lru_cache(maxsize=None)
def stirling_second(n: int, k: int) -> int:
    return int(np.asarray(stirling2(n, k, exact=True)).item())


def _accumulate(target: Dict[IndexPair, UniSeries], pair: IndexPair, series: UniSeries):
    target[pair] = target[pair] + series if pair in target else series


def canonical_linear(spec: EquationSpec) -> Dict[IndexPair, UniSeries]:
    """
    b_{j,alpha}(x) in the d/dx basis.

    Euler terms expand through (x d/dx)^alpha = sum_beta S(alpha, beta) x^beta (d/dx)^beta.
    """
    b: Dict[IndexPair, UniSeries] = {}
    for term in spec.linear:
        if term.basis is Basis.DX:
            _accumulate(b, term.pair, term.series)
            continue
        for beta in range(term.alpha + 1):
            weight = stirling_second(term.alpha, beta)
            if weight:
                _accumulate(b, IndexPair(term.j, beta), term.series.shift(beta).scale(weight))
    return {pair: series.truncate(min(series.trunc, spec.trunc_x)) for pair, series in b.items()}


@dataclass(frozen=True)
class NormalizedEquation:
    spec: EquationSpec
    c: Mapping[IndexPair, UniSeries]   # includes c_{m,0} = -1
    b: Mapping[IndexPair, UniSeries]
    lambda0: FrozenSet[IndexPair]
    lambda1: FrozenSet[IndexPair]
    lambda_all: FrozenSet[IndexPair]
    p: Mapping[IndexPair, int]
    diagnostics: ValidationResult = field(default_factory=ValidationResult, compare=False, repr=False)

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def top(self) -> IndexPair:
        return IndexPair(self.spec.m, 0)

    def c0(self, pair: IndexPair) -> Fraction:
        series = self.c.get(pair)
        return series.constant if series is not None else Fraction(0)

    def canonical_spec(self) -> EquationSpec:
        """The same equation with every linear term written in the d/dx basis."""
        linear = tuple(
            LinearTerm(pair.j, pair.alpha, series, Basis.DX)
            for pair, series in sorted(self.b.items()) if not series.is_zero()
        )
        return replace(self.spec, linear=linear)


def normalize(spec: EquationSpec) -> NormalizedEquation:
    """
    Compute c_{j,alpha} = x^{-alpha} b_{j,alpha} and the index sets Lambda_0, Lambda_1, Lambda.

    Raises:
        EquationError: a d/dx-basis coefficient b_{j,alpha} with alpha > 0 is not O(x^alpha)
    """
    diagnostics = ValidationResult()
    c_parts: Dict[IndexPair, UniSeries] = {}

    for n, term in enumerate(spec.linear):
        if term.basis is Basis.DX:
            valuation = term.series.valuation()
            if term.alpha > 0 and valuation is not None and valuation < term.alpha:
                message = (f"linear[{n}]: b{term.pair} has x-valuation {valuation} < {term.alpha}; "
                           f"the equation is not of totally characteristic type")
                diagnostics.add_issue(ValidationLevel.ERROR, "A3", message)
                raise EquationError(message)
            if term.alpha > term.series.trunc:
                raise EquationError(f"linear[{n}]: trunc_x={spec.trunc_x} is below alpha={term.alpha}")
            _accumulate(c_parts, term.pair, term.series.shift_down(term.alpha))
        else:
            for beta in range(term.alpha + 1):
                weight = stirling_second(term.alpha, beta)
                if weight:
                    _accumulate(c_parts, IndexPair(term.j, beta), term.series.scale(weight))

    top = IndexPair(spec.m, 0)
    c: Dict[IndexPair, UniSeries] = {}
    for pair in sorted(c_parts):
        series = c_parts[pair]
        if series.is_zero():
            diagnostics.add_issue(
                ValidationLevel.WARNING, "truncation",
                f"c{pair} vanishes through x^{series.trunc}; term dropped",
                recommendation="Raise trunc_x if this coefficient is nonzero at higher order")
            continue
        c[pair] = series
    c[top] = UniSeries.from_coeffs([-1], spec.trunc_x)

    lambda_all = frozenset(pair for pair in c if pair != top)
    lambda1 = frozenset(pair for pair in lambda_all if c[pair].constant == 0)
    lambda0 = frozenset({top} | {pair for pair in lambda_all if c[pair].constant != 0})

    p: Dict[IndexPair, int] = {}
    for pair in lambda_all:
        series = c[pair]
        shifted = series - UniSeries.from_coeffs([series.constant], series.trunc)
        order = shifted.valuation()
        if order is not None:
            p[pair] = order

    if spec.nonlinear:
        diagnostics.add_issue(
            ValidationLevel.INFO, "nonlinear",
            f"Nonlinear part is the declared finite Taylor family ({len(spec.nonlinear)} terms)")

    return NormalizedEquation(
        spec=spec,
        c=c,
        b=canonical_linear(spec),
        lambda0=lambda0,
        lambda1=lambda1,
        lambda_all=lambda_all,
        p=p,
        diagnostics=diagnostics,
    )


def eval_L(norm: NormalizedEquation, k: int, l: int) -> Fraction:
    """L(k, l) = C(0; k, l) = k^m - sum c_{j,alpha}(0) k^j [l]_alpha."""
    total = Fraction(0)
    for pair, series in norm.c.items():
        c0 = series.constant
        if c0:
            total -= c0 * k ** pair.j * falling_factorial(l, pair.alpha)
    return total


def apply_C(norm: NormalizedEquation, k: int, w: UniSeries) -> UniSeries:
    """C(x; k, x d/dx) w = k^m w - sum c_{j,alpha}(x) k^j [x d/dx]_alpha w."""
    result = UniSeries.zeros(w.trunc)
    for pair, series in norm.c.items():
        result = result - mul(series, falling_op(w, pair.alpha)).scale(k ** pair.j)
    return result


_TOP_LEVEL_KEYS = {"name", "m", "trunc_x", "a", "linear", "nonlinear", "index_set"}


def _int_field(value: Any, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EquationError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise EquationError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _series_field(value: Any, where: str, trunc: int) -> UniSeries:
    if not isinstance(value, list):
        raise EquationError(f"{where}: expected a list of \"p/q\" or integer strings")
    try:
        return parse_series_literal(value, trunc)
    except SeriesError as e:
        raise EquationError(f"{where}: {e}") from None


def _table(entry: Any, where: str) -> Mapping:
    if not isinstance(entry, Mapping):
        raise EquationError(f"{where}: expected a table, got {entry!r}")
    return entry


def _require(table: Mapping, key: str, where: str) -> Any:
    if key not in table:
        raise EquationError(f"{where}: missing field '{key}'")
    return table[key]


def equation_from_dict(data: Mapping[str, Any], source: str = "<spec>") -> EquationSpec:
    """Build an EquationSpec from the parsed key-value tree of a spec file."""
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise EquationError(f"{source}: unknown field(s) {', '.join(sorted(unknown))}")

    m = _int_field(_require(data, "m", source), "m", minimum=1)
    trunc_x = _int_field(data.get("trunc_x", 40), "trunc_x")
    a = _series_field(data.get("a", ["0"]), "a", trunc_x)

    index_set = None
    raw_index = data.get("index_set", "Im")
    if raw_index != "Im":
        if not isinstance(raw_index, list):
            raise EquationError("index_set: expected \"Im\" or a list of [j, alpha] pairs")
        pairs = []
        for n, entry in enumerate(raw_index):
            if not isinstance(entry, list) or len(entry) != 2:
                raise EquationError(f"index_set[{n}]: expected [j, alpha]")
            pairs.append(IndexPair(_int_field(entry[0], f"index_set[{n}][0]"),
                                   _int_field(entry[1], f"index_set[{n}][1]")))
        index_set = frozenset(pairs)

    linear = []
    for n, entry in enumerate(data.get("linear", [])):
        where = f"linear[{n}]"
        entry = _table(entry, where)
        basis_name = entry.get("basis", "dx")
        try:
            basis = Basis(basis_name)
        except ValueError:
            raise EquationError(f"{where}.basis: expected \"dx\" or \"euler\", got {basis_name!r}") from None
        linear.append(LinearTerm(
            j=_int_field(_require(entry, "j", where), f"{where}.j"),
            alpha=_int_field(_require(entry, "alpha", where), f"{where}.alpha"),
            series=_series_field(_require(entry, "series", where), f"{where}.series", trunc_x),
            basis=basis,
        ))

    nonlinear = []
    for n, entry in enumerate(data.get("nonlinear", [])):
        where = f"nonlinear[{n}]"
        entry = _table(entry, where)
        powers = []
        for r, factor in enumerate(entry.get("nu", [])):
            fw = f"{where}.nu[{r}]"
            factor = _table(factor, fw)
            pair = IndexPair(_int_field(_require(factor, "j", fw), f"{fw}.j"),
                             _int_field(_require(factor, "alpha", fw), f"{fw}.alpha"))
            powers.append((pair, _int_field(factor.get("power", 1), f"{fw}.power", minimum=1)))
        nonlinear.append(NonlinearTerm(
            i=_int_field(entry.get("i", 0), f"{where}.i"),
            nu=MultiIndex.of(powers),
            series=_series_field(_require(entry, "series", where), f"{where}.series", trunc_x),
        ))

    return EquationSpec(
        m=m,
        a=a,
        linear=tuple(linear),
        nonlinear=tuple(nonlinear),
        trunc_x=trunc_x,
        index_set=index_set,
        name=str(data.get("name", source)),
    )


def load_equation_file(path: str) -> EquationSpec:
    """
    Load an equation spec file (TOML).

    Raises:
        EquationError: unreadable file, TOML syntax error (with line/column) or bad field
    """
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise EquationError(f"{path}: {e}") from None
    except OSError as e:
        raise EquationError(f"{path}: {e.strerror}") from None
    return equation_from_dict(data, source=str(path))


def equation_to_dict(spec: EquationSpec) -> Dict[str, Any]:
    """Inverse of equation_from_dict (series written as literal strings)."""
    data: Dict[str, Any] = {
        "name": spec.name,
        "m": spec.m,
        "trunc_x": spec.trunc_x,
        "a": spec.a.to_literal(),
        "linear": [
            {"j": t.j, "alpha": t.alpha, "basis": t.basis.value, "series": t.series.to_literal()}
            for t in spec.linear
        ],
        "nonlinear": [
            {"i": t.i, "nu": t.nu.to_list(), "series": t.series.to_literal()}
            for t in spec.nonlinear
        ],
    }
    data["index_set"] = "Im" if spec.index_set is None else [
        [p.j, p.alpha] for p in sorted(spec.index_set)]
    return data
