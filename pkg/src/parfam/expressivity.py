"""Counting unary-binary expression trees and the family's coverage of them.

Three exact integer sequences are tracked for trees with ``l`` internal
nodes, given ``n`` leaf kinds, ``k`` unary kinds, and ``b`` binary kinds:

* ``b_l`` - binary-only trees,
* ``c_l`` - unary-binary trees in which no root-to-leaf path passes through
  more than one unary node (exactly the trees the rational-family model can
  represent),
* ``d_l`` - all unary-binary trees.

Closed-form asymptotics come from the dominant singularities of the three
generating functions: a cubic solved by Cardano's formula for ``c_l`` and a
quadratic for ``d_l``.  The headline coverage statistic is the ratio
``r2/x1`` of those singularities: ``c_l/d_l`` decays like ``(r2/x1)**l``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .errors import NumericalFailureError

ROOT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class TreeParams:
    """Alphabet sizes: n leaf kinds, k unary kinds, b binary kinds."""

    n: int
    k: int
    b: int

    def __post_init__(self):
        if min(self.n, self.k, self.b) < 1:
            raise ValueError("n, k, b must all be >= 1")


@dataclass(frozen=True)
class ExprCensus:
    """Exact counts up to some length plus every asymptotic constant."""

    params: TreeParams
    b_l: tuple[int, ...]
    c_l: tuple[int, ...]
    d_l: tuple[int, ...]
    x1: float
    x2: float
    x3: float
    r1: float
    r2: float
    v0: float
    v1: float
    lam: float
    mu: float


def exact_counts(params: TreeParams, L: int) -> tuple[list[int], list[int], list[int]]:
    """The three recurrences, in exact integer arithmetic, for l = 0..L."""
    n, k, b = params.n, params.k, params.b
    b_l, c_l, d_l = [n], [n], [n]
    for l in range(1, L + 1):
        conv_b = sum(b_l[i] * b_l[l - 1 - i] for i in range(l))
        conv_c = sum(c_l[i] * c_l[l - 1 - i] for i in range(l))
        conv_d = sum(d_l[i] * d_l[l - 1 - i] for i in range(l))
        b_l.append(b * conv_b)
        c_l.append(k * b_l[l - 1] + b * conv_c)
        d_l.append(k * d_l[l - 1] + b * conv_d)
    return b_l, c_l, d_l


# ---------------------------------------------------------------------------
# generating-function series (exact cross-check of the recurrences)


def _series_sqrt(a: list[Fraction], L: int) -> list[Fraction]:
    """Power series of sqrt(A) for A with a[0] = 1, to order L, exactly."""
    assert a[0] == 1
    s = [Fraction(1)] + [Fraction(0)] * L
    for l in range(1, L + 1):
        acc = a[l] if l < len(a) else Fraction(0)
        acc -= sum(s[j] * s[l - j] for j in range(1, l))
        s[l] = acc / 2
    return s


def _series_mul(a: list[Fraction], c: list[Fraction], L: int) -> list[Fraction]:
    out = [Fraction(0)] * (L + 1)
    for i, ai in enumerate(a[: L + 1]):
        if ai == 0:
            continue
        for j, cj in enumerate(c[: L + 1 - i]):
            out[i + j] += ai * cj
    return out


def series_counts(params: TreeParams, L: int) -> tuple[list[int], list[int], list[int]]:
    """Coefficients of the three closed-form generating functions, to l = L.

    Everything is expanded in exact rational arithmetic; the result must
    coincide with :func:`exact_counts`, which is what the test suite checks.
    """
    n, k, b = params.n, params.k, params.b
    pad = L + 2  # one extra order: dividing by z shifts the series down

    # B(z) = (1 - sqrt(1 - 4bnz)) / (2bz)
    under_b = [Fraction(1), Fraction(-4 * b * n)] + [Fraction(0)] * pad
    sqrt_b = _series_sqrt(under_b, pad)
    b_series = [-c / (2 * b) for c in sqrt_b[1: pad + 1]]

    # C(z) = (1 - sqrt(1 - 4bz(k z B(z) + n))) / (2bz)
    inner = [Fraction(0), Fraction(-4 * b * n)]  # -4bnz
    kzb = [Fraction(0), Fraction(0)] + [Fraction(-4 * b * k) * c for c in b_series]
    under_c = [Fraction(1)] + [Fraction(0)] * pad
    for i, c in enumerate(inner):
        under_c[i] += c
    for i, c in enumerate(kzb[: pad + 1]):
        under_c[i] += c
    sqrt_c = _series_sqrt(under_c, pad)
    c_series = [-c / (2 * b) for c in sqrt_c[1: pad + 1]]

    # D(z) = (1 - kz - sqrt(k^2 z^2 - (2k + 4bn) z + 1)) / (2bz)
    under_d = [Fraction(1), Fraction(-(2 * k + 4 * b * n)), Fraction(k * k)] + [Fraction(0)] * pad
    sqrt_d = _series_sqrt(under_d, pad)
    top = [Fraction(1), Fraction(-k)] + [Fraction(0)] * pad
    d_shifted = [top[i] - sqrt_d[i] for i in range(pad + 1)]
    d_series = [c / (2 * b) for c in d_shifted[1: pad + 1]]

    def to_ints(series):
        out = []
        for c in series[: L + 1]:
            if c.denominator != 1:
                raise NumericalFailureError("generating-function series is not integral")
            out.append(int(c))
        return out

    return to_ints(b_series), to_ints(c_series), to_ints(d_series)


# ---------------------------------------------------------------------------
# singularities and asymptotic constants


def _p_of(z: complex, params: TreeParams) -> complex:
    n, k, b = params.n, params.k, params.b
    return 1 - 2 * k * z + 2 * k * z * cmath.sqrt(1 - 4 * b * n * z) - 4 * b * n * z


def cardano_x1(params: TreeParams) -> tuple[complex, complex, complex]:
    """Roots of the cubic behind the c_l generating function's singularity.

    Exact rationals feed the radicals (the discriminant suffers catastrophic
    cancellation in floating point) and the principal branch is used for the
    cube roots.  x1 and x2 are verified to be genuine singularities; x3 is an
    artifact of squaring.
    """
    n, k, b = params.n, params.k, params.b
    Q = Fraction(-(4 * b**3 * n**3 + 8 * b**2 * k * n**2 + 10 * b * k**2 * n + 3 * k**3),
                 36 * b * k**4 * n)
    R = Fraction(-(32 * b**4 * n**4 + 96 * b**3 * k * n**3 + 168 * b**2 * k**2 * n**2
                   + 140 * b * k**3 * n + 63 * k**4),
                 864 * b * k**6 * n)
    V = Fraction(-(8 * b**2 * n**2 + 13 * b * k * n + 16 * k**2),
                 27648 * b**3 * k**5 * n**3)
    if Q**3 + R**2 != V:
        raise NumericalFailureError("cubic discriminant identity failed")

    sqrt_v = cmath.sqrt(complex(V))
    S = (complex(R) + sqrt_v) ** (1.0 / 3.0)
    T = (complex(R) - sqrt_v) ** (1.0 / 3.0)
    shift = (b * n + k) / (3 * k**2)
    x1 = S + T - shift
    x2 = -(S + T) / 2 - shift + 1j * math.sqrt(3) / 2 * (S - T)
    x3 = -(S + T) / 2 - shift - 1j * math.sqrt(3) / 2 * (S - T)

    for root in (x1, x2):
        residual = abs(_p_of(root, params))
        if residual > ROOT_RESIDUAL_TOL:
            raise NumericalFailureError(
                f"root residual {residual:.3e} exceeds {ROOT_RESIDUAL_TOL}")
    if abs(x1.imag) > ROOT_RESIDUAL_TOL or abs(x2.imag) > ROOT_RESIDUAL_TOL:
        raise NumericalFailureError("x1/x2 acquired a non-negligible imaginary part")
    return x1, x2, x3


def d_singularities(params: TreeParams) -> tuple[float, float]:
    """r1 > r2 > 0, the roots of k^2 z^2 - (2k + 4bn) z + 1."""
    n, k, b = params.n, params.k, params.b
    root = 2 * math.sqrt(b * n * k + b**2 * n**2)
    r1 = (k + 2 * b * n + root) / k**2
    r2 = (k + 2 * b * n - root) / k**2
    return r1, r2


def _c_constants(params: TreeParams):
    """x1 plus the two series constants of the c_l approximation."""
    n, k, b = params.n, params.k, params.b
    x1, x2, x3 = cardano_x1(params)
    mu = -16 * k**2 * b * n * x1 * x2 * x3

    def denom(z):
        return 1 - 2 * k * z - 4 * b * n * z - 2 * k * z * cmath.sqrt(1 - 4 * b * n * z)

    head = cmath.sqrt(mu * (1 - x1 / x2) * (1 - x1 / x3))
    v0 = head / cmath.sqrt(denom(x1))
    s14 = cmath.sqrt(1 - 4 * b * n * x1)
    d_denom = -2 * k - 4 * b * n - 2 * k * s14 + 4 * b * n * k * x1 / s14
    v1 = (-x1 * mu * (2 * x1 / (x2 * x3) - 1 / x2 - 1 / x3)
          / (2 * head * cmath.sqrt(denom(x1)))
          + x1 * head / (2 * denom(x1) ** 1.5) * d_denom)
    for name, value in (("v0", v0), ("v1", v1), ("mu", mu)):
        if abs(value.imag) > ROOT_RESIDUAL_TOL:
            raise NumericalFailureError(f"{name} acquired an imaginary part")
    return x1.real, x2, x3, mu.real, v0.real, v1.real


def approx_c(params: TreeParams, l: int) -> float:
    """Second-order singularity approximation of c_l."""
    if l < 1:
        raise ValueError("l must be >= 1")
    x1, _, _, _, v0, v1 = _c_constants(params)
    b = params.b
    lp = l + 1
    lead = x1**lp
    if lead == 0.0 or not math.isfinite(1.0 / lead):
        raise NumericalFailureError(f"x1**{lp} leaves the float range")
    return (1.0 / (2 * b * lead)) * (
        v0 * (1.0 / math.sqrt(4 * math.pi * lp**3) + 3.0 / (8 * math.sqrt(4 * math.pi * lp**5)))
        - v1 * 3.0 / (4 * math.sqrt(math.pi * lp**5)))


def approx_d(params: TreeParams, l: int) -> float:
    """Second-order singularity approximation of d_l."""
    if l < 1:
        raise ValueError("l must be >= 1")
    r1, r2 = d_singularities(params)
    lam = params.k * math.sqrt(r1 * r2)
    b = params.b
    lp = l + 1
    gap = math.sqrt(1 - r2 / r1)
    lead = r2**lp
    if lead == 0.0 or not math.isfinite(1.0 / lead):
        raise NumericalFailureError(f"r2**{lp} leaves the float range")
    return (lam / (2 * b * lead)) * (
        gap * (1.0 / math.sqrt(4 * math.pi * lp**3) + 3.0 / (8 * math.sqrt(4 * math.pi * lp**5)))
        - 3.0 * r2 / (8 * gap * math.sqrt(math.pi * lp**5) * r1))


def coverage_ratio(params: TreeParams) -> float:
    """r2 / x1: the per-node decay factor of the representable fraction."""
    x1, _, _ = cardano_x1(params)
    _, r2 = d_singularities(params)
    return r2 / x1.real


def round_half_up(value: float, places: int = 4) -> float:
    return float(Decimal(repr(value)).quantize(Decimal(10) ** -places, rounding=ROUND_HALF_UP))


def ratio_table(b: int, k_range, n_range) -> list[list[float]]:
    """Matrix of r2/x1 over (n, k), rounded half-away-from-zero to 4 decimals."""
    k_range = list(k_range)
    n_range = list(n_range)
    if not k_range or not n_range:
        raise ValueError("ranges must be nonempty")
    return [
        [round_half_up(coverage_ratio(TreeParams(n=n, k=k, b=b))) for k in k_range]
        for n in n_range
    ]


def census(params: TreeParams, L: int) -> ExprCensus:
    """Exact counts to L plus all asymptotic constants in one record."""
    b_l, c_l, d_l = exact_counts(params, L)
    x1, x2, x3, mu, v0, v1 = _c_constants(params)
    r1, r2 = d_singularities(params)
    return ExprCensus(
        params=params,
        b_l=tuple(b_l), c_l=tuple(c_l), d_l=tuple(d_l),
        x1=x1, x2=x2.real, x3=x3.real,
        r1=r1, r2=r2, v0=v0, v1=v1,
        lam=params.k * math.sqrt(r1 * r2), mu=mu,
    )
