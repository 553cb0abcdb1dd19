"""
Word tables of the Magnus and transport series.

Everything here is generic over the algebra: `rhd(p, q)` is the pre-Lie
product and operands only need `+` and scalar `*`, so the same tables serve
vector fields and matrix functions.
"""

from fractions import Fraction
from functools import lru_cache, reduce
from math import comb, factorial
from typing import Any, Callable, Iterator, List, Sequence, Tuple

Product = Callable[[Any, Any], Any]

MAX_WORD_ORDER = 4


@lru_cache(maxsize=None)
def bernoulli_numbers(n_max: int) -> Tuple[Fraction, ...]:
    """B_0..B_n_max with B_1 = -1/2."""
    values = [Fraction(1)]
    for m in range(1, n_max + 1):
        values.append(-sum(comb(m + 1, k) * values[k] for k in range(m)) / (m + 1))
    return tuple(values)


def compositions(total: int) -> Iterator[Tuple[int, ...]]:
    """Ordered tuples of positive integers summing to total."""
    if total == 0:
        yield ()
        return
    for first in range(1, total + 1):
        for rest in compositions(total - first):
            yield (first,) + rest


def nest_right(items: Sequence[Any], rhd: Product) -> Any:
    """items[0] |> (items[1] |> (... |> items[-1]))."""
    word = items[-1]
    for item in reversed(items[:-1]):
        word = rhd(item, word)
    return word


def combine(terms: Sequence[Tuple[float, Any]], zero: Any) -> Any:
    if not terms:
        return zero
    return reduce(lambda total, item: total + item, [c * w for c, w in terms])


def magnus_rates(a: Any, rhd: Product, order: int) -> List[Any]:
    """R_1..R_order of Omega' as pre-Lie words in a (order <= 4)."""
    if not 1 <= order <= MAX_WORD_ORDER:
        raise ValueError(f"word tables cover orders 1..{MAX_WORD_ORDER}, got {order}")
    rates = [a]
    if order >= 2:
        aa = rhd(a, a)
        rates.append(-0.5 * aa)
    if order >= 3:
        rates.append(0.25 * rhd(aa, a) + (1.0 / 12.0) * rhd(a, aa))
    if order >= 4:
        aaa = rhd(aa, a)
        rates.append(-(1.0 / 6.0) * rhd(aaa, a) - (1.0 / 12.0) * rhd(a, aaa))
    return rates


def series_coefficient(
    rates: Sequence[Any], forcing: Sequence[Any], total: int, rhd: Product, zero: Any
) -> Any:
    """
    Order-`total` coefficient of
    sum_m 1/m! R|>...|>R  +  sum_m 1/m! R|>...|>R|>F
    for R = sum_j eps^j rates[j-1] and F = sum_k eps^k forcing[k-1].

    Only the supplied orders take part, so passing rates and forcing of order
    below `total` yields the coefficient without its linear R_total, F_total
    terms, which is what a series inversion needs.
    """
    terms = []
    for parts in compositions(total):
        if all(p <= len(rates) for p in parts):
            words = [rates[p - 1] for p in parts]
            terms.append((1.0 / factorial(len(parts)), nest_right(words, rhd)))
    for k in range(1, min(total, len(forcing)) + 1):
        for parts in compositions(total - k):
            if all(p <= len(rates) for p in parts):
                words = [rates[p - 1] for p in parts] + [forcing[k - 1]]
                terms.append((1.0 / factorial(len(parts)), nest_right(words, rhd)))
    return combine(terms, zero)


def series_coefficients(
    rates: Sequence[Any], forcing: Sequence[Any], order: int, rhd: Product, zero: Any
) -> List[Any]:
    return [
        series_coefficient(rates, forcing, total, rhd, zero)
        for total in range(1, order + 1)
    ]
