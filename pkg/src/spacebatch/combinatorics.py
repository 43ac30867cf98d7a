"""Blind estimation of the space-batch size from queue occupancy.

Each of the ``q`` queued packets is assumed to be addressed to one of ``N``
nodes uniformly and independently. The number of distinct destinations
``Xi_q`` then follows the classical occupancy distribution

    Pr{Xi_q = xi} = C(N, xi) * xi! * S(q, xi) / N**q

with ``S`` the Stirling numbers of the second kind. Everything is computed
with exact integers / fractions; conversion to float happens once at the end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import errors
from .config import ValidatedConfig

MAX_EXACT_OCCUPANCY = 512
ORACLE_LIMIT = 10**7


@dataclass(frozen=True)
class EligibleCountDistribution:
    """Distribution of the number of distinct destinations among ``q`` packets.

    ``exact[xi - 1]`` holds ``Pr{Xi_q = xi}`` as a :class:`Fraction` for
    ``xi = 1 .. min(q, N)``.
    """

    q: int
    n_nodes: int
    exact: tuple[Fraction, ...]

    @property
    def probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.exact])

    def prob(self, xi: int) -> Fraction:
        if 1 <= xi <= len(self.exact):
            return self.exact[xi - 1]
        return Fraction(0)


@dataclass(frozen=True)
class BatchSizeDistribution:
    """``table[q, m - 1] = p_{m|q}`` for ``q = 0..K`` and ``m = 1..s_max``."""

    table: np.ndarray
    s_max: int

    @property
    def buffer_size(self) -> int:
        return self.table.shape[0] - 1

    def row(self, q: int) -> np.ndarray:
        return self.table[q]

    def max_size(self, q: int) -> int:
        """``s(q)``: largest batch that can be scheduled from occupancy ``q``."""
        return max(1, min(q, self.s_max))

    def mean_size(self) -> np.ndarray:
        """Expected batch size per occupancy."""
        return self.table @ np.arange(1, self.s_max + 1)


def multiset_permutations(q: int, mu: Sequence[int]) -> int:
    """Number of distinct arrangements of ``q`` items with multiplicities ``mu``."""
    if any(int(m) != m or m <= 0 for m in mu) or sum(mu) != q or not mu:
        raise errors.InvalidComposition(f"{tuple(mu)} is not a composition of {q}")
    count = math.factorial(q)
    for m in mu:
        count //= math.factorial(m)
    return count


@lru_cache(maxsize=None)
def _stirling2_row(q: int) -> tuple[int, ...]:
    """Row ``q`` of the Stirling triangle: ``S(q, k)`` for ``k = 0..q``."""
    if q == 0:
        return (1,)
    prev = _stirling2_row(q - 1)
    row = [0] * (q + 1)
    for k in range(1, q + 1):
        # S(q, k) = k S(q-1, k) + S(q-1, k-1)
        below = prev[k] if k < len(prev) else 0
        row[k] = k * below + prev[k - 1]
    return tuple(row)


def stirling2(q: int, k: int) -> int:
    if q < 0 or k < 0:
        return 0
    if k > q:
        return 0
    return _stirling2_row(q)[k]


def eligible_count_distribution(q: int, n_nodes: int,
                                max_q: int = MAX_EXACT_OCCUPANCY) -> EligibleCountDistribution:
    if q < 1 or n_nodes < 1:
        raise ValueError(f"need q >= 1 and n_nodes >= 1, got q={q}, N={n_nodes}")
    if q > max_q:
        raise errors.OverflowImpossible(f"occupancy {q} exceeds exact-arithmetic bound {max_q}")
    total = n_nodes ** q
    exact = []
    for xi in range(1, min(q, n_nodes) + 1):
        favourable = math.comb(n_nodes, xi) * math.factorial(xi) * stirling2(q, xi)
        exact.append(Fraction(favourable, total))
    return EligibleCountDistribution(q, n_nodes, tuple(exact))


def enumerate_oracle(q: int, n_nodes: int, limit: int = ORACLE_LIMIT) -> EligibleCountDistribution:
    """Brute-force the distinct-destination count over all ``N**q`` queues."""
    total = n_nodes ** q
    if total > limit:
        raise errors.TooLarge(f"N**q = {total} arrangements exceeds limit {limit}")
    counts = [0] * (min(q, n_nodes) + 1)
    for arrangement in itertools.product(range(n_nodes), repeat=q):
        counts[len(set(arrangement))] += 1
    return EligibleCountDistribution(q, n_nodes, tuple(Fraction(c, total) for c in counts[1:]))


def batch_size_probs(q: int, n_nodes: int, s_max: int) -> list[Fraction]:
    """Exact ``[p_{1|q}, ..., p_{s_max|q}]``; excess eligibility folds into ``s_max``."""
    out = [Fraction(0)] * s_max
    if q == 0:
        out[0] = Fraction(1)
        return out
    dist = eligible_count_distribution(q, n_nodes)
    for xi, p in enumerate(dist.exact, start=1):
        out[min(xi, s_max) - 1] += p
    return out


def batch_size_distribution(config: ValidatedConfig) -> BatchSizeDistribution:
    K, s_max, N = config.buffer_size, config.s_max, config.n_nodes
    table = np.zeros((K + 1, s_max))
    for q in range(K + 1):
        table[q] = [float(p) for p in batch_size_probs(q, N, s_max)]
    return BatchSizeDistribution(table, s_max)
