"""Betti numbers over the two-element field via boundary-matrix reduction.

Columns are stored as python-int bitsets; elimination pivots on the highest
set bit.  Adequate (and cache-friendly) up to ~1e5 simplices, which is the
scale every direct complex construction in this package is budgeted to.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .geomcomplex import SimplicialComplex


@dataclass(frozen=True)
class BettiVector:
    """Betti numbers beta_0..beta_maxdim of a complex."""

    values: tuple[int, ...]

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, k: int) -> int:
        return self.values[k]

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def parse(cls, text: str) -> "BettiVector":
        return cls(tuple(int(tok) for tok in text.split(",") if tok != ""))


def _columns(complex_: SimplicialComplex, k: int) -> list[int]:
    """GF(2) boundary columns of the k-simplices as facet-index bitsets."""
    row_index = {s: i for i, s in enumerate(complex_.simplices[k - 1])}
    cols = []
    for s in complex_.simplices[k]:
        bits = 0
        for facet in itertools.combinations(s, k):
            bits |= 1 << row_index[facet]
        cols.append(bits)
    return cols


def _rank_gf2(cols: list[int]) -> int:
    pivots: dict[int, int] = {}
    rank = 0
    for col in cols:
        while col:
            low = col.bit_length() - 1
            if low not in pivots:
                pivots[low] = col
                rank += 1
                break
            col ^= pivots[low]
    return rank


def boundary_rank(complex_: SimplicialComplex, k: int) -> int:
    """Rank over GF(2) of the boundary map from k-chains to (k-1)-chains."""
    if k < 1 or k > complex_.max_dim:
        return 0
    if not complex_.simplices[k]:
        return 0
    return _rank_gf2(_columns(complex_, k))


def betti(complex_: SimplicialComplex) -> BettiVector:
    """beta_k = #k-simplices - rank d_k - rank d_(k+1), through max_dim."""
    ranks = [boundary_rank(complex_, k) for k in range(complex_.max_dim + 2)]
    values = []
    for k, level in enumerate(complex_.simplices):
        up = ranks[k + 1] if k + 1 <= complex_.max_dim else 0
        values.append(len(level) - ranks[k] - up)
    return BettiVector(tuple(values))


def connected_components(complex_: SimplicialComplex) -> int:
    """Components of the 1-skeleton by union-find; always equals beta_0."""
    n = complex_.n_vertices
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if complex_.max_dim >= 1:
        for i, j in complex_.simplices[1]:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    return sum(1 for i in range(n) if find(i) == i)
