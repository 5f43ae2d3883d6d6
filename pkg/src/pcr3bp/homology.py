"""Graded Z/2 ranks of path spaces feeding the chord-count oracle.

Ranks come from two facts: the based loop space of ``S^m`` has mod 2
homology a tensor algebra on one class of degree ``m - 1``, and over a
field the Kunneth formula is a convolution of rank sequences.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_DEGREE",
    "PAIRS",
    "RankSequence",
    "betti_loop_sphere",
    "betti_loop_s2",
    "betti_torus",
    "convolve_ranks",
    "brute_force_convolve",
    "kunneth_with_torus",
    "predicted_ranks",
    "forcing_summary",
    "rank_table_csv",
    "rank_table_text",
]

DEFAULT_DEGREE = 20
PAIRS = ("Le_Fix", "Lm_Fix", "Le_Lm", "Le_Le", "Lm_Lm", "Fix_Fix")


@dataclass(frozen=True)
class RankSequence:
    """Ranks in degrees ``0..N``."""

    ranks: tuple

    def __post_init__(self):
        r = tuple(int(x) for x in self.ranks)
        if any(x < 0 for x in r):
            raise ValueError("ranks must be nonnegative")
        object.__setattr__(self, "ranks", r)

    @property
    def degree(self) -> int:
        return len(self.ranks) - 1

    def __len__(self) -> int:
        return len(self.ranks)

    def __getitem__(self, i):
        return self.ranks[i]

    def __add__(self, other: "RankSequence") -> "RankSequence":
        n = min(len(self), len(other))
        return RankSequence(tuple(a + b for a, b in zip(self.ranks[:n], other.ranks[:n])))

    def scale(self, k: int) -> "RankSequence":
        return RankSequence(tuple(k * a for a in self.ranks))

    def total(self) -> int:
        return sum(self.ranks)

    def as_list(self) -> list:
        return list(self.ranks)


def betti_loop_sphere(m: int, N: int = DEFAULT_DEGREE) -> RankSequence:
    """Mod 2 ranks of the based loop space of ``S^m``, ``m >= 2``: one class in each multiple of ``m - 1``."""
    if m < 2 or N < 0:
        raise ValueError("need m >= 2 and N >= 0")
    return RankSequence(tuple(1 if d % (m - 1) == 0 else 0 for d in range(N + 1)))


def betti_loop_s2(N: int = DEFAULT_DEGREE) -> RankSequence:
    return betti_loop_sphere(2, N)


def betti_torus(circles: int) -> RankSequence:
    """Ranks of ``(S^1)^k``: binomial coefficients."""
    row = [1]
    for _ in range(circles):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return RankSequence(tuple(row))


def convolve_ranks(a: RankSequence, b: RankSequence, N: int | None = None) -> RankSequence:
    """Kunneth over a field, truncated at degree ``N`` (default: that of ``a``)."""
    N = a.degree if N is None else N
    out = np.convolve(np.asarray(a.ranks, dtype=np.int64), np.asarray(b.ranks, dtype=np.int64))
    out = np.concatenate([out, np.zeros(max(0, N + 1 - len(out)), dtype=np.int64)])
    if N > a.degree:
        raise ValueError("cannot extend beyond the degree of the first factor")
    return RankSequence(tuple(int(x) for x in out[: N + 1]))


def brute_force_convolve(a: RankSequence, b: RankSequence, N: int | None = None) -> RankSequence:
    """Product cell count: one cell of degree ``i + j`` for every pair of cells."""
    N = a.degree if N is None else N
    cells_a = [d for d, r in enumerate(a.ranks) for _ in range(r)]
    cells_b = [d for d, r in enumerate(b.ranks) for _ in range(r)]
    out = [0] * (N + 1)
    for i in cells_a:
        for j in cells_b:
            if i + j <= N:
                out[i + j] += 1
    return RankSequence(tuple(out))


def kunneth_with_torus(base: RankSequence, circles: int) -> RankSequence:
    if circles not in (0, 1, 2):
        raise ValueError("circles must be 0, 1 or 2")
    return convolve_ranks(base, betti_torus(circles))


def predicted_ranks(pair: str, N: int = DEFAULT_DEGREE) -> RankSequence:
    """Predicted ranks of the wrapped homology of a Lagrangian pair.

    ``Le``/``Lm`` are the collision Legendrians' fillings at earth and moon,
    ``Fix`` the fixed locus of the real structure.
    """
    if pair not in PAIRS:
        raise ValueError(f"unknown pair {pair!r}; expected one of {', '.join(PAIRS)}")
    loop = betti_loop_s2(N)
    if pair == "Le_Lm":
        return RankSequence((0,) * (N + 1))
    if pair in ("Le_Le", "Lm_Lm"):
        return loop
    if pair in ("Le_Fix", "Lm_Fix"):
        return kunneth_with_torus(loop, 1)
    return kunneth_with_torus(loop, 2).scale(2)


def forcing_summary(pair: str, N: int = DEFAULT_DEGREE) -> dict:
    """Chord-count lower bound from the total rank, with the parity rule for vanishing pairs."""
    r = predicted_ranks(pair, N)
    bound = r.total()
    if bound == 0:
        parity = "even count of nondegenerate chords"
    else:
        parity = "none"
    return {"pair": pair, "N": N, "ranks": r.as_list(), "lower_bound": bound, "parity_rule": parity}


def rank_table_csv(pairs, N: int = DEFAULT_DEGREE) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "degree", "rank"])
    for p in pairs:
        for d, r in enumerate(predicted_ranks(p, N).ranks):
            w.writerow([p, d, r])
    return buf.getvalue()


def rank_table_text(pairs, N: int = DEFAULT_DEGREE) -> str:
    pairs = list(pairs)
    width = max(8, *(len(p) for p in pairs))
    lines = ["degree".ljust(8) + "".join(p.rjust(width + 1) for p in pairs)]
    tables = [predicted_ranks(p, N) for p in pairs]
    for d in range(N + 1):
        lines.append(str(d).ljust(8) + "".join(str(t[d]).rjust(width + 1) for t in tables))
    return "\n".join(lines) + "\n"
