"""Spectrum-based fault localization over statement coverage."""

from __future__ import annotations

import math

from .minilang import CoverageRecord


def ochiai(records: list[CoverageRecord]) -> list[tuple[int, float]]:
    """Suspiciousness ranking: ef / sqrt((ef+nf) * (ef+ep)) per statement.

    ef/ep count failing/passing tests covering the statement, nf failing tests
    that do not cover it; a zero denominator scores 0. Returns (statement id,
    score) sorted by descending score, ties broken by pre-order id.
    """
    if not records:
        raise ValueError("need at least one coverage record")
    universe = sorted(set().union(*(r.covered for r in records)))
    failing = [r for r in records if not r.passed]
    passing = [r for r in records if r.passed]
    ranking = []
    for stmt in universe:
        ef = sum(1 for r in failing if stmt in r.covered)
        nf = len(failing) - ef
        ep = sum(1 for r in passing if stmt in r.covered)
        denom = math.sqrt((ef + nf) * (ef + ep))
        ranking.append((stmt, ef / denom if denom else 0.0))
    ranking.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranking
