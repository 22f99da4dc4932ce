"""Pareto-dominance bookkeeping over (accuracy, latency) points.

A point dominates another when it is at least as accurate and at least as
fast, strictly better on one axis. The front keeps exactly the
non-dominated subset, sorted by latency ascending (which forces accuracy
strictly increasing). Points equal on both coordinates keep a single
representative: the lexicographically smallest arch_id, so ledger summaries
are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class Point:
    arch_id: str
    accuracy: float
    latency_ms: float


@dataclass(frozen=True)
class ParetoFront:
    points: tuple[Point, ...]  # sorted by latency ascending


def dominates(a: Point, b: Point) -> bool:
    at_least = a.accuracy >= b.accuracy and a.latency_ms <= b.latency_ms
    strictly = a.accuracy > b.accuracy or a.latency_ms < b.latency_ms
    return at_least and strictly


def _same_coords(a: Point, b: Point) -> bool:
    return a.accuracy == b.accuracy and a.latency_ms == b.latency_ms


def insert(front: ParetoFront, p: Point) -> ParetoFront:
    """Incremental insert: drops newly dominated members, no-ops when p is
    dominated or a tie with a smaller arch_id already represents it."""
    kept: list[Point] = []
    for q in front.points:
        if dominates(q, p):
            return front
        if _same_coords(q, p):
            return front if q.arch_id <= p.arch_id else _sorted_front(
                [r for r in front.points if r is not q] + [p])
        if not dominates(p, q):
            kept.append(q)
    kept.append(p)
    return _sorted_front(kept)


def _sorted_front(points: list[Point]) -> ParetoFront:
    return ParetoFront(tuple(sorted(points, key=lambda p: (p.latency_ms, p.arch_id))))


def extract_front(points: Iterable[Point]) -> ParetoFront:
    front = ParetoFront(())
    for p in points:
        front = insert(front, p)
    return front
