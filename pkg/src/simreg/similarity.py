"""Normalized structural similarity between expression trees."""

from __future__ import annotations

import threading
from typing import Sequence

from .expr import Expr, head

_cache: dict[tuple[str, str], float] = {}
_lock = threading.Lock()


def tree_edit_distance(t1: Expr, t2: Expr) -> int:
    """Recursive head/child distance. Not a metric: no triangle inequality."""
    if t1 == t2:
        return 0
    leaf1, leaf2 = t1.is_leaf, t2.is_leaf
    if leaf1 and leaf2:
        return 1
    if leaf1 or leaf2:
        return max(t1.size, t2.size)
    if head(t1) != head(t2):
        return 1 + max(t1.size, t2.size)
    return 1 + sum(tree_edit_distance(a, b) for a, b in zip(t1.children, t2.children))


def _raw_similarity(e1: Expr, e2: Expr) -> float:
    d = tree_edit_distance(e1, e2)
    value = 1.0 - d / max(e1.size, e2.size)
    return min(max(value, 0.0), 1.0)


def similarity(e1: Expr, e2: Expr) -> float:
    """Similarity in [0, 1], cached on the unordered pair of canonical strings."""
    a, b = e1.key, e2.key
    if a == b:
        return 1.0
    pair = (a, b) if a < b else (b, a)
    hit = _cache.get(pair)
    if hit is None:
        hit = _raw_similarity(e1, e2)
        with _lock:
            if len(_cache) > 1_000_000:
                _cache.clear()
            _cache[pair] = hit
    return hit


def clear_cache() -> None:
    with _lock:
        _cache.clear()


def find_similar(e: Expr, population: Sequence[Expr], threshold: float) -> list[Expr]:
    """Members other than ``e`` whose similarity to it is at least ``threshold``."""
    return [m for m in population if m is not e and m != e and similarity(e, m) >= threshold]


def nearest_neighbors(e: Expr, population: Sequence[Expr], k: int) -> list[tuple[Expr, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [(m, similarity(e, m)) for m in population if m is not e and m != e]
    # sorted() is stable, so ties keep population order
    scored.sort(key=lambda pair: -pair[1])
    return scored[:k]
