"""Enumerators behind the search for instruments: inclusion-minimal
separating sets and identifiable policy subspaces.

Minimal separators are enumerated on the moralized ancestral graph of the
two endpoints (minimal d-separators always live among their ancestors) by
branching on exclusions of members of a found separator; results come out
smallest-first in lexicographic order.  Subspace enumeration backtracks over
input subsets and prunes on the lower space, which is sound because
identifiability over a space implies identifiability over every subspace.
"""
from __future__ import annotations

from typing import Iterable, Iterator

from .diagram import CausalDiagram, PolicySpace, _moral_adjacency
from .identify import identify_policy


def _component(adj: dict[str, set[str]], start: str, removed: frozenset[str]) -> set[str]:
    comp = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for m in adj[n]:
            if m not in removed and m not in comp:
                comp.add(m)
                stack.append(m)
    return comp


def _neighborhood(adj: dict[str, set[str]], comp: set[str]) -> frozenset[str]:
    out: set[str] = set()
    for n in comp:
        out |= adj[n]
    return frozenset(out - comp)


def _trim(adj: dict[str, set[str]], a: str, b: str, sep: frozenset[str]) -> frozenset[str]:
    """Shrink a separator to an inclusion-minimal one: keep the boundary of
    a's component, then the boundary of b's component of what remains."""
    s1 = _neighborhood(adj, _component(adj, a, sep))
    s2 = _neighborhood(adj, _component(adj, b, s1))
    return s2


def list_min_separators(diagram: CausalDiagram, a: str, b: str,
                        restrict: Iterable[str]) -> Iterator[frozenset[str]]:
    """Yield every inclusion-minimal set within ``restrict`` that d-separates
    ``a`` from ``b``, each exactly once, smallest lexicographic order first.
    """
    for n in (a, b):
        if not diagram.has_node(n):
            raise ValueError(f"unknown node {n!r}")
    adj = _moral_adjacency(diagram, frozenset({a, b}))
    candidates = frozenset(restrict) & frozenset(adj) - {a, b}

    def separates(cut: frozenset[str]) -> bool:
        return b not in _component(adj, a, cut)

    found: set[frozenset[str]] = set()
    stack = [frozenset()]
    seen_excl: set[frozenset[str]] = {frozenset()}
    while stack:
        excluded = stack.pop()
        allowed = candidates - excluded
        if not separates(allowed):
            continue
        sep = _trim(adj, a, b, allowed)
        found.add(sep)
        # branch on every member even when sep was seen before: a target
        # separator may only be reachable through this exclusion state
        for v in sorted(sep):
            nxt = excluded | {v}
            if nxt not in seen_excl:
                seen_excl.add(nxt)
                stack.append(nxt)
    yield from sorted(found, key=lambda s: tuple(sorted(s)))


def list_id_subspaces(diagram: CausalDiagram, space: PolicySpace,
                      outcome: Iterable[str]) -> Iterator[PolicySpace]:
    """Yield every policy subspace whose interventional outcome distribution
    is identifiable, exactly once, include-branch first."""
    target = frozenset(outcome)

    def helper(lower: frozenset[str], upper: frozenset[str]) -> Iterator[PolicySpace]:
        if identify_policy(diagram, PolicySpace(space.action, lower), target) is None:
            return
        if lower == upper:
            yield PolicySpace(space.action, lower)
            return
        v = min(upper - lower)
        yield from helper(lower | {v}, upper)
        yield from helper(lower, upper - {v})

    yield from helper(frozenset(), space.inputs)
