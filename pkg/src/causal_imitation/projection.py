"""Latent projection onto the observed nodes.

The projection keeps every observed node, adds a -> b when a reaches b
through latent nodes only, and adds a <-> b when a latent-only structure
(a direct bidirected edge, a bidirected edge between latent chains, or a
latent common-cause fork) confounds the pair.  The result is
semi-Markovian: every node observed.
"""
from __future__ import annotations

from .diagram import CausalDiagram, require_valid


def _latent_interior_reach(
    children: dict[str, frozenset[str]], start: str, latent: frozenset[str]
) -> frozenset[str]:
    """Observed nodes reachable from ``start`` along directed paths whose
    interior nodes are all latent (``start`` itself may be anything)."""
    hits: set[str] = set()
    seen: set[str] = set()
    stack = list(children.get(start, ()))
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if n in latent:
            stack.extend(children.get(n, ()))
        else:
            hits.add(n)
    return frozenset(hits)


def project(diagram: CausalDiagram) -> CausalDiagram:
    """Project an arbitrary diagram onto its observed nodes."""
    require_valid(diagram)
    children, hidden = diagram._expanded()
    latent = diagram.latent | hidden
    obs = sorted(diagram.observed)

    directed = set()
    for s in obs:
        for e in _latent_interior_reach(children, s, latent):
            if e != s:
                directed.add((s, e))

    # Any confounding pattern collapses to a latent fork once bidirected
    # edges are expanded: some latent root reaches both endpoints through
    # latent interiors.
    bidirected = set()
    for root in sorted(latent):
        reach = sorted(_latent_interior_reach(children, root, latent))
        for i, a in enumerate(reach):
            for b in reach[i + 1 :]:
                bidirected.add((a, b))

    return CausalDiagram(
        nodes=tuple(obs),
        observed=frozenset(obs),
        directed=frozenset(directed),
        bidirected=frozenset(bidirected),
    )
