"""Graphical imitability tests.

The reward node is an explicit argument everywhere; multi-reward queries run
per node.
"""
from __future__ import annotations

from typing import Iterable

from .diagram import (
    CausalDiagram,
    PolicySpace,
    augment_policy,
    d_separated,
    hat_name,
    mutilate,
    require_valid_space,
)
from .identify import identify_policy


def direct_parents_imitable(diagram: CausalDiagram, space: PolicySpace) -> frozenset[str] | None:
    """Conditioning set pa(action) when cloning on the action's own parents
    is guaranteed to imitate: all parents readable by the policy and no
    bidirected edge at the action.  ``None`` otherwise."""
    require_valid_space(diagram, space)
    pa = diagram.parents(space.action)
    if pa <= space.inputs and not diagram.siblings(space.action):
        return frozenset(pa)
    return None


def test_pi_backdoor(diagram: CausalDiagram, space: PolicySpace, reward: str,
                     zset: Iterable[str]) -> bool:
    """Does ``zset`` satisfy the policy backdoor criterion: a subset of the
    policy inputs separating reward from action once the action's outgoing
    edges are removed?"""
    zs = frozenset(zset)
    if not diagram.has_node(reward):
        raise ValueError(f"unknown reward node {reward!r}")
    if not zs <= space.inputs:
        return False
    if reward in zs:
        # conditioning on the reward itself is never a usable prescription
        return False
    cut = mutilate(diagram, cut_outgoing={space.action})
    return d_separated(cut, {reward}, {space.action}, zs)


def find_pi_backdoor(diagram: CausalDiagram, space: PolicySpace, reward: str,
                     minimal: bool = False) -> frozenset[str] | None:
    """Admissible set for the policy backdoor criterion, or ``None``.

    Testing one candidate is complete: the inputs ancestral to the action or
    reward.  Minimal separators live among the endpoints' ancestors, and
    separation is monotone there, so if the candidate fails no admissible
    set exists.  (When the reward descends from the action, the candidate is
    exactly the inputs ancestral to the reward.)  With ``minimal`` the
    candidate is greedily shrunk while it stays admissible.
    """
    require_valid_space(diagram, space)
    zstar = (diagram.ancestors({reward, space.action}, inclusive=True)
             & space.inputs) - {reward}
    if not test_pi_backdoor(diagram, space, reward, zstar):
        return None
    if minimal:
        kept = set(zstar)
        for z in sorted(zstar):
            if test_pi_backdoor(diagram, space, reward, kept - {z}):
                kept.discard(z)
        zstar = frozenset(kept)
    return frozenset(zstar)


def is_surrogate(diagram: CausalDiagram, space: PolicySpace, reward: str,
                 surrogate: Iterable[str]) -> bool:
    """Does ``surrogate`` screen the reward off from the decision node in
    the policy-augmented diagram?

    A set containing the (observed) reward itself trivially qualifies: it
    mediates everything, including the reward.
    """
    s = frozenset(surrogate)
    unknown = {n for n in s | {reward} if not diagram.has_node(n)}
    if unknown:
        raise ValueError(f"unknown nodes {sorted(unknown)}")
    if not s <= diagram.observed:
        raise ValueError("surrogate sets must be observed")
    if reward in s:
        return True
    aug = augment_policy(diagram, space)
    return d_separated(aug, {hat_name(space.action)}, {reward}, s)


def is_instrument(diagram: CausalDiagram, space: PolicySpace, reward: str,
                  surrogate: Iterable[str], subspace: PolicySpace) -> bool:
    """True iff ``surrogate`` is a surrogate for the subspace and the
    surrogate's interventional distribution is identifiable over it."""
    if subspace.action != space.action or not subspace.inputs <= space.inputs:
        raise ValueError("subspace must share the action and restrict the inputs")
    s = frozenset(surrogate)
    if not is_surrogate(diagram, subspace, reward, s):
        return False
    return identify_policy(diagram, subspace, s) is not None
