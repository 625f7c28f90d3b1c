"""Independent brute-force oracles the implementation is checked against.

Nothing here shares code with the production algorithms: separation is
decided by enumerating paths, policy effects by direct summation over every
configuration, and enumerators by filtering all subsets.
"""
from __future__ import annotations

from itertools import chain, combinations

import numpy as np

from causal_imitation.diagram import CausalDiagram, PolicySpace, d_separated
from causal_imitation.identify import identify_policy
from causal_imitation.scm import DiscreteSCM, JointTable, Policy


def subsets(items):
    items = sorted(items)
    return chain.from_iterable(combinations(items, k) for k in range(len(items) + 1))


def d_separated_paths(diagram: CausalDiagram, a_set, b_set, c_set) -> bool:
    """Path-enumeration d-separation: search for one active path."""
    a_set, b_set, c_set = frozenset(a_set), frozenset(b_set), frozenset(c_set)
    anc_c = diagram.ancestors(c_set, inclusive=True)
    adj: dict[str, list[tuple[str, bool, bool]]] = {n: [] for n in diagram.nodes}
    for u, v in diagram.directed:
        adj[u].append((v, False, True))   # leaving u at the tail, head at v
        adj[v].append((u, True, False))
    for u, v in diagram.bidirected:
        adj[u].append((v, True, True))
        adj[v].append((u, True, True))

    def active_from(node, in_head, visited) -> bool:
        for nxt, out_head, head_at_next in adj[node]:
            if nxt in visited:
                continue
            if in_head is not None:  # `node` is an interior vertex of the path
                if in_head and out_head:
                    if node not in anc_c:  # collider outside An(C) blocks
                        continue
                elif node in c_set:  # conditioned non-collider blocks
                    continue
            if nxt in b_set:
                return True
            if active_from(nxt, head_at_next, visited | {nxt}):
                return True
        return False

    return not any(active_from(a, None, frozenset({a})) for a in sorted(a_set))


def brute_min_separators(diagram, a, b, restrict) -> list[frozenset]:
    candidates = frozenset(restrict) - {a, b}
    seps = [frozenset(s) for s in subsets(candidates)
            if d_separated(diagram, {a}, {b}, s)]
    minimal = [s for s in seps if not any(t < s for t in seps)]
    return sorted(minimal, key=lambda s: tuple(sorted(s)))


def brute_id_subspaces(diagram, space: PolicySpace, outcome) -> list[frozenset]:
    out = []
    for s in subsets(space.inputs):
        if identify_policy(diagram, PolicySpace(space.action, frozenset(s)), outcome) is not None:
            out.append(frozenset(s))
    return sorted(out, key=lambda s: tuple(sorted(s)))


def policy_joint_enumeration(scm: DiscreteSCM, policy: Policy) -> JointTable:
    """P(v | do(pi)) summed configuration by configuration: the exogenous
    prior times every non-action mechanism times the policy row."""
    dom = dict(scm.domains)
    variables = tuple(sorted(dom))
    shape = tuple(dom[v] for v in variables)
    exo_names = [name for name, _ in scm.exogenous]
    exo_probs = {name: p for name, p in scm.exogenous}
    exo_dims = tuple(len(exo_probs[u]) for u in exo_names)
    mechs = {m.node: m for m in scm.mechanisms}
    out = np.zeros(shape)
    for u_conf in np.ndindex(*exo_dims) if exo_dims else [()]:
        u_val = dict(zip(exo_names, u_conf))
        pu = 1.0
        for name in exo_names:
            pu *= float(exo_probs[name][u_val[name]])
        for v_conf in np.ndindex(*shape):
            v_val = dict(zip(variables, v_conf))
            p = pu
            for node in variables:
                if node == policy.action:
                    idx = tuple(v_val[z] for z in policy.inputs) + (v_val[node],)
                    p *= float(policy.probs[idx])
                else:
                    m = mechs[node]
                    idx = tuple(v_val[q] for q in m.parents) + tuple(u_val[u] for u in m.exo) \
                        + (v_val[node],)
                    p *= float(m.table[idx])
                if p == 0.0:
                    break
            out[v_conf] += p
    return JointTable(variables, shape, out)


def conditionally_independent(table: JointTable, a_set, b_set, c_set, tol=1e-9) -> bool:
    """P(a,b|c) = P(a|c) P(b|c) wherever P(c) > 0, checked without division:
    P(a,b,c) P(c) = P(a,c) P(b,c)."""
    a_set, b_set, c_set = sorted(a_set), sorted(b_set), sorted(c_set)
    abc = table.marginal(a_set + b_set + c_set)
    ac = table.marginal(a_set + c_set)
    bc = table.marginal(b_set + c_set)
    c = table.marginal(c_set)
    names = abc.variables
    for conf in np.ndindex(*abc.domains):
        val = dict(zip(names, conf))
        lhs = abc.probs[conf] * c.prob({k: val[k] for k in c_set})
        rhs = ac.prob({k: val[k] for k in a_set + c_set}) * bc.prob({k: val[k] for k in b_set + c_set})
        if abs(lhs - rhs) > tol:
            return False
    return True


def random_diagram(rng: np.random.Generator, n_nodes: int, p_dir=0.35, p_bi=0.2,
                   latent_fraction=0.0) -> CausalDiagram:
    names = [chr(ord("A") + i) for i in range(n_nodes)]
    order = list(names)
    rng.shuffle(order)
    directed = []
    bidirected = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.uniform() < p_dir:
                directed.append((order[i], order[j]))
            if rng.uniform() < p_bi:
                bidirected.append((order[i], order[j]))
    latent = {n for n in names if rng.uniform() < latent_fraction}
    return CausalDiagram.create(
        observed=[n for n in names if n not in latent],
        latent=latent, directed=directed, bidirected=bidirected,
    )
