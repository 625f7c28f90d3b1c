"""Exact discrete structural models with partial observability.

Every distribution in the project bottoms out here: joints are computed by
exhaustive enumeration over exogenous configurations, so fixtures double as
ground-truth oracles.  Mechanisms are stochastic tables (deterministic
functions are the 0/1 special case); bidirected edges in the diagram are
realized by shared exogenous variables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diagram import (
    CausalDiagram,
    PolicySpace,
    manipulated,
    mutilate,
    require_valid,
    require_valid_space,
)
from .errors import ParseError, TooLargeError

CONFIG_CAP = 10**7
ROW_TOL = 1e-12
MASS_TOL = 1e-9


def broadcast_to_vars(arr: np.ndarray, axes: Sequence[str], target: Sequence[str]) -> np.ndarray:
    """View of ``arr`` (one axis per name in ``axes``) aligned to the sorted
    variable list ``target``; missing variables become broadcast axes."""
    perm = sorted(range(len(axes)), key=lambda i: axes[i])
    arr = np.transpose(arr, perm)
    names = [axes[i] for i in perm]
    shape = []
    k = 0
    for t in target:
        if k < len(names) and names[k] == t:
            shape.append(arr.shape[k])
            k += 1
        else:
            shape.append(1)
    if k != len(names):
        raise ValueError(f"axes {names} not contained in target {list(target)}")
    return arr.reshape(shape)


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact probability table over a sorted tuple of discrete variables."""

    variables: tuple[str, ...]
    domains: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        if tuple(sorted(self.variables)) != self.variables:
            raise ValueError("variables must be sorted")
        if self.probs.shape != self.domains:
            raise ValueError("probability table shape does not match domains")
        if (self.probs < -ROW_TOL).any():
            raise ValueError("negative probability")
        mass = float(self.probs.sum())
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"table mass {mass} is not 1")
        self.probs.setflags(write=False)

    @staticmethod
    def create(variables: Iterable[str], domains: Mapping[str, int], probs: np.ndarray) -> "JointTable":
        vs = tuple(sorted(variables))
        return JointTable(vs, tuple(domains[v] for v in vs), np.ascontiguousarray(probs, dtype=float))

    def domain_of(self, var: str) -> int:
        return self.domains[self.variables.index(var)]

    def domain_map(self) -> dict[str, int]:
        return dict(zip(self.variables, self.domains))

    def marginal(self, keep: Iterable[str]) -> "JointTable":
        ks = frozenset(keep)
        unknown = ks - set(self.variables)
        if unknown:
            raise ValueError(f"unknown variables {sorted(unknown)}")
        drop = tuple(i for i, v in enumerate(self.variables) if v not in ks)
        vs = tuple(v for v in self.variables if v in ks)
        ds = tuple(d for v, d in zip(self.variables, self.domains) if v in ks)
        return JointTable(vs, ds, self.probs.sum(axis=drop) if drop else self.probs.copy())

    def prob(self, assignment: Mapping[str, int]) -> float:
        if set(assignment) != set(self.variables):
            return float(self.marginal(assignment).prob(assignment))
        idx = tuple(assignment[v] for v in self.variables)
        return float(self.probs[idx])

    def expectation(self, var: str) -> float:
        m = self.marginal([var])
        return float(np.dot(m.probs, np.arange(m.domains[0])))

    def l1(self, other: "JointTable") -> float:
        if self.variables != other.variables or self.domains != other.domains:
            raise ValueError("tables are over different variables")
        return float(np.abs(self.probs - other.probs).sum())


@dataclass(frozen=True, eq=False)
class Policy:
    """Conditional table pi(action | inputs) over discrete domains."""

    action: str
    inputs: tuple[str, ...]
    action_domain: int
    input_domains: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        if tuple(sorted(self.inputs)) != self.inputs:
            raise ValueError("inputs must be sorted")
        if self.probs.shape != self.input_domains + (self.action_domain,):
            raise ValueError("policy table shape mismatch")
        if (self.probs < -ROW_TOL).any():
            raise ValueError("negative policy probability")
        rows = self.probs.sum(axis=-1)
        if not np.allclose(rows, 1.0, atol=ROW_TOL):
            raise ValueError("policy rows must each sum to 1")
        self.probs.setflags(write=False)

    @staticmethod
    def create(
        action: str,
        action_domain: int,
        probs: np.ndarray,
        inputs: Iterable[str] = (),
        input_domains: Iterable[int] = (),
    ) -> "Policy":
        ins = tuple(inputs)
        doms = tuple(input_domains)
        order = sorted(range(len(ins)), key=lambda i: ins[i])
        arr = np.ascontiguousarray(probs, dtype=float)
        arr = np.transpose(arr, [*order, len(ins)])
        return Policy(action, tuple(ins[i] for i in order), action_domain,
                      tuple(doms[i] for i in order), arr)

    def space(self) -> PolicySpace:
        return PolicySpace.create(self.action, self.inputs)


def uniform_policy(action: str, action_domain: int,
                   inputs: Iterable[str] = (), input_domains: Iterable[int] = ()) -> Policy:
    ins = tuple(inputs)
    doms = tuple(input_domains)
    probs = np.full(doms + (action_domain,), 1.0 / action_domain)
    return Policy.create(action, action_domain, probs, ins, doms)


def point_mass_policy(action: str, action_domain: int, value: int) -> Policy:
    probs = np.zeros((action_domain,))
    probs[value] = 1.0
    return Policy.create(action, action_domain, probs)


def conditional_policy(observational: JointTable, action: str, inputs: Iterable[str]) -> Policy:
    """Behavior-cloning table P(action | inputs) read off an exact joint.

    Input configurations of probability zero get a uniform row; they are
    never reached under the same distribution.
    """
    ins = tuple(sorted(inputs))
    m = observational.marginal(ins + (action,))
    num = np.moveaxis(m.probs, m.variables.index(action), -1)
    den = num.sum(axis=-1, keepdims=True)
    k = observational.domain_of(action)
    safe = np.where(den > 0, den, 1.0)
    rows = np.where(den > 0, num / safe, 1.0 / k)
    doms = tuple(observational.domain_of(v) for v in ins)
    return Policy(action, ins, k, doms, np.ascontiguousarray(rows))


@dataclass(frozen=True, eq=False)
class Mechanism:
    """Stochastic table for one endogenous node.

    ``table`` has one axis per endogenous parent (sorted), then one axis per
    attached exogenous variable (sorted), then the node's own domain.
    """

    node: str
    parents: tuple[str, ...]
    exo: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        if tuple(sorted(self.parents)) != self.parents or tuple(sorted(self.exo)) != self.exo:
            raise ValueError("mechanism parents and exo names must be sorted")
        rows = self.table.sum(axis=-1)
        if (self.table < -ROW_TOL).any() or not np.allclose(rows, 1.0, atol=ROW_TOL):
            raise ValueError(f"mechanism rows for {self.node} must be distributions")
        self.table.setflags(write=False)


def _constant_mechanism(node: str, domain: int, value: int) -> Mechanism:
    table = np.zeros((domain,))
    table[value] = 1.0
    return Mechanism(node, (), (), table)


@dataclass(frozen=True, eq=False)
class DiscreteSCM:
    """Diagram + exogenous distributions + per-node stochastic tables."""

    diagram: CausalDiagram
    domains: tuple[tuple[str, int], ...]
    exogenous: tuple[tuple[str, np.ndarray], ...]
    mechanisms: tuple[Mechanism, ...]

    @staticmethod
    def create(
        diagram: CausalDiagram,
        domains: Mapping[str, int],
        exogenous: Mapping[str, Sequence[float]],
        mechanisms: Iterable[Mechanism],
    ) -> "DiscreteSCM":
        require_valid(diagram)
        mechs = tuple(sorted(mechanisms, key=lambda m: m.node))
        exo = tuple((name, np.ascontiguousarray(p, dtype=float)) for name, p in sorted(exogenous.items()))
        doms = tuple(sorted(domains.items()))
        scm = DiscreteSCM(diagram, doms, exo, mechs)
        scm._validate()
        return scm

    def _validate(self):
        dom = dict(self.domains)
        exo_dom = {}
        for name, probs in self.exogenous:
            if (probs < -ROW_TOL).any() or abs(float(probs.sum()) - 1.0) > ROW_TOL:
                raise ValueError(f"exogenous {name} is not a distribution")
            if name in dom:
                raise ValueError(f"exogenous {name} clashes with an endogenous node")
            exo_dom[name] = len(probs)
        by_node = {m.node: m for m in self.mechanisms}
        if set(by_node) != set(self.diagram.nodes):
            raise ValueError("mechanisms must cover exactly the diagram nodes")
        attached: dict[str, list[str]] = {name: [] for name in exo_dom}
        for node in self.diagram.nodes:
            if dom.get(node, 0) < 2:
                raise ValueError(f"node {node} needs a domain of size >= 2")
            m = by_node[node]
            if m.parents != tuple(sorted(self.diagram.parents(node))):
                raise ValueError(f"mechanism for {node} does not match the diagram parents")
            for u in m.exo:
                if u not in exo_dom:
                    raise ValueError(f"mechanism for {node} references unknown exogenous {u}")
                attached[u].append(node)
            shape = tuple(dom[p] for p in m.parents) + tuple(exo_dom[u] for u in m.exo) + (dom[node],)
            if m.table.shape != shape:
                raise ValueError(f"mechanism table for {node} has shape {m.table.shape}, expected {shape}")
        # shared exogenous parents must be licensed by declared bidirected edges
        for name, nodes in attached.items():
            for i, a in enumerate(nodes):
                for b in nodes[i + 1:]:
                    pair = (a, b) if a <= b else (b, a)
                    if pair not in self.diagram.bidirected:
                        raise ValueError(
                            f"exogenous {name} confounds {a} and {b} but the diagram "
                            f"declares no bidirected edge between them"
                        )

    def domain_of(self, node: str) -> int:
        return dict(self.domains)[node]

    def mechanism(self, node: str) -> Mechanism:
        for m in self.mechanisms:
            if m.node == node:
                return m
        raise KeyError(node)

    def equals(self, other: "DiscreteSCM") -> bool:
        if self.diagram != other.diagram or self.domains != other.domains:
            return False
        if len(self.exogenous) != len(other.exogenous) or len(self.mechanisms) != len(other.mechanisms):
            return False
        for (na, pa), (nb, pb) in zip(self.exogenous, other.exogenous):
            if na != nb or not np.array_equal(pa, pb):
                return False
        for ma, mb in zip(self.mechanisms, other.mechanisms):
            if (ma.node, ma.parents, ma.exo) != (mb.node, mb.parents, mb.exo):
                return False
            if not np.array_equal(ma.table, mb.table):
                return False
        return True


def joint(scm: DiscreteSCM) -> JointTable:
    """Exact joint over all endogenous nodes by exogenous enumeration."""
    dom = dict(scm.domains)
    endo_vars = tuple(sorted(scm.diagram.nodes))
    endo_count = math.prod(dom[v] for v in endo_vars)
    exo_dims = tuple(len(p) for _, p in scm.exogenous)
    exo_names = tuple(name for name, _ in scm.exogenous)
    if endo_count * max(1, math.prod(exo_dims)) > CONFIG_CAP:
        raise TooLargeError("joint enumeration exceeds the configuration cap")
    shape = tuple(dom[v] for v in endo_vars)
    total = np.zeros(shape)
    mechs = {m.node: m for m in scm.mechanisms}
    for exo_config in np.ndindex(*exo_dims) if exo_dims else [()]:
        weight = 1.0
        for (name, probs), value in zip(scm.exogenous, exo_config):
            weight *= float(probs[value])
        if weight == 0.0:
            continue
        acc = np.full(shape, weight)
        exo_value = dict(zip(exo_names, exo_config))
        for node in endo_vars:
            m = mechs[node]
            sl = m.table[(slice(None),) * len(m.parents) + tuple(exo_value[u] for u in m.exo)]
            acc = acc * broadcast_to_vars(sl, m.parents + (node,), endo_vars)
        total += acc
    return JointTable(endo_vars, shape, total)


def observational(scm: DiscreteSCM) -> JointTable:
    """Marginal of the exact joint onto the observed nodes."""
    return joint(scm).marginal(scm.diagram.observed)


def intervene(scm: DiscreteSCM, do: Mapping[str, int] | Policy) -> DiscreteSCM:
    """Submodel under an atomic assignment or a policy intervention."""
    dom = dict(scm.domains)
    if isinstance(do, Policy):
        space = do.space()
        require_valid_space(scm.diagram, space)
        if do.action_domain != dom[do.action]:
            raise ValueError("policy action domain does not match the model")
        for z, k in zip(do.inputs, do.input_domains):
            if dom[z] != k:
                raise ValueError(f"policy input domain for {z} does not match the model")
        new_diagram = manipulated(scm.diagram, space)
        new_mech = Mechanism(do.action, do.inputs, (), np.array(do.probs))
        mechs = tuple(new_mech if m.node == do.action else m for m in scm.mechanisms)
        return DiscreteSCM(new_diagram, scm.domains, scm.exogenous, mechs)
    for node, value in do.items():
        if node not in dom:
            raise ValueError(f"unknown node {node!r}")
        if not (0 <= value < dom[node]):
            raise ValueError(f"value {value} outside the domain of {node}")
    new_diagram = mutilate(scm.diagram, cut_incoming=do.keys())
    mechs = tuple(
        _constant_mechanism(m.node, dom[m.node], do[m.node]) if m.node in do else m
        for m in scm.mechanisms
    )
    return DiscreteSCM(new_diagram, scm.domains, scm.exogenous, mechs)


@dataclass(frozen=True, eq=False)
class Dataset:
    variables: tuple[str, ...]
    rows: np.ndarray


def sample(scm: DiscreteSCM, n: int, seed: int = 0) -> Dataset:
    """n i.i.d. rows over the observed nodes; deterministic given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    obs = observational(scm)
    rng = np.random.default_rng(seed)
    flat = obs.probs.reshape(-1)
    picks = rng.choice(flat.size, size=n, p=flat)
    rows = np.stack(np.unravel_index(picks, obs.domains), axis=1)
    return Dataset(obs.variables, rows)


def empirical_table(ds: Dataset, domains: Mapping[str, int]) -> JointTable:
    shape = tuple(domains[v] for v in ds.variables)
    counts = np.zeros(shape)
    np.add.at(counts, tuple(ds.rows[:, i] for i in range(ds.rows.shape[1])), 1.0)
    return JointTable(ds.variables, shape, counts / len(ds.rows))


def empirical_observational(scm: DiscreteSCM, n: int, seed) -> JointTable:
    """Empirical joint of n i.i.d. observed rows, drawn as multinomial counts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    obs = observational(scm)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, obs.probs.reshape(-1)).reshape(obs.domains)
    return JointTable(obs.variables, obs.domains, counts / n)


# ---------------------------------------------------------------------------
# Random model generators


def _frontdoor_diagram() -> CausalDiagram:
    return CausalDiagram.create(
        observed=["X", "W", "S"],
        latent=["Y"],
        directed=[("X", "W"), ("W", "S"), ("S", "Y")],
        bidirected=[("X", "S")],
    )


def random_frontdoor(seed) -> DiscreteSCM:
    """Random binary instance of the mediator chain with an action/endpoint
    confounder: P(x), P(w|x), P(s|x,w), P(y|s) each drawn uniformly.

    The confounder is realized by a shared exogenous variable carrying the
    action's value, so the observational joint factorizes exactly as drawn.
    """
    rng = np.random.default_rng(seed)
    p_x = float(rng.uniform())
    p_w = rng.uniform(size=2)        # P(W=1 | X=x)
    p_s = rng.uniform(size=(2, 2))   # P(S=1 | X=x, W=w)
    p_y = rng.uniform(size=2)        # P(Y=1 | S=s)
    diagram = _frontdoor_diagram()

    def bern(p):
        return np.stack([1.0 - p, p], axis=-1)

    mechs = [
        # X copies the shared exogenous U so that P(U=1) = P(X=1)
        Mechanism("X", (), ("U",), np.array([[1.0, 0.0], [0.0, 1.0]])),
        Mechanism("W", ("X",), (), bern(p_w)),
        # S reads W and the confounder U (= the action value)
        Mechanism("S", ("W",), ("U",), bern(p_s.T)),
        Mechanism("Y", ("S",), (), bern(p_y)),
    ]
    return DiscreteSCM.create(
        diagram,
        domains={"X": 2, "W": 2, "S": 2, "Y": 2},
        exogenous={"U": [1.0 - p_x, p_x]},
        mechanisms=mechs,
    )


def random_scm(diagram: CausalDiagram, seed, domains: int | Mapping[str, int] = 2) -> DiscreteSCM:
    """Random stochastic model for a diagram: one binary exogenous variable
    per bidirected edge, plus uniformly drawn mechanism rows."""
    require_valid(diagram)
    rng = np.random.default_rng(seed)
    dom = {n: domains for n in diagram.nodes} if isinstance(domains, int) else dict(domains)
    exo: dict[str, np.ndarray] = {}
    attached: dict[str, list[str]] = {n: [] for n in diagram.nodes}
    for i, (a, b) in enumerate(sorted(diagram.bidirected)):
        name = f"U{i}"
        p = float(rng.uniform())
        exo[name] = np.array([1.0 - p, p])
        attached[a].append(name)
        attached[b].append(name)
    mechs = []
    for node in diagram.nodes:
        parents = tuple(sorted(diagram.parents(node)))
        exo_names = tuple(sorted(attached[node]))
        shape = tuple(dom[p] for p in parents) + tuple(2 for _ in exo_names) + (dom[node],)
        raw = rng.uniform(size=shape) + 1e-9
        mechs.append(Mechanism(node, parents, exo_names, raw / raw.sum(axis=-1, keepdims=True)))
    return DiscreteSCM.create(diagram, dom, exo, mechs)


# ---------------------------------------------------------------------------
# Text format

def format_scm(scm: DiscreteSCM, graph_filename: str) -> str:
    lines = [f"graph {graph_filename}"]
    for node, k in scm.domains:
        lines.append(f"domain {node} {k}")
    for name, probs in scm.exogenous:
        lines.append("exo " + name + "".join(f" {repr(float(p))}" for p in probs))
    for m in scm.mechanisms:
        lines.append(
            "mech " + m.node
            + " given" + "".join(" " + p for p in m.parents)
            + " exo" + "".join(" " + u for u in m.exo)
        )
        rows = m.table.reshape(-1, m.table.shape[-1])
        for row in rows:
            lines.append("  " + " ".join(repr(float(p)) for p in row))
    return "\n".join(lines) + "\n"


def parse_scm_text(text: str, diagram: CausalDiagram) -> DiscreteSCM:
    """Parse the fixture format given its diagram (the ``graph`` header is
    resolved by the file-level loader)."""
    domains: dict[str, int] = {}
    exogenous: dict[str, list[float]] = {}
    mechanisms: list[Mechanism] = []
    pending: tuple[int, str, tuple[str, ...], tuple[str, ...], list[list[float]], int] | None = None

    def flush():
        nonlocal pending
        if pending is None:
            return
        lineno, node, parents, exo, rows, needed = pending
        if len(rows) != needed:
            raise ParseError(f"mechanism for {node} expects {needed} rows, got {len(rows)}", lineno)
        dom_sizes = tuple(domains[p] for p in parents) + tuple(len(exogenous[u]) for u in exo)
        table = np.array(rows, dtype=float).reshape(dom_sizes + (domains[node],))
        mechanisms.append(Mechanism(node, parents, exo, table))
        pending = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        tokens = line.split()
        if line[0] in " \t":
            if pending is None:
                raise ParseError("distribution row outside a mech block", lineno)
            try:
                pending[4].append([float(t) for t in tokens])
            except ValueError:
                raise ParseError("malformed probability row", lineno) from None
            continue
        flush()
        kind = tokens[0]
        if kind == "graph":
            continue
        if kind == "domain":
            if len(tokens) != 3:
                raise ParseError("expected 'domain <node> <k>'", lineno)
            if tokens[1] in domains:
                raise ParseError(f"duplicate domain for {tokens[1]}", lineno)
            domains[tokens[1]] = int(tokens[2])
        elif kind == "exo":
            if len(tokens) < 3:
                raise ParseError("expected 'exo <name> <p...>'", lineno)
            if tokens[1] in exogenous:
                raise ParseError(f"duplicate exogenous {tokens[1]}", lineno)
            exogenous[tokens[1]] = [float(t) for t in tokens[2:]]
        elif kind == "mech":
            if "given" not in tokens or "exo" not in tokens:
                raise ParseError("expected 'mech <node> given <parents...> exo <names...>'", lineno)
            gi, ei = tokens.index("given"), tokens.index("exo")
            node = tokens[1]
            parents = tuple(tokens[gi + 1:ei])
            exo = tuple(tokens[ei + 1:])
            for p in parents:
                if p not in domains:
                    raise ParseError(f"parent {p} has no domain declaration", lineno)
            for u in exo:
                if u not in exogenous:
                    raise ParseError(f"exogenous {u} is not declared", lineno)
            if node not in domains:
                raise ParseError(f"node {node} has no domain declaration", lineno)
            needed = math.prod(
                [domains[p] for p in parents] + [len(exogenous[u]) for u in exo]
            )
            pending = (lineno, node, parents, exo, [], needed)
        else:
            raise ParseError(f"unknown declaration {kind!r}", lineno)
    flush()
    return DiscreteSCM.create(diagram, domains, exogenous, mechanisms)


def parse_scm_file(path) -> DiscreteSCM:
    """Load an SCM fixture file, resolving its ``graph`` header next to it."""
    from pathlib import Path

    from .diagram import parse_diagram_text

    p = Path(path)
    text = p.read_text()
    graph_file = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("graph "):
            graph_file = line.split(None, 1)[1]
            break
        if line:
            raise ParseError("fixture must start with a 'graph <file>' header", lineno)
    if graph_file is None:
        raise ParseError("missing 'graph <file>' header")
    diagram, _space = parse_diagram_text((p.parent / graph_file).read_text())
    return parse_scm_text(text, diagram)
