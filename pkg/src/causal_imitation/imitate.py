"""Instrument search orchestration and the linear policy solver.

``P(s | do(pi))`` from a conditional-plan identification formula is linear
in the policy table, so imitation reduces to a feasibility problem over a
product of simplices.  The solver minimizes the L1 residual by linear
programming and, among residual-optimal policies, returns the one closest
to the behavior-cloning conditional (a deterministic, behaviorally
plausible tie-break).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.optimize import linprog

from .criteria import direct_parents_imitable, find_pi_backdoor
from .diagram import CausalDiagram, PolicySpace, augment_policy, d_separated, hat_name
from .enumerators import list_id_subspaces, list_min_separators
from .identify import (
    IdFormula,
    PolicyFactor,
    Product,
    Quotient,
    Sum,
    _eval,
    free_variables,
    has_policy_factor,
    identify_policy,
)
from .scm import (
    DiscreteSCM,
    JointTable,
    Policy,
    broadcast_to_vars,
    conditional_policy,
    intervene,
    joint,
)

DEFAULT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Infeasible:
    """No policy meets the tolerance; carries the best achievable residual."""

    residual: float


@dataclass(frozen=True, eq=False)
class ImitationResult:
    status: str  # imitable-graphical | p-imitable | no-instrument-found | infeasible
    policy: Policy | None
    witness: object
    residual: float | None

    def report(self) -> str:
        lines = [f"status {self.status}"]
        if isinstance(self.witness, frozenset):
            lines.append("witness conditioning " + (" ".join(sorted(self.witness)) or "-"))
        elif isinstance(self.witness, tuple):
            surrogate, subspace = self.witness
            lines.append(
                "witness surrogate " + (" ".join(sorted(surrogate)) or "-")
                + " subspace_inputs " + (" ".join(sorted(subspace.inputs)) or "-")
            )
        if self.residual is not None:
            lines.append(f"residual {self.residual:.12g}")
        if self.policy is not None:
            p = self.policy
            lines.append("policy " + p.action + " given " + (" ".join(p.inputs) or "-"))
            rows = np.asarray(p.probs).reshape(-1, p.action_domain)
            for config, row in zip(np.ndindex(*p.input_domains) if p.inputs else [()], rows):
                prefix = " ".join(str(v) for v in config)
                lines.append("  " + (prefix + " | " if prefix else "") +
                             " ".join(f"{v:.12g}" for v in row))
        return "\n".join(lines) + "\n"


def _find_placeholder(formula: IdFormula) -> PolicyFactor | None:
    if isinstance(formula, PolicyFactor):
        return formula
    if isinstance(formula, Sum):
        return _find_placeholder(formula.body)
    if isinstance(formula, Product):
        for t in formula.terms:
            ph = _find_placeholder(t)
            if ph is not None:
                return ph
    if isinstance(formula, Quotient):
        return _find_placeholder(formula.num) or _find_placeholder(formula.den)
    return None


def _linear_system(formula: IdFormula, observational: JointTable,
                   surrogate: Iterable[str]):
    """Coefficients A[s, pa, x] and target t[s] of the affine system
    sum_{pa,x} A[s,pa,x] pi[pa,x] = t[s]."""
    ph = _find_placeholder(formula)
    if ph is None:
        raise ValueError("formula has no policy placeholder")
    svars = tuple(sorted(frozenset(surrogate)))
    if frozenset(free_variables(formula)) != frozenset(svars):
        raise ValueError("formula free variables do not match the surrogate set")
    domains = observational.domain_map()
    in_doms = tuple(domains[z] for z in ph.inputs)
    k = domains[ph.action]
    n_pa = math.prod(in_doms) if in_doms else 1
    n_s = math.prod(domains[v] for v in svars) if svars else 1
    target_names = tuple(sorted(ph.inputs + (ph.action,)))
    coeff = np.zeros((n_s, n_pa, k))
    for pa_i in range(n_pa):
        pa_config = np.unravel_index(pa_i, in_doms) if in_doms else ()
        for x in range(k):
            basis = np.zeros(in_doms + (k,))
            basis[tuple(pa_config) + (x,)] = 1.0
            axes = (target_names, broadcast_to_vars(basis, ph.inputs + (ph.action,), target_names))
            vs, arr = _eval(formula, observational, axes, domains)
            arr = np.broadcast_to(arr, tuple(domains[v] for v in vs))
            coeff[:, pa_i, x] = arr.reshape(-1)
    t = observational.marginal(svars).probs.reshape(-1)
    return coeff, t, ph, in_doms, k


def _lp_min_residual(a2: np.ndarray, t: np.ndarray, n_pa: int, k: int):
    n_pi, n_s = n_pa * k, len(t)
    c = np.concatenate([np.zeros(n_pi), np.ones(2 * n_s)])
    a_eq = np.zeros((n_s + n_pa, n_pi + 2 * n_s))
    a_eq[:n_s, :n_pi] = a2
    a_eq[:n_s, n_pi:n_pi + n_s] = -np.eye(n_s)
    a_eq[:n_s, n_pi + n_s:] = np.eye(n_s)
    for p in range(n_pa):
        a_eq[n_s + p, p * k:(p + 1) * k] = 1.0
    b_eq = np.concatenate([t, np.ones(n_pa)])
    bounds = [(0.0, 1.0)] * n_pi + [(0.0, None)] * (2 * n_s)
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"residual LP failed: {res.message}")
    return res.x[:n_pi], float(res.fun)


def _lp_closest(a2: np.ndarray, t: np.ndarray, n_pa: int, k: int,
                ref: np.ndarray, cap: float):
    """Among policies with L1 residual <= cap, minimize L1 distance to ref."""
    n_pi, n_s = n_pa * k, len(t)
    n = n_pi + 2 * n_s + 2 * n_pi
    c = np.concatenate([np.zeros(n_pi + 2 * n_s), np.ones(2 * n_pi)])
    a_eq = np.zeros((n_s + n_pa + n_pi, n))
    a_eq[:n_s, :n_pi] = a2
    a_eq[:n_s, n_pi:n_pi + n_s] = -np.eye(n_s)
    a_eq[:n_s, n_pi + n_s:n_pi + 2 * n_s] = np.eye(n_s)
    for p in range(n_pa):
        a_eq[n_s + p, p * k:(p + 1) * k] = 1.0
    off = n_s + n_pa
    a_eq[off:, :n_pi] = np.eye(n_pi)
    a_eq[off:, n_pi + 2 * n_s:n_pi + 2 * n_s + n_pi] = -np.eye(n_pi)
    a_eq[off:, n_pi + 2 * n_s + n_pi:] = np.eye(n_pi)
    b_eq = np.concatenate([t, np.ones(n_pa), ref])
    a_ub = np.zeros((1, n))
    a_ub[0, n_pi:n_pi + 2 * n_s] = 1.0
    bounds = [(0.0, 1.0)] * n_pi + [(0.0, None)] * (n - n_pi)
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, A_ub=a_ub, b_ub=[cap],
                  bounds=bounds, method="highs")
    if not res.success:
        return None
    return res.x[:n_pi]


def _as_policy(raw: np.ndarray, ph: PolicyFactor, in_doms: tuple[int, ...], k: int) -> Policy:
    table = np.clip(raw.reshape(in_doms + (k,)), 0.0, None)
    table = table / table.sum(axis=-1, keepdims=True)
    return Policy(ph.action, ph.inputs, k, in_doms, np.ascontiguousarray(table))


def solve_policy(
    formula: IdFormula,
    observational: JointTable,
    surrogate: Iterable[str],
    tolerance: float = DEFAULT_TOLERANCE,
) -> Policy | Infeasible:
    """Policy making the formula's surrogate distribution match the
    observed one within ``tolerance`` (L1), else ``Infeasible`` with the
    minimal achievable residual."""
    coeff, t, ph, in_doms, k = _linear_system(formula, observational, surrogate)
    n_s = len(t)
    n_pa = coeff.shape[1]
    a2 = coeff.reshape(n_s, n_pa * k)

    def exact_residual(policy: Policy) -> float:
        return float(np.abs(a2 @ np.asarray(policy.probs).reshape(-1) - t).sum())

    raw, objective = _lp_min_residual(a2, t, n_pa, k)
    best = _as_policy(raw, ph, in_doms, k)
    best_res = exact_residual(best)
    if best_res > tolerance:
        return Infeasible(best_res)
    ref = np.asarray(conditional_policy(observational, ph.action, ph.inputs).probs).reshape(-1)
    # an exactly feasible system gets a hard matching constraint so the
    # tie-break cannot smear a uniquely determined policy
    cap = 0.0 if best_res <= 1e-9 else max(objective, best_res) + 1e-10
    raw2 = _lp_closest(a2, t, n_pa, k, ref, cap)
    if raw2 is not None:
        cand = _as_policy(raw2, ph, in_doms, k)
        if exact_residual(cand) <= max(tolerance, best_res):
            return cand
    return best


def closest_imitating_policy(
    formula: IdFormula,
    observational: JointTable,
    surrogate: Iterable[str],
    reference: Policy,
    tolerance: float = 1e-9,
) -> tuple[Policy, float]:
    """Among exactly imitating policies, the one closest to ``reference``.

    Distance is total variation per input row, weighted by the observed
    input-configuration probabilities (rows the expert never visits carry
    no weight).  Raises if no policy meets ``tolerance``.
    """
    coeff, t, ph, in_doms, k = _linear_system(formula, observational, surrogate)
    n_s = len(t)
    n_pa = coeff.shape[1]
    n_pi = n_pa * k
    a2 = coeff.reshape(n_s, n_pi)
    if (reference.inputs, reference.action) != (ph.inputs, ph.action):
        raise ValueError("reference policy does not match the formula placeholder")
    if in_doms:
        w_rows = observational.marginal(ph.inputs).probs.reshape(-1)
    else:
        w_rows = np.ones(1)
    weights = np.repeat(w_rows, k) * 0.5
    ref = np.asarray(reference.probs).reshape(-1)
    n = n_pi + 2 * n_s + 2 * n_pi
    c = np.concatenate([np.zeros(n_pi + 2 * n_s), weights, weights])
    a_eq = np.zeros((n_s + n_pa + n_pi, n))
    a_eq[:n_s, :n_pi] = a2
    a_eq[:n_s, n_pi:n_pi + n_s] = -np.eye(n_s)
    a_eq[:n_s, n_pi + n_s:n_pi + 2 * n_s] = np.eye(n_s)
    for p in range(n_pa):
        a_eq[n_s + p, p * k:(p + 1) * k] = 1.0
    off = n_s + n_pa
    a_eq[off:, :n_pi] = np.eye(n_pi)
    a_eq[off:, n_pi + 2 * n_s:n_pi + 2 * n_s + n_pi] = -np.eye(n_pi)
    a_eq[off:, n_pi + 2 * n_s + n_pi:] = np.eye(n_pi)
    b_eq = np.concatenate([t, np.ones(n_pa), ref])
    a_ub = np.zeros((1, n))
    a_ub[0, n_pi:n_pi + 2 * n_s] = 1.0
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, A_ub=a_ub, b_ub=[tolerance],
                  bounds=[(0.0, 1.0)] * n_pi + [(0.0, None)] * (n - n_pi),
                  method="highs")
    if not res.success:
        raise ValueError("no policy imitates the surrogate distribution exactly")
    policy = _as_policy(res.x[:n_pi], ph, in_doms, k)
    dist = float(np.dot(weights, np.abs(np.asarray(policy.probs).reshape(-1) - ref)))
    return policy, dist


def verify_policy(scm: DiscreteSCM, policy: Policy, target: Iterable[str]) -> float:
    """L1 distance between the target's distribution under the policy and
    under the expert, computed exactly in the true model."""
    ts = tuple(sorted(frozenset(target)))
    base = joint(scm).marginal(ts)
    post = joint(intervene(scm, policy)).marginal(ts)
    return base.l1(post)


def graphical_verdict(diagram: CausalDiagram, space: PolicySpace,
                      reward: str) -> tuple[str, frozenset[str] | None]:
    """Decision of the complete graphical criterion: the returned witness is
    the conditioning set of the prescribed cloning policy."""
    pa = direct_parents_imitable(diagram, space)
    if pa is not None:
        return "imitable-graphical", pa
    z = find_pi_backdoor(diagram, space, reward)
    if z is not None:
        return "imitable-graphical", z
    return "not-imitable-graphical", None


def surrogate_candidates(diagram: CausalDiagram, subspace: PolicySpace,
                         reward: str) -> Iterator[frozenset[str]]:
    """Minimal surrogate sets for a subspace, in deterministic order.

    Candidates are drawn from the observed nodes other than the action; an
    observed reward is itself a (last-resort) minimal surrogate whenever the
    empty set fails.
    """
    aug = augment_policy(diagram, subspace)
    hat = hat_name(subspace.action)
    cands = diagram.observed - {subspace.action, reward}
    yield from list_min_separators(aug, hat, reward, cands)
    if reward in diagram.observed and not d_separated(aug, {hat}, {reward}, frozenset()):
        yield frozenset({reward})


def imitate_pipeline(
    diagram: CausalDiagram,
    space: PolicySpace,
    observational: JointTable,
    reward: str,
    tolerance: float = DEFAULT_TOLERANCE,
) -> ImitationResult:
    """Full decision procedure: graphical criteria first, then the
    instrument search with the linear solver."""
    pa = direct_parents_imitable(diagram, space)
    if pa is not None:
        policy = conditional_policy(observational, space.action, pa)
        return ImitationResult("imitable-graphical", policy, frozenset(pa), 0.0)
    z = find_pi_backdoor(diagram, space, reward)
    if z is not None:
        policy = conditional_policy(observational, space.action, z)
        return ImitationResult("imitable-graphical", policy, frozenset(z), 0.0)

    g_reward_obs = diagram.with_observed({reward})
    best_residual: float | None = None
    for subspace in list_id_subspaces(g_reward_obs, space, {reward}):
        for surrogate in surrogate_candidates(diagram, subspace, reward):
            formula = identify_policy(diagram, subspace, surrogate)
            if formula is None:
                continue
            if not has_policy_factor(formula):
                # the action cannot reach the surrogate: every policy works
                policy = conditional_policy(observational, space.action, subspace.inputs)
                return ImitationResult("p-imitable", policy, (surrogate, subspace), 0.0)
            outcome = solve_policy(formula, observational, surrogate, tolerance)
            if isinstance(outcome, Policy):
                coeff_residual = solve_residual(formula, observational, surrogate, outcome)
                return ImitationResult("p-imitable", outcome, (surrogate, subspace), coeff_residual)
            if best_residual is None or outcome.residual < best_residual:
                best_residual = outcome.residual
    if best_residual is None:
        return ImitationResult("no-instrument-found", None, None, None)
    return ImitationResult("infeasible", None, None, best_residual)


def solve_residual(formula: IdFormula, observational: JointTable,
                   surrogate: Iterable[str], policy: Policy) -> float:
    """L1 residual of a policy against the formula's matching constraint."""
    coeff, t, _ph, _in, k = _linear_system(formula, observational, surrogate)
    a2 = coeff.reshape(len(t), -1)
    return float(np.abs(a2 @ np.asarray(policy.probs).reshape(-1) - t).sum())
