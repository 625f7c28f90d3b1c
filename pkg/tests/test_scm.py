import numpy as np
import pytest

from causal_imitation import fixtures
from causal_imitation.diagram import CausalDiagram
from causal_imitation.errors import TooLargeError
from causal_imitation.scm import (
    DiscreteSCM,
    Mechanism,
    Policy,
    conditional_policy,
    empirical_table,
    format_scm,
    intervene,
    joint,
    observational,
    parse_scm_text,
    point_mass_policy,
    random_frontdoor,
    random_scm,
    sample,
    uniform_policy,
)

from oracles import policy_joint_enumeration


def test_intro_highway_expert_reward():
    m = fixtures.scm_fixture("highway_xor")
    assert abs(joint(m).expectation("Y") - 1.0) < 1e-12


def test_parity_trap_expert_reward():
    m = fixtures.scm_fixture("parity_trap")
    assert abs(joint(m).expectation("Y") - 1.0) < 1e-12


def test_mix_fixture_reward_and_action_marginals():
    j = joint(fixtures.scm_fixture("frontdoor_mix"))
    assert abs(j.expectation("Y") - 0.82) < 1e-12
    # P(X=1) = 0.9*0.1 + 0.1*0.9
    assert abs(j.expectation("X") - 0.18) < 1e-12


def test_observational_marginal_consistency():
    m = fixtures.scm_fixture("frontdoor_mix")
    obs = observational(m)
    assert obs.marginal(["X"]).l1(joint(m).marginal(["X"])) < 1e-12


def test_intro_highway_cloning_reward():
    m = fixtures.scm_fixture("highway_xor")
    pol = conditional_policy(observational(m), "X", ["Z"])
    assert abs(joint(intervene(m, pol)).expectation("Y") - 0.5) < 1e-12


def test_parity_trap_grid_of_policies():
    m = fixtures.scm_fixture("parity_trap")
    for alpha in np.linspace(0.0, 1.0, 21):
        pol = Policy.create("X", 2, np.array([1.0 - alpha, alpha]))
        assert abs(joint(intervene(m, pol)).expectation("Y") - 0.5) < 1e-12


def test_atomic_on_constant_mechanism_is_noop():
    m = fixtures.scm_fixture("frontdoor_mix")
    once = intervene(m, {"X": 1})
    twice = intervene(once, {"X": 1})
    assert joint(once).l1(joint(twice)) == 0.0


def test_policy_joint_matches_direct_enumeration():
    # two independent code paths for the intervened joint, on every fixture
    rng = np.random.default_rng(5)
    for name in fixtures.scm_names():
        m = fixtures.scm_fixture(name)
        pol = Policy.create("X", 2, rng.dirichlet([1, 1]))
        got = joint(intervene(m, pol))
        want = policy_joint_enumeration(m, pol)
        assert got.l1(want) < 1e-12, name


def test_d_separation_implies_independence_in_fixture_models():
    # graph-level separation is sound for the exact joints of the fixtures
    from causal_imitation.diagram import d_separated
    from oracles import conditionally_independent, subsets

    for name in fixtures.scm_names():
        m = fixtures.scm_fixture(name)
        table = joint(m)
        nodes = sorted(m.diagram.nodes)
        for a in nodes:
            for b in nodes:
                if b <= a:
                    continue
                for c in subsets(set(nodes) - {a, b}):
                    if d_separated(m.diagram, {a}, {b}, set(c)):
                        assert conditionally_independent(table, {a}, {b}, set(c)), \
                            (name, a, b, c)


def test_sample_deterministic_and_shape():
    m = fixtures.scm_fixture("frontdoor_mix")
    a = sample(m, 100, seed=3)
    b = sample(m, 100, seed=3)
    assert a.variables == b.variables == ("W", "X", "Y")
    assert np.array_equal(a.rows, b.rows)
    one = sample(m, 1, seed=0)
    assert one.rows.shape == (1, 3)


def test_sample_concentrates():
    m = fixtures.scm_fixture("frontdoor_mix")
    ds = sample(m, 100_000, seed=11)
    emp = empirical_table(ds, {v: 2 for v in ds.variables})
    assert emp.l1(observational(m)) < 0.01


def test_sample_rejects_nonpositive_n():
    with pytest.raises(ValueError):
        sample(fixtures.scm_fixture("frontdoor_mix"), 0)


def test_random_frontdoor_diagram_and_determinism():
    m = random_frontdoor(0)
    assert m.diagram == fixtures.diagram_fixture("frontdoor_latent").diagram
    assert m.equals(random_frontdoor(0))
    seen = set()
    for seed in range(100):
        obs = observational(random_frontdoor(seed))
        seen.add(tuple(np.round(obs.probs.reshape(-1), 12)))
    assert len(seen) == 100


def test_random_frontdoor_reproduces_factored_conditionals():
    # the generator's drawn conditionals are recoverable from the joint
    seed = 42
    m = random_frontdoor(seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    p_x = float(rng.uniform())
    p_w = rng.uniform(size=2)
    p_s = rng.uniform(size=(2, 2))
    p_y = rng.uniform(size=2)
    j = joint(m)
    assert abs(j.expectation("X") - p_x) < 1e-12
    xw = j.marginal(["W", "X"])
    for x in (0, 1):
        got = xw.prob({"X": x, "W": 1}) / xw.prob({"X": x})
        assert abs(got - p_w[x]) < 1e-12
    xws = j.marginal(["S", "W", "X"])
    for x in (0, 1):
        for w in (0, 1):
            got = xws.prob({"X": x, "W": w, "S": 1}) / xw.prob({"X": x, "W": w})
            assert abs(got - p_s[x, w]) < 1e-9
    sy = j.marginal(["S", "Y"])
    for s in (0, 1):
        got = sy.prob({"S": s, "Y": 1}) / sy.marginal(["S"]).prob({"S": s})
        assert abs(got - p_y[s]) < 1e-12


def test_random_scm_respects_diagram():
    case = fixtures.diagram_fixture("highway_sideinfo")
    m = random_scm(case.diagram, seed=9)
    assert m.diagram == case.diagram
    assert abs(float(joint(m).probs.sum()) - 1.0) < 1e-9


def test_joint_size_cap():
    d = CausalDiagram.create(observed=[f"N{i}" for i in range(9)])
    m = random_scm(d, seed=0, domains=8)
    with pytest.raises(TooLargeError):
        joint(m)


def test_undeclared_confounder_rejected():
    d = CausalDiagram.create(observed="AB")  # no bidirected edge declared
    mechs = [
        Mechanism("A", (), ("U",), np.array([[1.0, 0.0], [0.0, 1.0]])),
        Mechanism("B", (), ("U",), np.array([[1.0, 0.0], [0.0, 1.0]])),
    ]
    with pytest.raises(ValueError, match="bidirected"):
        DiscreteSCM.create(d, {"A": 2, "B": 2}, {"U": [0.5, 0.5]}, mechs)


def test_mechanism_parent_mismatch_rejected():
    d = CausalDiagram.create(observed="AB", directed=[("A", "B")])
    mechs = [
        Mechanism("A", (), (), np.array([0.5, 0.5])),
        Mechanism("B", (), (), np.array([0.5, 0.5])),  # should condition on A
    ]
    with pytest.raises(ValueError, match="parents"):
        DiscreteSCM.create(d, {"A": 2, "B": 2}, {}, mechs)


def test_policy_validation():
    with pytest.raises(ValueError):
        Policy.create("X", 2, np.array([0.7, 0.7]))
    pol = uniform_policy("X", 3)
    assert pol.probs.shape == (3,)
    pm = point_mass_policy("X", 2, 1)
    assert pm.probs[1] == 1.0


def test_scm_text_roundtrip():
    for name in fixtures.scm_names():
        m = fixtures.scm_fixture(name)
        text = format_scm(m, "g.graph")
        again = parse_scm_text(text, m.diagram)
        assert m.equals(again), name
        assert format_scm(again, "g.graph") == text, name


def test_intervene_rejects_bad_domain():
    m = fixtures.scm_fixture("frontdoor_mix")
    with pytest.raises(ValueError):
        intervene(m, {"X": 5})
    with pytest.raises(ValueError):
        intervene(m, Policy.create("X", 3, np.full(3, 1 / 3)))
