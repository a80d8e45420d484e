import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esep import catalog
from esep.graph import Dag
from esep.model import (Cpt, DiscreteModel, JointTable, ModelError, TableTooLarge,
                        ZeroConditioningEvent, condition, conditional_prob, fix_conditioning,
                        format_table, interventional_query, intervene, joint, marginalize,
                        model_from_tables, observed_margin, parse_table)
from esep.oracle import ModelGenSpec, random_dag, random_model

from conftest import chain


def enumerate_joint(m):
    """Joint table by looping over every full assignment."""
    vs = m.graph.vertices
    out = np.zeros([m.states[v] for v in vs])
    for idx in itertools.product(*(range(m.states[v]) for v in vs)):
        a = dict(zip(vs, idx))
        p = 1.0
        for v in vs:
            cpt = m.cpts[v]
            p *= cpt.table[tuple(a[q] for q in cpt.parents) + (a[v],)]
        out[idx] = p
    return out


def copy_chain():
    g = chain()
    eye = np.eye(2)
    return model_from_tables(g, {"Z": [0.5, 0.5], "X": eye, "Y": eye})


def iv_model(seed=0):
    return random_model(ModelGenSpec(catalog.named_graph("iv"), seed, latent_states=3))


class TestJoint:
    def test_uniform(self):
        g = Dag(["A", "B"], [("A", "B")])
        m = model_from_tables(g, {"A": [0.5, 0.5], "B": np.full((2, 2), 0.5)})
        assert np.allclose(joint(m).probs, 0.25)

    def test_deterministic_chain(self):
        t = joint(copy_chain())
        assert t.prob({"Z": 0, "X": 0, "Y": 0}) == 0.5
        assert t.prob({"Z": 1, "X": 1, "Y": 1}) == 0.5

    @pytest.mark.parametrize("name", ["iv", "uc", "gadget"])
    def test_matches_enumeration(self, name):
        m = random_model(ModelGenSpec(catalog.named_graph(name), 7, latent_states=3))
        assert np.allclose(joint(m).probs, enumerate_joint(m), atol=1e-14)

    def test_iv_margin_formula(self):
        m = iv_model(3)
        f = m.cpts
        t = observed_margin(m)
        assert abs(t.probs.sum() - 1.0) < 1e-12
        for z, x, y in itertools.product(range(2), repeat=3):
            direct = sum(f["U"].table[u] * f["Z"].table[z] * f["X"].table[z, u, x]
                         * f["Y"].table[x, u, y] for u in range(3))
            assert t.prob({"Z": z, "X": x, "Y": y}) == pytest.approx(direct, abs=1e-14)

    def test_cap(self):
        with pytest.raises(TableTooLarge):
            joint(iv_model(), cap=10)


class TestTableOps:
    def test_marginalize(self):
        t = JointTable(("A", "B"), np.full((2, 2), 0.25))
        assert marginalize(t, ["A", "B"]) == t
        assert marginalize(t, []).probs.sum() == pytest.approx(1.0)
        assert np.allclose(marginalize(t, ["A"]).probs, [0.5, 0.5])

    def test_condition_on_independent(self):
        pa, pb = np.array([0.3, 0.7]), np.array([0.6, 0.4])
        t = JointTable(("A", "B"), np.outer(pa, pb))
        assert np.allclose(condition(t, {"B": 1}).probs, pa)

    def test_condition_copy_chain(self):
        t = condition(joint(copy_chain()), {"Z": 1})
        assert t.variables == ("X", "Y")
        assert t.prob({"X": 1, "Y": 1}) == pytest.approx(1.0)

    def test_zero_event(self):
        with pytest.raises(ZeroConditioningEvent):
            condition(joint(copy_chain()), {"Z": 0, "X": 1})
        with pytest.raises(ZeroConditioningEvent):
            conditional_prob(joint(copy_chain()), {"Y": 0}, {"Z": 0, "X": 1})

    def test_invalid_tables(self):
        with pytest.raises(ModelError):
            JointTable(("A",), [0.5, 0.6])
        with pytest.raises(ModelError):
            JointTable(("A", "A"), np.full((2, 2), 0.25))
        with pytest.raises(ModelError):
            Cpt("A", (), [0.5, 0.4])


class TestInterventions:
    def test_empty_do(self):
        m = iv_model()
        assert intervene(m, {}) is m

    def test_intervened_is_point_mass(self):
        m = intervene(iv_model(), {"X": 1})
        assert m.graph.parents("X") == ()
        assert np.array_equal(m.cpts["X"].table, [0.0, 1.0])

    def test_iv_truncated_factorization(self):
        m = iv_model(5)
        f = m.cpts
        for x, y in itertools.product(range(2), repeat=2):
            truth = sum(f["U"].table[u] * f["Y"].table[x, u, y] for u in range(3))
            for z in range(2):
                got = interventional_query(m, {"Y": y}, {"Z": z, "X": x})
                assert got == pytest.approx(truth, abs=1e-14)

    def test_no_confounding_is_conditioning(self):
        g = chain()
        m = random_model(ModelGenSpec(g, 11))
        t = observed_margin(m)
        for x, y in itertools.product(range(2), repeat=2):
            assert interventional_query(m, {"Y": y}, {"X": x}) == \
                pytest.approx(conditional_prob(t, {"Y": y}, {"X": x}))

    @settings(max_examples=30)
    @given(st.integers(0, 10**6), st.sampled_from(["iv", "uc", "gadget"]))
    def test_normalized(self, seed, name):
        m = random_model(ModelGenSpec(catalog.named_graph(name), seed, latent_states=2))
        obs = m.graph.observed
        do = {obs[0]: 1}
        y = obs[-1]
        assert sum(interventional_query(m, {y: s}, do) for s in range(2)) == pytest.approx(1.0)


class TestFixConditioning:
    def test_empty(self):
        m = iv_model()
        assert fix_conditioning(m, {}) is m

    def test_iv_outcome_cpt(self):
        m = iv_model(2)
        ms = fix_conditioning(m, {"X": 0})
        assert ms.graph.parents("Y") == ("U",)
        assert np.array_equal(ms.cpts["Y"].table, m.cpts["Y"].table[0])
        assert ms.cpts["X"] == m.cpts["X"]

    @settings(max_examples=40)
    @given(st.integers(0, 10**6), st.integers(0, 3), st.integers(0, 1))
    def test_slice_agreement(self, seed, which, state):
        rng = np.random.default_rng(seed)
        g = random_dag(rng, 4, 0, 0.6)
        m = random_model(ModelGenSpec(g, seed))
        v = g.observed[which]
        full, full_star = enumerate_joint(m), enumerate_joint(fix_conditioning(m, {v: state}))
        idx = tuple(state if u == v else slice(None) for u in g.vertices)
        assert np.allclose(full[idx], full_star[idx], atol=1e-14)


class TestTableFiles:
    def test_roundtrip(self):
        t = observed_margin(iv_model(1))
        loaded = parse_table(format_table(t), catalog.named_graph("iv"))
        assert loaded.table.allclose(t, atol=1e-15)

    def test_missing_rows_are_zero_and_reorder(self):
        g = catalog.named_graph("iv")
        loaded = parse_table("Y X Z p\n0 0 0 0.5\n1 0 1 0.5\n", g)
        assert loaded.table.variables == g.observed
        assert loaded.table.prob({"Z": 1, "X": 0, "Y": 1}) == 0.5
        assert not loaded.renormalized

    def test_renormalizes_small_error(self):
        loaded = parse_table("A,p\n0,0.5\n1,0.5000001\n")
        assert loaded.renormalized
        assert loaded.table.probs.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("text", [
        "A,p\n0,0.5\n1,0.4\n",          # mass far from 1
        "A,B\n0,1\n",                    # no p column
        "A,p\n0,0.5\n0,0.5\n",          # duplicate row
        "A,p\n0,-0.5\n1,1.5\n",         # negative
        "A,p\n0,x\n",                    # malformed
        "",                              # empty
    ])
    def test_malformed(self, text):
        with pytest.raises(ModelError):
            parse_table(text)

    def test_graph_mismatch(self):
        with pytest.raises(ModelError):
            parse_table("A,p\n0,1\n", catalog.named_graph("iv"))

    def test_state_out_of_range(self):
        with pytest.raises(ModelError):
            parse_table("Z,X,Y,p\n2,0,0,1\n", catalog.named_graph("iv"))


def test_model_validation():
    g = chain()
    with pytest.raises(ModelError):
        DiscreteModel(g, {"Z": 2, "X": 2, "Y": 2},
                      {"Z": Cpt("Z", (), [0.5, 0.5]), "X": Cpt("X", (), [0.5, 0.5]),
                       "Y": Cpt("Y", ("X",), np.eye(2))})
