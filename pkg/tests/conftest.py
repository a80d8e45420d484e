import numpy as np
import pytest
from hypothesis import strategies as st

from esep import catalog
from esep.graph import Dag
from esep.oracle import random_dag


@pytest.fixture
def iv():
    return catalog.named_graph("iv")


@pytest.fixture
def uc():
    return catalog.named_graph("uc")


@pytest.fixture
def gadget():
    return catalog.named_graph("gadget")


@st.composite
def dags(draw, max_observed=6, max_latent=2):
    """Random DAGs with observed V0.. and latent roots L0.."""
    n = draw(st.integers(1, max_observed))
    k = draw(st.integers(0, max_latent))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.sampled_from([0.2, 0.4, 0.6]))
    return random_dag(np.random.default_rng(seed), n, k, p)


@st.composite
def dags_with_query(draw, max_observed=6, max_latent=2, with_d=False):
    """A DAG with disjoint observed sets A, B, C (and D when asked)."""
    g = draw(dags(max_observed, max_latent).filter(lambda g: len(g.observed) >= 2))
    obs = g.observed
    labels = draw(st.lists(st.sampled_from(("ABCD" if with_d else "ABC") + "-"),
                           min_size=len(obs), max_size=len(obs)))
    a = [v for v, lab in zip(obs[:-1], labels) if lab == "A"] or [obs[0]]
    b = [v for v, lab in zip(obs, labels) if lab == "B" and v not in a] or \
        [v for v in obs if v not in a][:1]
    rest = [(v, lab) for v, lab in zip(obs, labels) if v not in a and v not in b]
    c = [v for v, lab in rest if lab == "C"]
    d = [v for v, lab in rest if lab == "D"]
    return g, a, b, c, d


def chain(states=None) -> Dag:
    return Dag(["Z", "X", "Y"], [("Z", "X"), ("X", "Y")], states=states)
