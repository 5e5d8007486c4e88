import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import brute_d_separated, random_cgm
from cloudcausal.errors import CycleError, ValidationError
from cloudcausal.graphs import G1, G2, Dag
from cloudcausal.models import joint
from cloudcausal.transport import conditional_independence_gap


def test_construction_checks():
    with pytest.raises(CycleError):
        Dag("abc", [("a", "b"), ("b", "c"), ("c", "a")])
    with pytest.raises(ValidationError):
        Dag("ab", [("a", "z")])
    with pytest.raises(ValidationError):
        Dag("ab", [("a", "a")])


def test_order_is_lexicographic_kahn():
    g = Dag("dcba", [("d", "a"), ("c", "a")])
    assert g.order == ("b", "c", "d", "a")


def test_parents():
    assert G1.parents("L") == {"R", "S"}
    assert G1.parents("H") == set()
    assert G2.parents("Z") == {"Y_1", "Y_2", "X_0"}
    with pytest.raises(ValidationError):
        G1.parents("Q")


def test_ancestors():
    assert G1.ancestors({"L"}) == {"H", "R", "S", "L"}
    assert G1.ancestors({"H"}) == {"H"}
    assert G2.ancestors({"Z"}) == set(G2.nodes)
    assert len(G2.nodes) == 12


class TestDSeparation:
    def test_fork(self):
        assert G1.d_separated({"R"}, {"S"}, {"H"})

    def test_collider_opened(self):
        assert not G1.d_separated({"R"}, {"S"}, {"H", "L"})

    def test_transport_precondition_on_g2(self):
        assert G2.d_separated({"Z"}, {"C"}, {"X_0", "X_1", "X_2"})
        assert not G2.d_separated({"Z"}, {"C"}, set())

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            G1.d_separated({"R"}, {"R"}, set())
        with pytest.raises(ValidationError):
            G1.d_separated({"R"}, {"S"}, {"R"})

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        g = random_cgm(rng, 6).dag
        nodes = sorted(g.nodes)
        a, b, *rest = rng.permutation(nodes)
        z = {n for n in rest if rng.random() < 0.4}
        assert g.d_separated({a}, {b}, z) == g.d_separated({b}, {a}, z)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_implies_independence_in_every_model(self, seed):
        rng = np.random.default_rng(seed)
        m = random_cgm(rng, 5)
        nodes = list(rng.permutation(sorted(m.dag.nodes)))
        a, b, rest = nodes[0], nodes[1], nodes[2:]
        z = [n for n in rest if rng.random() < 0.5]
        if m.dag.d_separated({a}, {b}, set(z)):
            assert conditional_independence_gap(joint(m), (a,), (b,), z) <= 1e-9


def test_matches_path_enumeration_on_four_node_dags_with_sets():
    # every labeled DAG on 4 nodes, including set-valued A and B
    nodes = "abcd"
    pairs = [(u, v) for u in nodes for v in nodes if u != v]
    checked = 0
    for mask in range(1 << len(pairs)):
        edges = [p for k, p in enumerate(pairs) if mask >> k & 1]
        if any((v, u) in edges for u, v in edges):
            continue
        try:
            g = Dag(nodes, edges)
        except CycleError:
            continue
        for a, b in [("a", "b"), ("a", "c"), ("c", "d")]:
            rest = [n for n in nodes if n not in (a, b)]
            for r in range(len(rest) + 1):
                for z in itertools.combinations(rest, r):
                    assert g.d_separated({a}, {b}, set(z)) == brute_d_separated(nodes, edges, a, b, set(z))
        ab = g.d_separated({"a", "b"}, {"d"}, {"c"})
        assert ab == (brute_d_separated(nodes, edges, "a", "d", {"c"})
                      and brute_d_separated(nodes, edges, "b", "d", {"c"}))
        checked += 1
    assert checked == 543  # number of labeled DAGs on 4 nodes


class TestBackdoor:
    def test_admissibility(self):
        assert G1.backdoor_admissible("S", "L", {"R"})
        assert G1.backdoor_admissible("S", "L", {"H"})
        assert not G1.backdoor_admissible("S", "L", set())

    def test_descendant_not_allowed(self):
        g = Dag("xyzm", [("x", "m"), ("m", "y")])
        assert not g.backdoor_admissible("x", "y", {"m"})

    def test_find(self):
        assert G1.find_backdoor_set("S", "L", {"R"}) == {"R"}
        assert G1.find_backdoor_set("S", "L", set()) is None
        assert G1.find_backdoor_set("S", "L", {"R", "H"}) == {"H"}

    def test_no_backdoor_paths(self):
        g = Dag("xy", [("x", "y")])
        assert g.find_backdoor_set("x", "y", set()) == frozenset()
