import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudcausal.core import (
    Bits,
    Certificate,
    Table,
    Variable,
    conditional_entropy,
    distribution_percentile,
    entropy,
    kl_divergence,
    mutual_information,
    percentile,
    product_table,
)
from cloudcausal.errors import AbsoluteContinuityError, NormalizationError, ValidationError

A, B, C = Variable.binary("A"), Variable.binary("B"), Variable.ranged("C", 3)


def bern(p, var=A):
    return Table((var,), [1 - p, p])


# frozen oracle: -sum p log2 p for Bernoulli(0.2)
H_BERN_02 = 0.7219280948873623


class TestVariable:
    def test_labels_must_be_unique(self):
        with pytest.raises(ValidationError):
            Variable("X", ("a", "a"))

    def test_index_accepts_labels_and_ints(self):
        v = Variable("X", ("lo", "hi"))
        assert v.index("hi") == 1
        assert v.index(0) == 0
        with pytest.raises(ValidationError):
            v.index("mid")


class TestTable:
    def test_rows_renormalized_within_tolerance(self):
        t = Table((A,), [0.5 + 4e-10, 0.5])
        assert abs(t.values.sum() - 1.0) < 1e-15

    def test_rejects_bad_rows(self):
        with pytest.raises(NormalizationError):
            Table((A,), [0.5, 0.48])
        with pytest.raises(ValidationError):
            Table((A,), [1.2, -0.2])

    def test_scope_and_given_disjoint(self):
        with pytest.raises(ValidationError):
            Table((A,), [[0.5, 0.5], [0.5, 0.5]], given=(A,))

    def test_immutable(self):
        t = bern(0.3)
        with pytest.raises(ValueError):
            t.values[0] = 1.0

    def test_from_rows_is_row_major_over_parents(self):
        rows = [[1, 0], [0, 1], [0.5, 0.5], [0.2, 0.8], [0.3, 0.7], [0.4, 0.6]]
        t = Table.from_rows(A, [B, C], rows)
        assert t.given_names == ("B", "C")
        assert t.values.shape == (2, 2, 3)
        assert t(A=1, B=1, C=0) == pytest.approx(0.8)
        assert t(A=0, B=0, C=2) == pytest.approx(0.5)

    def test_conditional_marginal_roundtrip(self):
        rng = np.random.default_rng(1)
        j = Table((A, B, C), rng.dirichlet(np.ones(12)).reshape(2, 2, 3))
        cond = j.conditional(("A",), ("B", "C"))
        back = product_table([cond, j.marginal(("B", "C"))]).reorder(("A", "B", "C"))
        assert back.allclose(j, atol=1e-12)

    def test_condition_on_zero_probability(self):
        j = Table((A, B), [[0.5, 0.5], [0.0, 0.0]])
        from cloudcausal.errors import ZeroProbabilityError

        with pytest.raises(ZeroProbabilityError):
            j.condition_on({"A": 1})


class TestEntropy:
    def test_fair_coin(self):
        assert entropy(bern(0.5)) == pytest.approx(1.0, abs=1e-12)

    def test_point_mass(self):
        assert entropy(Table.point_mass(C, 2)) == 0.0

    def test_bernoulli_02(self):
        assert entropy(bern(0.2)) == pytest.approx(H_BERN_02, abs=1e-12)
        assert round(float(entropy(bern(0.2))), 5) == 0.72193

    def test_is_bits_with_nats_accessor(self):
        h = entropy(bern(0.5))
        assert isinstance(h, Bits)
        assert h.nats == pytest.approx(math.log(2))

    def test_conditional_table_rejected(self):
        with pytest.raises(ValidationError):
            entropy(Table.from_rows(A, [B], [[0.5, 0.5], [0.1, 0.9]]))


class TestConditionalEntropy:
    def test_functional_dependence(self):
        j = Table((A, B), [[0.3, 0.0], [0.0, 0.7]])
        assert conditional_entropy(j, ("B",), ("A",)) == pytest.approx(0.0, abs=1e-12)

    def test_independence(self):
        j = product_table([bern(0.5, A), bern(0.3, B)])
        assert conditional_entropy(j, ("A",), ("B",)) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_rejected(self):
        j = product_table([bern(0.5, A), bern(0.3, B)])
        with pytest.raises(ValidationError):
            conditional_entropy(j, ("A",), ("A", "B"))


class TestKL:
    def test_identity(self):
        assert kl_divergence(bern(0.3), bern(0.3)) == 0.0

    def test_two_bernoullis(self):
        # frozen oracle: 0.41 log2(0.41/0.25) + 0.59 log2(0.59/0.75)
        assert kl_divergence(bern(0.41), bern(0.25)) == pytest.approx(0.08837165581669393, abs=1e-12)

    def test_point_mass_against_bernoulli(self):
        kl = kl_divergence(Table.point_mass(A, 0), bern(0.1))
        assert kl == pytest.approx(math.log2(1 / 0.9), abs=1e-12)
        assert round(float(kl), 5) == 0.15200

    def test_absolute_continuity(self):
        with pytest.raises(AbsoluteContinuityError):
            kl_divergence(bern(0.5), Table.point_mass(A, 0))

    def test_scope_must_match(self):
        with pytest.raises(ValidationError):
            kl_divergence(bern(0.5, A), bern(0.5, B))


class TestMutualInformation:
    def test_independent(self):
        j = product_table([bern(0.2, A), bern(0.7, B)])
        assert mutual_information(j, ("A",), ("B",)) == pytest.approx(0.0, abs=1e-12)

    def test_copy(self):
        j = Table((A, B), [[0.5, 0.0], [0.0, 0.5]])
        assert mutual_information(j, ("A",), ("B",)) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_rejected(self):
        j = Table((A, B), [[0.5, 0.0], [0.0, 0.5]])
        with pytest.raises(ValidationError):
            mutual_information(j, ("A",), ("A",))


class TestPercentile:
    def test_nearest_rank(self):
        assert percentile(list(range(1, 101)), 99) == 99
        assert percentile([10, 20, 30], 50) == 20
        assert percentile([30, 10, 20], 100) == 30

    @given(st.floats(allow_nan=False, allow_infinity=False), st.floats(0.01, 100))
    def test_single_sample(self, x, q):
        assert percentile([x], q) == x

    def test_errors(self):
        with pytest.raises(ValueError):
            percentile([], 50)
        with pytest.raises(ValueError):
            percentile([1, 2], 0)

    def test_distribution_form_matches_samples(self):
        samples = [1, 1, 2, 3, 3, 3, 4, 7, 7, 9]
        counts = np.bincount(samples, minlength=10)
        t = Table((Variable.ranged("V", 10),), counts / counts.sum())
        for q in (10, 25, 50, 90, 99, 100):
            assert distribution_percentile(t, q) == percentile(samples, q)


class TestCertificate:
    def test_slack_and_holds(self):
        c = Certificate(Bits(0.1), Bits(0.3), True)
        assert c.slack == pytest.approx(0.2)
        assert c.holds
        assert not Certificate(Bits(0.4), Bits(0.3), True).holds


# -- properties --------------------------------------------------------------------------

cards = st.lists(st.integers(2, 3), min_size=2, max_size=4)


@st.composite
def joints(draw):
    cs = draw(cards)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    vs = [Variable.ranged(f"V{i}", c) for i, c in enumerate(cs)]
    raw = rng.dirichlet(np.full(int(np.prod(cs)), 0.7))
    return Table(vs, raw.reshape(cs))


@settings(max_examples=60, deadline=None)
@given(joints(), st.data())
def test_chain_rule(j, data):
    names = list(j.scope_names)
    split = data.draw(st.integers(1, len(names) - 1))
    t, g = names[:split], names[split:]
    lhs = entropy(j.marginal(names))
    rhs = entropy(j.marginal(g)) + conditional_entropy(j, t, g)
    assert abs(lhs - rhs) < 1e-9


@settings(max_examples=60, deadline=None)
@given(joints(), joints())
def test_gibbs(p, q):
    if p.values.shape != q.values.shape:
        q = Table(p.scope, np.full(p.values.shape, 1.0 / p.values.size))
    q = Table(p.scope, q.values)
    assert kl_divergence(p, q) >= -1e-12
    assert kl_divergence(p, p) == 0.0
    if kl_divergence(p, q) == 0.0:
        assert p.allclose(q)


@settings(max_examples=60, deadline=None)
@given(joints(), st.data())
def test_conditional_mutual_information_nonnegative(j, data):
    names = list(data.draw(st.permutations(j.scope_names)))
    a, b, c = names[:1], names[1:2], names[2:]
    assert mutual_information(j, a, b, c) >= -1e-12


@settings(max_examples=60, deadline=None)
@given(joints(), st.data())
def test_entropy_relabel_invariant(j, data):
    axis = data.draw(st.integers(0, j.values.ndim - 1))
    perm = data.draw(st.permutations(range(j.values.shape[axis])))
    relabeled = Table(j.scope, np.take(j.values, perm, axis=axis))
    assert abs(entropy(relabeled) - entropy(j)) < 1e-12
