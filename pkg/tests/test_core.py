import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeprand.core import (
    DiscreteDistribution,
    Permutation,
    all_permutations,
    apply_permutation,
    canonical_form,
    compose,
    evaluate_phi,
    invert,
    remoteness,
    remoteness_bound,
    same_distribution,
    symmetric_projection,
    tidy_order,
    tidying_permutation,
    total_variation,
)

perms = st.integers(2, 7).flatmap(lambda n: st.permutations(list(range(n))).map(Permutation))


def test_apply_convention():
    s = Permutation((2, 0, 1))
    assert apply_permutation(s, [10, 20, 30]).tolist() == [30, 10, 20]


@given(st.data())
def test_compose_matches_sequential_application(data):
    n = data.draw(st.integers(1, 7))
    p = Permutation(data.draw(st.permutations(list(range(n)))))
    q = Permutation(data.draw(st.permutations(list(range(n)))))
    v = np.arange(n) * 1.5
    assert np.array_equal(compose(p, q).apply(v), p.apply(q.apply(v)))


@given(perms)
def test_inverse_roundtrip(p):
    assert compose(p, invert(p)).is_identity()
    assert compose(invert(p), p).is_identity()
    assert Permutation.from_one_based(p.one_based()) == p


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


def test_all_permutations_count():
    assert len(list(all_permutations(4))) == 24


def test_evaluate_phi():
    assert evaluate_phi([1, 0.5], [0.5, 1]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        evaluate_phi([1, 0], [1, 0, 0])


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution([0.5, 0.6], [[0.1, 0.2], [0.3, 0.4]], [0, 0])
    with pytest.raises(ValueError):
        DiscreteDistribution([1.0], [[1.2, 0.2]], [0])
    with pytest.raises(ValueError):
        DiscreteDistribution([1.0], [[0.2, 0.2]], [-0.1])


def test_box_moments_are_exact():
    phi = DiscreteDistribution.box([0.5, 0.25], 0.5)
    assert np.allclose(phi.mean(), [0.5, 0.25])
    # uniform on [0.25, 0.75]: E[x^2] = 0.25 + 1/48
    assert phi.second_moment()[0, 0] == pytest.approx(0.25 + 1 / 48)


def test_samples_stay_in_support(rng):
    phi = DiscreteDistribution([0.3, 0.7], [[0.1, 0.9], [0.6, 0.4]], [0.2, 0.0])
    xs = phi.sample(rng, 500)
    assert all(phi.contains(x) for x in xs)


def test_tidying_sorts_mean_descending():
    phi = DiscreteDistribution.dirac([0.2, 0.9, 0.5, 0.9])
    s = tidying_permutation(phi)
    assert invert(s).apply(phi.mean()).tolist() == [0.9, 0.9, 0.5, 0.2]
    canon = canonical_form(phi)
    assert np.all(np.diff(canon.mean()) <= 0)
    assert tidy_order(phi.mean()) == s


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_tidy_order_is_non_increasing(values):
    s = tidy_order(values)
    out = invert(s).apply(np.array(values))
    assert np.all(np.diff(out) <= 0)


def test_symmetric_projection_is_symmetric():
    phi = DiscreteDistribution([0.4, 0.6], [[0.1, 0.8, 0.5], [0.7, 0.2, 0.3]], [0.1, 0.0])
    sym = symmetric_projection(phi)
    for s in all_permutations(3):
        assert same_distribution(sym.permuted(s), sym)


def test_remoteness_extremes():
    assert remoteness(DiscreteDistribution.dirac([0.3, 0.3])) == pytest.approx(0.0)
    assert remoteness(DiscreteDistribution.uniform(3)) == pytest.approx(0.0, abs=1e-12)
    # a point off the diagonal against its 2-point symmetrization
    assert remoteness(DiscreteDistribution.dirac([0.9, 0.1])) == pytest.approx(0.5)


def test_total_variation_of_disjoint_boxes():
    a = DiscreteDistribution.box([0.2, 0.2], 0.1)
    b = DiscreteDistribution.box([0.8, 0.8], 0.1)
    assert total_variation(a, b) == pytest.approx(1.0)
    assert total_variation(a, a) == pytest.approx(0.0)


def test_total_variation_of_overlapping_boxes():
    a = DiscreteDistribution.box([0.5], 0.4)
    b = DiscreteDistribution.box([0.6], 0.4)
    # overlap [0.4, 0.7] of length 0.3 out of 0.4
    assert total_variation(a, b) == pytest.approx(0.25)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.0, 0.1)), min_size=1, max_size=3)
)
def test_remoteness_bound_never_exceeds_exact(components):
    centers = np.array([[a, b] for a, b, _ in components])
    widths = np.array([h for *_, h in components])
    phi = DiscreteDistribution(np.full(len(components), 1 / len(components)), centers, widths)
    assert remoteness_bound(phi) <= remoteness(phi) + 1e-9


def test_remoteness_is_permutation_invariant():
    phi = DiscreteDistribution([0.5, 0.5], [[0.9, 0.1, 0.4], [0.7, 0.3, 0.2]], [0.05, 0.1])
    r = remoteness(phi)
    for s in itertools.islice(all_permutations(3), 6):
        assert remoteness(phi.permuted(s)) == pytest.approx(r, abs=1e-12)


def test_json_roundtrip():
    phi = DiscreteDistribution([0.25, 0.75], [[0.1, 0.9], [0.6, 0.4]], [0.2, 0.0])
    assert same_distribution(DiscreteDistribution.from_json(phi.to_json()), phi)
