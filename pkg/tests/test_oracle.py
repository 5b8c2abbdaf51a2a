import itertools

import numpy as np
import pytest

from deeprand.channel import likelihood, outcomes
from deeprand.cli import orbit_family
from deeprand.core import Permutation
from deeprand.oracle import (
    Evaluation,
    JointDistribution,
    ZeroEvidenceError,
    check_degradation,
    check_indistinguishability,
    common_permutation_group,
    group_average,
    mmse_strategy,
    omega_t_table,
    same_joint,
    posterior_mean,
    strategy_mse,
)

# Frozen by an exact rational brute force over the 9-point grid, written
# independently of the package.
DEGRADATION_9PT = {
    1: (3.1656836461126003, 0.06228298611111111),
    2: (15.760523854069223, 0.4372829861111111),
    4: (64.79707436001625, 1.9372829861111112),
    8: (258.21163012392753, 7.937282986111111),
}
# Frozen by Gauss-Legendre quadrature on the widened orbit pair (width 0.5, k = 2).
ORBIT_LHS = 0.0020367449661838344
ORBIT_RHS = 0.0020366115267550777
ORBIT_RATIO = 1.0000655203149955


def _brute_posterior(points, weights, i, j, k):
    num = den = 0.0
    for (x, y), w in zip(points, weights):
        p = w * likelihood(i, x, k) * likelihood(j, y, k)
        num += p * np.dot(x, y) / len(x)
        den += p
    return num / den


def test_posterior_mean_two_point_prior():
    pts = [((0.6, 0.3), (0.9, 0.0)), ((0.2, 0.8), (0.5, 0.5))]
    J = JointDistribution.mixture([JointDistribution.dirac_pair(x, y) for x, y in pts], [0.3, 0.7])
    for i, j in itertools.product(outcomes(2), repeat=2):
        expected = _brute_posterior(pts, [0.3, 0.7], i, j, 2.0)
        assert posterior_mean(J, i, j, 2.0) == pytest.approx(expected, abs=1e-12)


def test_posterior_mean_zero_evidence():
    J = JointDistribution.dirac_pair([0.0, 0.0], [0.5, 0.5])
    with pytest.raises(ZeroEvidenceError):
        posterior_mean(J, [1, 0], [0, 0], 2.0)


def test_box_posterior_against_quadrature():
    J = JointDistribution.box_pair([0.5, 0.3], [0.6, 0.7], 0.4)
    g, w = np.polynomial.legendre.leggauss(6)
    nodes = [(c - 0.2 + 0.2 * (g + 1), 0.2 * w) for c in (0.5, 0.3, 0.6, 0.7)]
    i, j, k = np.array([1, 0]), np.array([1, 1]), 2.0
    num = den = 0.0
    for a, b, c, d in itertools.product(range(6), repeat=4):
        x = np.array([nodes[0][0][a], nodes[1][0][b]])
        y = np.array([nodes[2][0][c], nodes[3][0][d]])
        wt = nodes[0][1][a] * nodes[1][1][b] * nodes[2][1][c] * nodes[3][1][d]
        p = wt * likelihood(i, x, k) * likelihood(j, y, k)
        num += p * x @ y / 2
        den += p
    assert posterior_mean(J, i, j, k) == pytest.approx(num / den, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 4, 8])
def test_degradation_frozen_values(k):
    rep = check_degradation(JointDistribution.grid_uniform(2, 9), k)
    ratio, mse_u = DEGRADATION_9PT[k]
    assert rep.ratio == pytest.approx(ratio, rel=1e-10)
    assert rep.mse_unbiased == pytest.approx(mse_u, rel=1e-10)
    assert rep.is_degradation


def test_unbiased_table_mse_matches_closed_form():
    J = JointDistribution.dirac_pair([0.5, 1.0], [1.0, 0.25])
    k = 2.0
    # var of k^2 i.j / n with independent Bernoulli products
    p = np.array([0.25, 0.5]) * np.array([0.5, 0.125])
    var = (k ** 4 / 4) * np.sum(p * (1 - p))
    assert strategy_mse(omega_t_table(2, k), J, k) == pytest.approx(var, abs=1e-14)


def test_mmse_beats_any_shift():
    J = JointDistribution.grid_uniform(2, 3)
    table, mse = mmse_strategy(J, 2.0)
    for c in (-0.05, 0.02, 0.1):
        assert strategy_mse(table.shifted(c), J, 2.0) > mse


def test_evaluation_offset_does_not_change_mmse():
    J = JointDistribution.grid_uniform(2, 3)
    _, a = mmse_strategy(J, 2.0)
    _, b = mmse_strategy(J, 2.0, Evaluation(1.0, 0.3))
    assert a == pytest.approx(b, abs=1e-14)


def test_group_average_is_invariant():
    J = JointDistribution.box_pair([0.9, 0.1], [0.4, 0.6], 0.1)
    G = common_permutation_group(2)
    avg = group_average(J, G)
    swap = Permutation((1, 0))
    assert avg.size == 2
    assert np.allclose(sorted(avg.permuted(swap, swap).x_centers.tolist()), sorted(avg.x_centers.tolist()))


def test_group_average_rejects_non_group():
    s = Permutation((1, 0, 2))
    t = Permutation((0, 2, 1))
    with pytest.raises(ValueError):
        group_average(JointDistribution.grid_uniform(3, 2), [(Permutation.identity(3),) * 2, (s, s), (t, t)])


def test_single_member_family_ratio_is_one():
    rep = check_indistinguishability([JointDistribution.grid_uniform(2, 3)], 2.0)
    assert rep.ratio == pytest.approx(1.0, abs=1e-9)


def test_orbit_pair_frozen_value():
    rep = check_indistinguishability(orbit_family(0.5), 2.0, alpha=1.0)
    assert rep.lhs == pytest.approx(ORBIT_LHS, rel=1e-9)
    assert rep.rhs == pytest.approx(ORBIT_RHS, rel=1e-9)
    assert rep.ratio == pytest.approx(ORBIT_RATIO, rel=1e-12)
    assert rep.passed


def test_dirac_orbit_pair_is_degenerate():
    fam = [JointDistribution.dirac_pair([1, 0], [1, 0]), JointDistribution.dirac_pair([0, 1], [0, 1])]
    rep = check_indistinguishability(fam, 2.0, alpha=1.5)
    assert rep.ratio is None
    assert "degenerate" in rep.flags
    assert not rep.passed


def test_family_size_limits():
    with pytest.raises(ValueError):
        check_indistinguishability([], 2.0)
    with pytest.raises(ValueError):
        check_indistinguishability([JointDistribution.grid_uniform(1, 2)], 2.0, alpha=0.5)


def test_joint_json_roundtrip():
    J = JointDistribution.box_pair([0.5, 0.3], [0.6, 0.7], 0.4)
    assert same_joint(JointDistribution.from_json(J.to_json()), J)
