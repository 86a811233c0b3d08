import numpy as np
import pytest
import torch

from ovseg.training.matching import Assignment, hungarian_match, matching_cost

from _oracles import oracle_assignment, oracle_bce, oracle_dice


def test_assignment_rejects_repeated_rows_or_cols():
    with pytest.raises(ValueError):
        Assignment(pairs=[(0, 0), (0, 1)])
    with pytest.raises(ValueError):
        Assignment(pairs=[(0, 0), (1, 0)])


def test_matching_cost_matches_per_pair_oracle(rng):
    masks = torch.from_numpy(rng.random((4, 5, 5)))
    gts = torch.from_numpy((rng.random((3, 5, 5)) > 0.4).astype(np.float64))
    if not gts.any(dim=(1, 2)).all():
        gts[:, 0, 0] = 1.0
    cost = matching_cost(masks, gts)
    assert cost.shape == (4, 3)
    for q in range(4):
        for g in range(3):
            expected = (oracle_dice(masks[q].numpy(), gts[g].numpy())
                        + oracle_bce(masks[q].numpy(), gts[g].numpy()))
            assert cost[q, g] == pytest.approx(expected, abs=1e-9)


def test_matching_cost_requires_nonempty_gt(rng):
    masks = torch.from_numpy(rng.random((2, 4, 4)))
    with pytest.raises(ValueError):
        matching_cost(masks, torch.zeros(0, 4, 4))
    gts = torch.zeros(2, 4, 4)
    gts[0, 0, 0] = 1.0   # second stays empty
    with pytest.raises(ValueError):
        matching_cost(masks, gts)


def test_matching_cost_detached_from_graph(rng):
    masks = torch.from_numpy(rng.random((2, 4, 4))).requires_grad_(True)
    gts = torch.ones(1, 4, 4)
    cost = matching_cost(masks, gts)
    assert isinstance(cost, np.ndarray)
    assert masks.grad is None


def test_match_square_matrices_agree_with_brute_force(rng):
    for _ in range(30):
        n = int(rng.integers(1, 6))
        costs = rng.random((n, n))
        assert hungarian_match(costs).pairs == oracle_assignment(costs)


def test_match_rectangular_both_ways(rng):
    for _ in range(30):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        costs = rng.random((n, m))
        got = hungarian_match(costs).pairs
        assert len(got) == min(n, m)
        assert got == oracle_assignment(costs)


def test_match_prefers_lexicographically_first_among_ties():
    # every assignment costs exactly 2, so ordering must decide
    costs = np.ones((3, 3))
    assert hungarian_match(costs[:2, :2]).pairs == [(0, 0), (1, 1)]
    assert hungarian_match(costs).pairs == [(0, 0), (1, 1), (2, 2)]
    # rectangular tie: rows 0..2, two columns, all equal
    assert hungarian_match(np.ones((3, 2))).pairs == [(0, 0), (1, 1)]
    assert hungarian_match(np.ones((2, 3))).pairs == [(0, 0), (1, 1)]


def test_match_tie_structure_with_duplicate_rows():
    # proposals 0 and 1 are identical; the earlier one must take the earlier gt
    costs = np.array([[0.3, 0.6], [0.3, 0.6], [0.9, 0.1]])
    assert hungarian_match(costs).pairs == oracle_assignment(costs) == [(0, 0), (2, 1)]


def test_match_is_optimal_on_adversarial_case():
    # the greedy row-wise minimum is suboptimal here
    costs = np.array([[1.0, 2.0], [1.0, 100.0]])
    assert hungarian_match(costs).pairs == [(0, 1), (1, 0)]


def test_match_rejects_nonfinite_and_empty():
    with pytest.raises(FloatingPointError):
        hungarian_match(np.array([[np.inf, 1.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        hungarian_match(np.zeros((0, 3)))


def test_match_handles_many_ties_exhaustively(rng):
    # small matrices with values drawn from {0.25, 0.5} create dense tie sets
    for _ in range(40):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 5))
        costs = rng.choice([0.25, 0.5], size=(n, m))
        assert hungarian_match(costs).pairs == oracle_assignment(costs)
