import math

import pytest

from hamiltonia.core import golden_frequency
from hamiltonia.errors import OrderTooLarge
from hamiltonia.trees import (
    LabeledTree,
    budget,
    count_canonical_trees,
    enumerate_trees,
    is_restricted,
    kepler_tree_value,
    line_currents,
    siegel_bound,
    siegel_scan,
    siegel_scan_bruteforce,
)

# OEIS A000081 (rooted trees) and A038055 (rooted trees with two node colors)
A000081 = [1, 1, 2, 4, 9, 20, 48, 115]
A038055 = [2, 4, 14, 52, 214, 916, 4116, 18996]


def test_canonical_counts_match_oeis():
    assert count_canonical_trees(8, 1) == A000081
    assert count_canonical_trees(8, 2) == A038055


@pytest.mark.parametrize("k", range(1, 7))
@pytest.mark.parametrize("alphabet", [[(1,)], [(1,), (-1,)], [(1,), (-1,), (2,)]])
def test_enumeration_and_cayley(k, alphabet):
    trees = list(enumerate_trees(k, alphabet))
    assert len(trees) == count_canonical_trees(k, len(alphabet))[-1]
    assert len({t.root for t in trees}) == len(trees)
    # labeled rooted trees with node labels from the alphabet: k^(k-1) a^k
    assert sum(t.multiplicity for t in trees) == k ** (k - 1) * len(alphabet) ** k


def test_currents_and_roundtrip():
    t = next(iter(enumerate_trees(4, [(1, 0), (0, 1)])))
    cur = line_currents(t)
    total = tuple(sum(x[0][i] for x in t.flat) for i in range(2))
    assert cur[0] == total
    assert LabeledTree.from_dict(t.to_dict()).root == t.root


def test_restricted_rejects_zero_current():
    for t in enumerate_trees(2, [(1,), (-1,)]):
        if not any(line_currents(t)[0]):
            assert not is_restricted(t)


def test_kepler_tree_single_node():
    t = next(iter(enumerate_trees(1, [(1,)])))
    assert complex(kepler_tree_value(t)) != 0


def test_budget_env(monkeypatch):
    monkeypatch.setenv("HAMILTONIA_BUDGET", "3")
    assert budget() == 3
    with pytest.raises(OrderTooLarge):
        list(enumerate_trees(3, [(1,), (-1,)]))


def test_siegel_scan_matches_bruteforce():
    w = golden_frequency()
    fast = siegel_scan(w, 3, 2)
    slow = siegel_scan_bruteforce(w, 3, 2)
    for k, row in slow.items():
        for n, c in row.items():
            assert fast["max_counts"][k].get(n, 0) == c
    assert not fast["violations"]


def test_siegel_bound_formula():
    assert siegel_bound(2, 5, 3, 1.0) == pytest.approx(4 * 2 * 5 * 2.0**-3)
    assert math.isfinite(siegel_bound(2, 5, 0, 1.0))
