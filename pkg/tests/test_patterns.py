import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svexposure.patterns import (
    Level,
    LevelSet,
    Pattern,
    canonicalize,
    class_count,
    combination_iterator,
    enumerate_classes,
    enumerate_multisets,
    is_canonical,
)


def brute_force_classes(levels, m):
    return {tuple(sorted(p, key=Level.sort_key)) for p in itertools.product(levels, repeat=m)}


def test_default_level_set_has_nine_sorted_levels(levels):
    assert len(levels) == 9
    products = [lv.product for lv in levels.levels]
    assert products == sorted(products)
    assert products[0] == 0.25 and products[-1] == 80


def test_class_count_default():
    assert class_count(9, 4) == 495
    assert 9**4 == 6561


@pytest.mark.parametrize("n,m,expected", [(1, 4, 1), (2, 2, 3), (3, 2, 6), (9, 1, 9), (4, 4, 35)])
def test_class_count_small(n, m, expected):
    assert class_count(n, m) == expected == math.comb(n + m - 1, m)


@pytest.mark.parametrize("k,n", [(0, 3), (1, 4), (2, 5), (3, 5), (5, 5)])
def test_combination_iterator_matches_itertools(k, n):
    got = [tuple(c) for c in combination_iterator(k, list(range(n)))]
    assert got == list(itertools.combinations(range(n), k))


def test_combination_iterator_example():
    assert list(combination_iterator(2, ["a", "b", "c"])) == [["a", "b"], ["a", "c"], ["b", "c"]]


def test_combination_iterator_rejects_bad_k():
    with pytest.raises(ValueError):
        list(combination_iterator(4, [1, 2, 3]))


@pytest.mark.parametrize("n_levels", range(1, 6))
@pytest.mark.parametrize("m", range(1, 5))
def test_enumeration_equals_brute_force(n_levels, m):
    levels = [Level(float(i + 1), 1.0) for i in range(n_levels)]
    got = [tuple(sorted(a, key=Level.sort_key)) for a in enumerate_multisets(levels, m)]
    assert len(got) == len(set(got)) == class_count(n_levels, m)
    assert set(got) == brute_force_classes(levels, m)


def test_enumerate_classes_default(levels):
    classes = list(enumerate_classes(levels))
    assert len(classes) == 495 == len(set(classes))
    assert all(is_canonical(p) for p in classes)
    raw = {canonicalize(Pattern.from_levels(p)) for p in itertools.product(levels.levels, repeat=4)}
    assert raw == set(classes)


def test_canonical_examples():
    assert canonicalize(Pattern((8, 32, 1, 10), (1, 1, 1, 1))).tau == (1, 10, 32, 8)
    assert canonicalize(Pattern((1, 10, 1, 10), (1, 1, 1, 1))).tau == (1, 10, 10, 1)


def test_canonical_layout_places_ranks():
    p = canonicalize(Pattern((0.25, 1, 0.5, 1), (1, 10, 80, 1)))
    prods = p.products
    # smallest top-left, largest top-right's diagonal partner bottom-right is second
    assert prods[0] == min(prods)
    assert prods[3] == sorted(prods)[1]
    assert prods[1] == sorted(prods)[2]
    assert prods[2] == max(prods)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(LevelSet.default().levels), min_size=4, max_size=4),
       st.permutations(range(4)))
def test_canonical_form_is_permutation_invariant(lvls, perm):
    p = Pattern.from_levels(lvls)
    q = p.permuted(perm)
    assert canonicalize(p) == canonicalize(q)
    assert canonicalize(canonicalize(p)) == canonicalize(p)


def test_pattern_rejects_bad_values():
    with pytest.raises(ValueError):
        Pattern((1, 1, 1), (1, 1, 1))
    with pytest.raises(ValueError):
        Pattern((1, 1, 1, -1), (1, 1, 1, 1))


def test_level_set_roundtrip(levels):
    assert LevelSet.from_json(levels.to_json()) == levels
    p = Pattern((0.25, 1, 0.5, 1), (1, 10, 80, 1))
    assert Pattern.from_dict(p.to_dict()) == p
