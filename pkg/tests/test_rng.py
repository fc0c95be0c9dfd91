"""Tests for the splittable random stream."""

from fractions import Fraction

import pytest

from reserve2d import ALGORITHM, SplitStream


def test_same_seed_same_sequence():
    a = SplitStream(12345)
    b = SplitStream(12345)
    assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]


def test_different_seeds_differ():
    a = SplitStream(1)
    b = SplitStream(2)
    assert [a.next_u64() for _ in range(4)] != [b.next_u64() for _ in range(4)]


def test_child_streams_are_stable_and_distinct():
    root = SplitStream(99)
    kids = [root.child(i).key for i in range(50)]
    assert len(set(kids)) == 50
    assert root.child(7).key == SplitStream(99).child(7).key


def test_child_does_not_consume_parent_draws():
    a = SplitStream(5)
    b = SplitStream(5)
    a.child(0)
    a.child(1)
    assert a.next_u64() == b.next_u64()


def test_outputs_are_u64():
    s = SplitStream(0)
    for _ in range(100):
        u = s.next_u64()
        assert 0 <= u < 1 << 64


def test_seed_validation():
    with pytest.raises(ValueError):
        SplitStream(-1)
    with pytest.raises(ValueError):
        SplitStream(1 << 64)
    SplitStream((1 << 64) - 1)  # largest valid seed


def test_child_index_validation():
    with pytest.raises(ValueError):
        SplitStream(0).child(-1)


def test_randrange_bounds_and_coverage():
    s = SplitStream(17)
    seen = {s.randrange(6) for _ in range(500)}
    assert seen == {0, 1, 2, 3, 4, 5}
    with pytest.raises(ValueError):
        s.randrange(0)


def test_randrange_roughly_uniform():
    s = SplitStream(23)
    n, draws = 5, 50000
    counts = [0] * n
    for _ in range(draws):
        counts[s.randrange(n)] += 1
    # each count is Binomial(50000, 1/5): sd = sqrt(50000*0.2*0.8) = 89.4
    for c in counts:
        assert abs(c - draws / n) < 4 * 89.5, counts


def test_bernoulli_endpoints_consume_nothing():
    s = SplitStream(3)
    before = s.next_u64()
    t = SplitStream(3)
    t.next_u64()
    assert t.bernoulli(Fraction(0)) is False
    assert t.bernoulli(Fraction(1)) is True
    assert s.next_u64() == t.next_u64(), "integer probabilities must not draw"
    assert before is not None


def test_bernoulli_rejects_bad_probability():
    s = SplitStream(0)
    with pytest.raises(ValueError):
        s.bernoulli(Fraction(-1, 2))
    with pytest.raises(ValueError):
        s.bernoulli(Fraction(3, 2))


def test_bernoulli_frequency_matches_rational():
    s = SplitStream(41)
    p = Fraction(7, 24)
    draws = 60000
    hits = sum(s.bernoulli(p) for _ in range(draws))
    # sd = sqrt(60000 * p * (1-p)) ~ 111.4
    assert abs(hits - draws * p) < 4 * 112


def test_bernoulli_equals_randrange_on_same_stream():
    a = SplitStream(8)
    b = SplitStream(8)
    p = Fraction(5, 12)
    outcomes = [a.bernoulli(p) for _ in range(200)]
    assert outcomes == [b.randrange(12) < 5 for _ in range(200)]


def test_algorithm_label():
    assert ALGORITHM == "splitmix64-tree/v1"
