import numpy as np
import pytest

from resilient_dgd.costs import QuadraticCost, generate_family
from resilient_dgd.engine import AgentPool
from resilient_dgd.faults import ByzantineStrategy, corrupt, parse_role


def _cost(c=0.5):
    return QuadraticCost(np.eye(1), np.array([c]))


def test_reverse_gradient():
    out = corrupt(ByzantineStrategy("reverse"), np.array([2.0, -1.0]), QuadraticCost(np.eye(2), np.zeros(2)), np.zeros(2))
    np.testing.assert_array_equal(out, [-2.0, 1.0])


def test_reverse_is_an_involution():
    rng = np.random.default_rng(0)
    cost = QuadraticCost(np.eye(3), np.zeros(3))
    s = ByzantineStrategy("reverse")
    for _ in range(20):
        g = rng.normal(size=3)
        np.testing.assert_array_equal(corrupt(s, corrupt(s, g, cost, g), cost, g), g)


def test_centerflip_is_gradient_with_negated_center():
    c = 0.8
    x = np.array([-0.3])
    cost = _cost(c)
    out = corrupt(ByzantineStrategy("centerflip"), cost.A @ x - cost.b, cost, x)
    np.testing.assert_allclose(out, x + c, rtol=0, atol=1e-15)


def test_random_with_zero_scale_is_zero():
    out = corrupt(ByzantineStrategy("random", 0.0), np.ones(4), QuadraticCost(np.eye(4), np.zeros(4)), np.zeros(4),
                  np.random.default_rng(1))
    np.testing.assert_array_equal(out, np.zeros(4))


def test_random_needs_rng():
    with pytest.raises(ValueError):
        corrupt(ByzantineStrategy("random", 1.0), np.ones(1), _cost(), np.zeros(1))


def test_large_scales_gradient():
    out = corrupt(ByzantineStrategy("large", 10.0), np.array([1.0, -2.0]), QuadraticCost(np.eye(2), np.zeros(2)), np.zeros(2))
    np.testing.assert_array_equal(out, [10.0, -20.0])


@pytest.mark.parametrize("text, expected", [
    ("honest", None),
    ("Reverse", ByzantineStrategy("reverse")),
    ("centerflip", ByzantineStrategy("centerflip")),
    ("random:2.5", ByzantineStrategy("random", 2.5)),
    ("large:4", ByzantineStrategy("large", 4.0)),
])
def test_parse_role(text, expected):
    assert parse_role(text) == expected


@pytest.mark.parametrize("bad", ["liar", "random", "reverse:2", "large:x"])
def test_parse_role_rejects(bad):
    with pytest.raises(ValueError):
        parse_role(bad)


def test_role_round_trip():
    for s in (ByzantineStrategy("reverse"), ByzantineStrategy("random", 0.5), ByzantineStrategy("large", 3.0)):
        assert parse_role(s.role) == s


def test_corruption_leaves_family_untouched():
    fam = generate_family(2, 4, 2)
    before = fam.to_json()
    strategies = [ByzantineStrategy("reverse"), ByzantineStrategy("centerflip"),
                  ByzantineStrategy("random", 2.0), ByzantineStrategy("large", 5.0)]
    pool = AgentPool(fam, strategies, seed=3)
    for x in np.random.default_rng(0).normal(size=(10, 2)):
        pool.messages(x)
    assert fam.to_json() == before
