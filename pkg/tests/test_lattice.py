import numpy as np
import pytest

from contact_fronts.errors import InconsistentSpecError, InvalidParameterError, PreconditionError
from contact_fronts.lattice import (
    BLOCKED,
    EMPTY,
    OCCUPIED,
    BoundaryPolicy,
    Configuration,
    InitialSpec,
    TailKind,
    make_initial,
    random_member,
)


def test_configuration_reads_window_and_tail():
    config = Configuration(-1, [1, 0, -1, 1])
    assert config.hi == 2
    assert config.state(-1) == OCCUPIED
    assert config.state(1) == BLOCKED
    assert config.state(100) == EMPTY
    assert config.occupied_sites().tolist() == [-1, 2]
    assert config.rightmost() == 2
    assert config.leftmost_one() == -1
    assert config.as_dict() == {-1: 1, 0: 0, 1: -1, 2: 1}


def test_configuration_rejects_bad_states():
    with pytest.raises(InvalidParameterError):
        Configuration(0, [2])
    with pytest.raises(InvalidParameterError):
        Configuration(0, [])


def test_in_class():
    config = Configuration(0, [1, 0, 1, -1])
    assert config.in_class(2)
    assert not config.in_class(0)
    assert not Configuration(0, [0, 0]).in_class(0)


def test_blocked_tail():
    config = Configuration(0, [1], BoundaryPolicy.blocked_tail())
    assert config.state(-5) == BLOCKED
    assert config.state(5) == BLOCKED
    assert config.rightmost() == 0


def test_left_clamp_counts_as_occupied():
    config = make_initial(InitialSpec.heaviside(3), depth=4)
    assert config.policy.clamp == -1
    assert config.lo == 0
    assert config.states.tolist() == [1, 1, 1, 1]
    assert config.state(-50) == OCCUPIED
    assert config.state(4) == EMPTY
    assert config.rightmost() == 3
    assert config.leftmost_one() is None


def test_clamp_must_lie_left_of_window():
    with pytest.raises(InvalidParameterError):
        Configuration(0, [1], BoundaryPolicy.left_clamp(0))


def test_order_and_join():
    low = Configuration(0, [1, -1])
    high = Configuration(0, [1, 0, 1])
    assert low.dominated_by(high)
    assert not high.dominated_by(low)
    joined = Configuration(0, [0, 1]).join(Configuration(1, [0, 1]))
    assert joined.as_dict() == {0: 0, 1: 1, 2: 1}


def test_blocked_tail_is_below_empty_tail():
    hostile = Configuration(0, [1], BoundaryPolicy.blocked_tail())
    single = Configuration(0, [1])
    assert hostile.dominated_by(single)
    assert not single.dominated_by(hostile)


def test_join_needs_empty_tails():
    with pytest.raises(PreconditionError):
        Configuration(0, [1], BoundaryPolicy.blocked_tail()).join(Configuration(0, [1]))


def test_equality_ignores_window_padding():
    assert Configuration(0, [1]) == Configuration(-2, [0, 0, 1, 0])
    assert Configuration(0, [1]) != Configuration(0, [1], BoundaryPolicy.blocked_tail())


@pytest.mark.parametrize(
    "text",
    ["single:0", "hostile:-3", "heaviside:7", "explicit:-2=1,0=1,1=-1", "explicit@0+blocked:-1=-1,0=1"],
)
def test_initial_spec_text_round_trip(text):
    assert str(InitialSpec.parse(text)) == text


@pytest.mark.parametrize("text", ["single", "single:x", "bogus:1", "explicit:1=a"])
def test_initial_spec_parse_errors(text):
    with pytest.raises(InvalidParameterError):
        InitialSpec.parse(text)


def test_explicit_claim_must_hold():
    spec = InitialSpec.explicit({0: 1, 2: 1}, claim=0)
    with pytest.raises(InconsistentSpecError):
        make_initial(spec)
    config = make_initial(InitialSpec.explicit({0: 1, 2: -1}, claim=0, tail=TailKind.BLOCKED))
    assert config.in_class(0)
    assert config.state(1) == BLOCKED


def test_hostile_start():
    config = make_initial(InitialSpec.hostile(5))
    assert config.rightmost() == 5
    assert config.state(4) == BLOCKED and config.state(6) == BLOCKED


def test_heaviside_depth_grows_with_horizon():
    shallow = make_initial(InitialSpec.heaviside(0), lambda_=1.0, horizon=1.0)
    deep = make_initial(InitialSpec.heaviside(0), lambda_=4.0, horizon=100.0)
    assert deep.policy.clamp < shallow.policy.clamp < 0


def test_random_member_is_in_class():
    generator = np.random.default_rng(5)
    for _ in range(50):
        config = random_member(generator, 3, 4)
        assert config.in_class(3)
        assert config.lo == -1 and config.hi == 7
        assert all(config.state(x) <= EMPTY for x in range(4, 12))
