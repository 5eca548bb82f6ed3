"""Tests for clock offset estimation."""

import random

import pytest
from pydantic import ValidationError

from cosmocrowd.analysis.timesync import SyncExchange, estimate_offset, normalize
from cosmocrowd.exceptions import EmptyInputError, NegativeRttError
from cosmocrowd.models.records import INT64_MAX


def test_single_exchange_rounds_half_away_from_zero() -> None:
    estimate = estimate_offset([SyncExchange(t1=0, t2=105, t3=110, t4=20)])

    assert (estimate.offset_ms, estimate.rtt_ms) == (98, 15)


def test_negative_half_rounds_away_from_zero() -> None:
    # 2θ = (-105 - 0) + (-100 - 20) = -225
    estimate = estimate_offset([SyncExchange(t1=0, t2=-105, t3=-100, t4=20)])

    assert estimate.offset_ms == -113


def test_symmetric_network_recovers_offset() -> None:
    estimate = estimate_offset([SyncExchange(t1=0, t2=60, t3=60, t4=20)])

    assert (estimate.offset_ms, estimate.rtt_ms) == (50, 20)


def test_minimum_delay_exchange_wins() -> None:
    slow = SyncExchange(t1=0, t2=100, t3=100, t4=40)  # δ=40, θ=80
    fast = SyncExchange(t1=1000, t2=1055, t3=1055, t4=1010)  # δ=10, θ=50

    estimate = estimate_offset([slow, fast])

    assert (estimate.offset_ms, estimate.rtt_ms) == (50, 10)


def test_ties_go_to_earliest_send() -> None:
    later = SyncExchange(t1=500, t2=530, t3=530, t4=520)  # θ=20
    earlier = SyncExchange(t1=0, t2=40, t3=40, t4=20)  # θ=30

    assert estimate_offset([later, earlier]).offset_ms == 30


def test_empty_input() -> None:
    with pytest.raises(EmptyInputError):
        estimate_offset([])


def test_negative_round_trip_is_rejected() -> None:
    with pytest.raises(NegativeRttError):
        estimate_offset([SyncExchange(t1=0, t2=0, t3=100, t4=50)])


def test_exchange_rejects_reversed_server_stamps() -> None:
    with pytest.raises(ValidationError):
        SyncExchange(t1=0, t2=10, t3=5, t4=20)


def test_normalize() -> None:
    assert normalize(1000, 98) == 1098
    assert normalize(1000, 0) == 1000
    assert normalize(INT64_MAX, 5) == INT64_MAX


def test_symmetric_exchanges_are_exact() -> None:
    rng = random.Random(11)

    for _ in range(1000):
        offset = rng.randint(-10_000, 10_000)
        one_way = rng.randint(0, 500)
        hold = rng.randint(0, 50)
        t1 = rng.randint(0, 10**9)
        t2 = t1 + offset + one_way
        t4 = t1 + 2 * one_way + hold
        ex = SyncExchange(t1=t1, t2=t2, t3=t2 + hold, t4=t4)

        assert estimate_offset([ex]).offset_ms == offset


def test_asymmetric_error_is_bounded_by_half_delay() -> None:
    rng = random.Random(12)

    for _ in range(1000):
        offset = rng.randint(-10_000, 10_000)
        exchanges = []
        for _ in range(rng.randint(1, 8)):
            t1 = rng.randint(0, 10**9)
            out_ms, back_ms, hold = rng.randint(0, 400), rng.randint(0, 400), rng.randint(0, 30)
            t2 = t1 + offset + out_ms
            t3 = t2 + hold
            t4 = t3 - offset + back_ms
            exchanges.append(SyncExchange(t1=t1, t2=t2, t3=t3, t4=t4))

        estimate = estimate_offset(exchanges)

        # +0.5 covers the final integer rounding
        assert abs(estimate.offset_ms - offset) <= estimate.rtt_ms / 2 + 0.5
