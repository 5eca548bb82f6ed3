"""Per-device clock offset estimation from request/response exchanges.

Each exchange is the classic four-timestamp quadruple: the client stamps its
send (t1) and receive (t4) with its own clock, the reference server stamps its
receive (t2) and send (t3).
"""

from collections.abc import Sequence
from decimal import ROUND_HALF_UP, Decimal

from pydantic import BaseModel, model_validator

from cosmocrowd.exceptions import EmptyInputError, NegativeRttError
from cosmocrowd.models.records import INT64_MAX, INT64_MIN


class SyncExchange(BaseModel):
    """One client/server timestamp quadruple (milliseconds)."""

    model_config = {"frozen": True}

    t1: int  # client send, local clock
    t2: int  # server receive, reference clock
    t3: int  # server send, reference clock
    t4: int  # client receive, local clock

    @model_validator(mode="after")
    def _check_order(self) -> "SyncExchange":
        if self.t2 > self.t3:
            raise ValueError("server send precedes server receive")
        if self.t1 > self.t4:
            raise ValueError("client receive precedes client send")
        return self

    @property
    def rtt_ms(self) -> int:
        return (self.t4 - self.t1) - (self.t3 - self.t2)

    @property
    def offset_twice_ms(self) -> int:
        """2·θ, kept integral so rounding happens once."""
        return (self.t2 - self.t1) + (self.t3 - self.t4)


class OffsetEstimate(BaseModel):
    """Selected clock offset and the round-trip delay it came from."""

    model_config = {"frozen": True}

    offset_ms: int
    rtt_ms: int


def _half_away_from_zero(twice: int) -> int:
    # ROUND_HALF_UP in decimal rounds ties away from zero
    return int((Decimal(twice) / 2).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def estimate_offset(exchanges: Sequence[SyncExchange]) -> OffsetEstimate:
    """Estimate the clock offset from the minimum-delay exchange.

    Args:
        exchanges: At least one exchange.

    Returns:
        θ of the exchange with the smallest round-trip delay δ (ties broken by
        earliest t1), rounded half away from zero, together with that δ.

    Raises:
        EmptyInputError: No exchanges given.
        NegativeRttError: Any exchange has δ < 0.
    """
    if not exchanges:
        raise EmptyInputError("At least one sync exchange is required")

    for ex in exchanges:
        if ex.rtt_ms < 0:
            raise NegativeRttError(
                f"Exchange t1={ex.t1} has negative round-trip delay {ex.rtt_ms} ms"
            )

    best = min(exchanges, key=lambda ex: (ex.rtt_ms, ex.t1))
    return OffsetEstimate(
        offset_ms=_half_away_from_zero(best.offset_twice_ms),
        rtt_ms=best.rtt_ms,
    )


def normalize(t_local_ms: int, offset_ms: int) -> int:
    """Convert a local timestamp to UTC, saturating at the int64 range."""
    return max(INT64_MIN, min(INT64_MAX, t_local_ms + offset_ms))
