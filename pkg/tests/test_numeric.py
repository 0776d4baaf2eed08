import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwbound.numeric import (
    HARDWARE,
    Mode,
    PrecisionConfig,
    PrecisionError,
    extended,
    make_context,
    roundtrip_digits,
)


def test_hardware_context_is_double():
    ctx = make_context(PrecisionConfig())
    assert ctx.bits == 53
    one = ctx.scalar(1)
    assert (one + ctx.pow2(-1000)) - one == 0.0
    assert isinstance(ctx.sqrt(2.0), float)


def test_extended_context_resolves_tiny_offsets():
    ctx = extended(1024)
    with ctx.active():
        x = (ctx.scalar(1) + ctx.pow2(-1000)) - ctx.scalar(1)
    assert x != 0


def test_below_minimum_width_rejected():
    with pytest.raises(PrecisionError):
        make_context(PrecisionConfig(Mode.EXTENDED, 52))
    with pytest.raises(PrecisionError):
        extended(10)


def test_hardware_mode_ignores_mantissa_bits():
    cfg = PrecisionConfig(Mode.HARDWARE, 7)
    assert make_context(cfg).bits == 53
    assert cfg.effective_bits == 53


@pytest.mark.parametrize("bits", [53, 256, 1024])
def test_decimal_roundtrip_is_identity(bits):
    ctx = HARDWARE if bits == 53 else extended(bits)
    rng = random.Random(bits)
    with ctx.active():
        for _ in range(1000):
            x = ctx.scalar(rng.uniform(-1, 1)) * ctx.pow2(rng.randint(-80, 80))
            x = x + ctx.sqrt(abs(x))  # exercise digits beyond double precision
            assert ctx.parse(ctx.decimal(x)) == x


def test_decimal_handles_zero_and_sign():
    ctx = extended(256)
    assert ctx.parse(ctx.decimal(ctx.scalar(0))) == 0
    x = ctx.scalar("-3.5")
    assert ctx.parse(ctx.decimal(x)) == x


@settings(max_examples=200)
@given(st.floats(min_value=2.0**-64, max_value=2.0**64), st.sampled_from([53, 256]))
def test_sqrt_square_contract(x, bits):
    ctx = HARDWARE if bits == 53 else extended(bits)
    with ctx.active():
        xs = ctx.scalar(x)
        y = ctx.sqrt(xs) ** 2
        tol = ctx.pow2(-(bits - 4))
        assert xs * (1 - tol) <= y <= xs * (1 + tol)


def test_scalar_accepts_fractions_exactly():
    ctx = extended(64)
    with ctx.active():
        assert ctx.scalar(Fraction(1, 2)) == 0.5
        x = ctx.scalar(Fraction(1, 3))
        assert abs(x - 1 / 3) < 1e-15 and x != ctx.scalar(Fraction(1, 5))


def test_roundtrip_digit_count():
    assert roundtrip_digits(53) >= math.ceil(53 * math.log10(2)) + 1
    assert roundtrip_digits(1000) == 304


def test_tiny_threshold_scale():
    assert HARDWARE.tiny == 2.0**-26
    assert float(extended(256).tiny) == 2.0**-128
