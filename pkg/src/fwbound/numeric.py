"""Scalar arithmetic backends: hardware doubles or MPFR-style big floats.

Every other module is generic over a ScalarContext.  Hardware mode is the
default for exploratory runs; the backward construction needs Extended mode
because roundoff of order 2^-53 destroys the stable phase within ~50 steps.
"""

from __future__ import annotations

import contextlib
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Union

import gmpy2

Scalar = Union[float, Any]  # float in Hardware mode, gmpy2.mpfr in Extended mode
ScalarLike = Union[int, float, str, Fraction, Any]

MIN_MANTISSA_BITS = 53


class Mode(enum.Enum):
    HARDWARE = "hardware"
    EXTENDED = "extended"


class PrecisionError(ValueError):
    """Invalid precision configuration."""


@dataclass(frozen=True)
class PrecisionConfig:
    mode: Mode = Mode.HARDWARE
    mantissa_bits: int = MIN_MANTISSA_BITS

    def validate(self) -> None:
        if self.mode is Mode.EXTENDED and self.mantissa_bits < MIN_MANTISSA_BITS:
            raise PrecisionError(
                f"mantissa_bits must be >= {MIN_MANTISSA_BITS}, got {self.mantissa_bits}"
            )

    def to_json(self) -> dict:
        return {"mode": self.mode.value, "mantissa_bits": self.effective_bits}

    @property
    def effective_bits(self) -> int:
        return MIN_MANTISSA_BITS if self.mode is Mode.HARDWARE else self.mantissa_bits


def roundtrip_digits(bits: int) -> int:
    """Decimal digits that make write-then-parse the identity at `bits` mantissa bits."""
    return math.ceil(bits * 0.302) + 2


class ScalarContext:
    """A scalar field with +, -, *, /, sqrt, comparison and decimal round-trip.

    Scalars are immutable values; contexts are cheap and safe to share
    read-only.  Arithmetic written with plain operators must run inside
    ``with ctx.active():`` so that Extended mode rounds at the right width
    (a no-op in Hardware mode).
    """

    config: PrecisionConfig
    bits: int

    @property
    def mode(self) -> Mode:
        return self.config.mode

    def scalar(self, x: ScalarLike) -> Scalar:
        raise NotImplementedError

    def sqrt(self, x: ScalarLike) -> Scalar:
        raise NotImplementedError

    def active(self):
        raise NotImplementedError

    def decimal(self, x: Scalar) -> str:
        raise NotImplementedError

    def parse(self, s: str) -> Scalar:
        return self.scalar(s)

    @property
    def tiny(self) -> Scalar:
        """Boundary slack / termination threshold, 2^-(bits/2)."""
        return self.pow2(-(self.bits // 2))

    def pow2(self, k: int) -> Scalar:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(bits={self.bits})"


class HardwareContext(ScalarContext):
    def __init__(self):
        self.config = PrecisionConfig(Mode.HARDWARE, MIN_MANTISSA_BITS)
        self.bits = MIN_MANTISSA_BITS

    def scalar(self, x):
        if isinstance(x, float):
            return x
        if isinstance(x, (int, Fraction)):
            return float(x)
        if isinstance(x, str):
            return float(x)
        return float(x)  # mpfr and other float-likes round to double

    def sqrt(self, x):
        return math.sqrt(x)

    def active(self):
        return contextlib.nullcontext()

    def decimal(self, x):
        return repr(float(x))  # shortest round-trip representation

    def pow2(self, k: int) -> float:
        return math.ldexp(1.0, k)


class ExtendedContext(ScalarContext):
    def __init__(self, bits: int):
        if bits < MIN_MANTISSA_BITS:
            raise PrecisionError(f"mantissa_bits must be >= {MIN_MANTISSA_BITS}, got {bits}")
        self.config = PrecisionConfig(Mode.EXTENDED, bits)
        self.bits = bits
        self.digits = roundtrip_digits(bits)

    def scalar(self, x):
        with self.active():
            if isinstance(x, Fraction):
                return gmpy2.mpfr(x.numerator) / gmpy2.mpfr(x.denominator)
            return gmpy2.mpfr(x)

    def sqrt(self, x):
        with self.active():
            return gmpy2.sqrt(gmpy2.mpfr(x))

    def active(self):
        # fresh context object per activation: gmpy2 restores the previous
        # thread context on exit, and fresh objects nest safely
        return gmpy2.context(precision=self.bits)

    def decimal(self, x):
        x = self.scalar(x)
        if gmpy2.is_nan(x):
            return "nan"
        if x == 0:
            return "0"
        mant, exp, _ = gmpy2.digits(x, 10, self.digits)
        sign = "-" if mant.startswith("-") else ""
        return f"{sign}0.{mant.lstrip('-')}e{exp}"

    def pow2(self, k: int):
        with self.active():
            return gmpy2.mpfr(2) ** k


HARDWARE = HardwareContext()


def make_context(cfg: PrecisionConfig) -> ScalarContext:
    """Build a scalar context; rejects Extended widths below 53 bits."""
    cfg.validate()
    if cfg.mode is Mode.HARDWARE:
        return HARDWARE
    return ExtendedContext(cfg.mantissa_bits)


def extended(bits: int) -> ScalarContext:
    return make_context(PrecisionConfig(Mode.EXTENDED, bits))
