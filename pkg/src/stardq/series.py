"""Truncated formal power series in the deformation parameter ``eps``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Generic, Sequence, TypeVar

from .poly import Poly, format_poly

T = TypeVar("T")


@dataclass(frozen=True)
class EpsSeries(Generic[T]):
    """``sum_k coeffs[k] eps^k`` for ``k = 0..order``; nothing above ``order`` is kept.

    Payloads must support ``+``, unary ``-`` and ``scale``; :meth:`__mul__`
    additionally needs payload ``*`` (true for :class:`Poly`).
    """

    order: int
    coeffs: tuple

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("truncation order must be non-negative")
        if len(self.coeffs) != self.order + 1:
            raise ValueError(f"expected {self.order + 1} coefficients, got {len(self.coeffs)}")

    @classmethod
    def of(cls, coeffs: Sequence[T], order: int | None = None, zero: T | None = None) -> "EpsSeries[T]":
        coeffs = list(coeffs)
        if order is None:
            order = len(coeffs) - 1
        if len(coeffs) > order + 1:
            coeffs = coeffs[: order + 1]
        while len(coeffs) < order + 1:
            if zero is None:
                zero = coeffs[0].scale(0)
            coeffs.append(zero)
        return cls(order, tuple(coeffs))

    @classmethod
    def constant(cls, value: T, order: int) -> "EpsSeries[T]":
        return cls.of([value], order)

    def __getitem__(self, k: int) -> T:
        return self.coeffs[k]

    def __iter__(self):
        return iter(self.coeffs)

    def _check(self, other: "EpsSeries") -> None:
        if not isinstance(other, EpsSeries):
            raise TypeError("expected an EpsSeries")
        if other.order != self.order:
            raise ValueError(f"truncation order mismatch: {self.order} vs {other.order}")

    def __add__(self, other: "EpsSeries[T]") -> "EpsSeries[T]":
        self._check(other)
        return EpsSeries(self.order, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "EpsSeries[T]":
        return EpsSeries(self.order, tuple(-a for a in self.coeffs))

    def __sub__(self, other: "EpsSeries[T]") -> "EpsSeries[T]":
        return self + (-other)

    def scale(self, c) -> "EpsSeries[T]":
        return EpsSeries(self.order, tuple(a.scale(c) for a in self.coeffs))

    def map(self, fn: Callable[[T], T]) -> "EpsSeries":
        return EpsSeries(self.order, tuple(fn(a) for a in self.coeffs))

    def __mul__(self, other: "EpsSeries[T]") -> "EpsSeries[T]":
        self._check(other)
        return series_mul(self, other)

    def is_zero(self) -> bool:
        return all(a.is_zero() for a in self.coeffs)

    def shift(self, k: int) -> "EpsSeries[T]":
        """Multiply by ``eps^k`` (truncating)."""
        zero = self.coeffs[0].scale(0)
        coeffs = [zero] * k + list(self.coeffs)
        return EpsSeries(self.order, tuple(coeffs[: self.order + 1]))

    def __str__(self) -> str:
        if all(isinstance(c, Poly) for c in self.coeffs):
            return format_series(self)
        return f"EpsSeries(order={self.order}, coeffs={self.coeffs!r})"


def series_mul(a: EpsSeries, b: EpsSeries) -> EpsSeries:
    """Cauchy product truncated at the common order."""
    if a.order != b.order:
        raise ValueError(f"truncation order mismatch: {a.order} vs {b.order}")
    out = []
    for k in range(a.order + 1):
        acc = a.coeffs[k] * b.coeffs[0]
        for l in range(1, k + 1):
            acc = acc + a.coeffs[k - l] * b.coeffs[l]
        out.append(acc)
    return EpsSeries(a.order, tuple(out))


def format_series(s: EpsSeries) -> str:
    """Render a Poly-valued series, e.g. ``x1^2*x2^2 + 4*x1*x2*eps + 2*eps^2``."""
    pieces: list[tuple[str, str]] = []
    for k, p in enumerate(s.coeffs):
        if p.is_zero():
            continue
        eps = "" if k == 0 else ("eps" if k == 1 else f"eps^{k}")
        if k == 0:
            body = format_poly(p)
            sign = "+"
            if body.startswith("-") and len(p.terms) == 1:
                sign, body = "-", body[1:]
            pieces.append((sign, body))
        elif len(p.terms) == 1:
            (e, c), = p.terms.items()
            sign = "-" if c < 0 else "+"
            mono = format_poly(Poly._raw(p.dim, {e: abs(c)}))
            pieces.append((sign, eps if mono == "1" else f"{mono}*{eps}"))
        else:
            pieces.append(("+", f"({format_poly(p)})*{eps}"))
    if not pieces:
        return "0"
    out = []
    for i, (sign, body) in enumerate(pieces):
        if i == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f" {sign} {body}")
    return "".join(out)
