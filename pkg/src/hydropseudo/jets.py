"""First-order forward-mode jets.

A :class:`Jet` carries a value and its derivatives along a fixed set of
directions. Values and derivatives may themselves be jets over a different
direction space (distinguished by ``space``), which gives the mixed second
derivatives needed for compatibility checks without a symbolic engine.
Only the field operations are supported: every expression handled here is
rational.
"""
from __future__ import annotations

__all__ = ["Jet", "value", "derivative"]


class Jet:
    __slots__ = ("val", "grad", "space")

    def __init__(self, val, grad, space: str = "x"):
        self.val = val
        self.grad = tuple(grad)
        self.space = space

    def __repr__(self):
        return f"Jet({self.val!r}, {list(self.grad)!r}, space={self.space!r})"

    def _same(self, other) -> bool:
        return isinstance(other, Jet) and other.space == self.space

    def _lift(self, other) -> "Jet":
        if self._same(other):
            return other
        return Jet(other, (0.0,) * len(self.grad), self.space)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.val + o.val, [x + y for x, y in zip(self.grad, o.grad)], self.space)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, [-x for x in self.grad], self.space)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not self._same(other):
            return Jet(self.val * other, [x * other for x in self.grad], self.space)
        return Jet(
            self.val * other.val,
            [self.val * y + other.val * x for x, y in zip(self.grad, other.grad)],
            self.space,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not self._same(other):
            return Jet(self.val / other, [x / other for x in self.grad], self.space)
        q = self.val / other.val
        return Jet(q, [(x - q * y) / other.val for x, y in zip(self.grad, other.grad)], self.space)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = 1.0
        for _ in range(k):
            out = self * out
        return out if isinstance(out, Jet) else self._lift(out)


def value(x):
    return x.val if isinstance(x, Jet) else x


def derivative(x, k: int, space: str | None = None):
    """k-th directional derivative of ``x``; zero for constants of ``space``."""
    if isinstance(x, Jet) and (space is None or x.space == space):
        return x.grad[k]
    return 0.0
