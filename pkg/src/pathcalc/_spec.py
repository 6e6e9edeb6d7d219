"""Tiny parser helpers shared by the path, partition and functional mini-languages."""

from __future__ import annotations

from fractions import Fraction

__all__ = ["SpecError", "split_kind", "parse_pairs", "parse_range", "parse_number"]


class SpecError(ValueError):
    """Raised when a spec string cannot be parsed.

    The message names the offending token and its 0-based character position.
    """

    def __init__(self, message, spec, token, pos):
        self.spec = spec
        self.token = token
        self.pos = pos
        super().__init__(f"{message}: token {token!r} at position {pos} in {spec!r}")


def split_kind(spec):
    """Split ``kind:body`` and return ``(kind, body, body_offset)``."""
    if not isinstance(spec, str) or not spec:
        raise SpecError("empty spec", str(spec), str(spec), 0)
    kind, sep, body = spec.partition(":")
    kind = kind.strip()
    if not kind:
        raise SpecError("missing kind", spec, spec[:1], 0)
    if not sep:
        return kind, "", len(spec)
    return kind, body, len(kind) + 1


def parse_pairs(spec, body, offset, sep=","):
    """Parse ``key=value`` items separated by `sep`.

    Returns a list of ``(key, value, position)`` with positions relative to `spec`.
    """
    out = []
    pos = offset
    if body == "":
        return out
    for item in body.split(sep):
        if "=" not in item:
            raise SpecError("expected key=value", spec, item, pos)
        key, _, value = item.partition("=")
        if not key.strip():
            raise SpecError("empty key", spec, item, pos)
        if not value.strip():
            raise SpecError("empty value", spec, item, pos + len(key) + 1)
        out.append((key.strip(), value.strip(), pos))
        pos += len(item) + len(sep)
    return out


def parse_number(text, spec, pos, kind=float):
    """Parse a number, accepting ``p/q`` fractions for floats."""
    try:
        if kind is int:
            return int(text)
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise SpecError(f"expected {kind.__name__}", spec, text, pos) from None


def parse_range(text, spec, pos):
    """Parse ``a..b`` (inclusive) or a single integer into a list of ints."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        a = parse_number(lo, spec, pos, int)
        b = parse_number(hi, spec, pos + len(lo) + 2, int)
        if b < a:
            raise SpecError("empty range", spec, text, pos)
        return list(range(a, b + 1))
    return [parse_number(text, spec, pos, int)]
