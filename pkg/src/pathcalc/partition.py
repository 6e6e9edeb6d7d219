"""Refining partitions of a finite horizon and their straddle-point queries."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ._spec import SpecError, parse_number, parse_pairs, parse_range, split_kind

__all__ = [
    "Partition",
    "PartitionSequence",
    "dyadic_sequence",
    "uniform_sequence",
    "prev_point",
    "straddle",
    "parse_partition_spec",
]


class Partition:
    """Finite partition ``0 = t_0 < t_1 < ... < t_K = T`` of ``[0, T]``.

    Parameters
    ----------
    points : array_like
        Strictly increasing times, starting at 0.
    level : int, optional
        Dyadic level when the partition is ``{k T 2^-level}``. Enables exact
        membership tests.

    Notes
    -----
    Instances are immutable; ``points`` is a read-only array.
    """

    def __init__(self, points, *, level=None):
        pts = np.array(points, dtype=float).ravel()
        if pts.size < 2:
            raise ValueError("a partition needs at least two points")
        if pts[0] != 0.0:
            raise ValueError(f"partition must start at 0, got {pts[0]!r}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("partition points must be finite")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0)) + 1
            raise ValueError(f"partition points must be strictly increasing (index {bad})")
        pts.setflags(write=False)
        self.points = pts
        self.level = level

    @property
    def horizon(self):
        return float(self.points[-1])

    @property
    def mesh(self):
        return float(np.max(np.diff(self.points)))

    def __len__(self):
        return self.points.size

    def __repr__(self):
        tag = f"level={self.level}, " if self.level is not None else ""
        return f"Partition({tag}n_points={len(self)}, T={self.horizon:g})"

    def _check(self, t):
        t = float(t)
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"t={t!r} outside [0, {self.horizon!r}]")
        return t

    def contains(self, t):
        """Exact membership test.

        For dyadic partitions the test is done in rational arithmetic, so it is
        unambiguous for any float or :class:`fractions.Fraction` input.
        """
        if self.level is not None:
            q = Fraction(t) / Fraction(self.horizon) * (2**self.level)
            return q.denominator == 1 and 0 <= q <= 2**self.level
        return bool(np.any(self.points == float(t)))

    def prev_point(self, t):
        """Largest point strictly below `t`, or 0 when there is none."""
        t = self._check(t)
        i = int(np.searchsorted(self.points, t, side="left")) - 1
        return float(self.points[i]) if i >= 0 else 0.0

    def straddle(self, t):
        """Return ``(max{t_i < t}, min{t_i >= t}, min{t_i > t})``.

        An empty max is 0 and an empty min is the last point.
        """
        t = self._check(t)
        pts = self.points
        i = int(np.searchsorted(pts, t, side="left"))
        j = int(np.searchsorted(pts, t, side="right"))
        prev = float(pts[i - 1]) if i > 0 else 0.0
        nxt = float(pts[i]) if i < pts.size else float(pts[-1])
        nxt_strict = float(pts[j]) if j < pts.size else float(pts[-1])
        return prev, nxt, nxt_strict

    def is_refined_by(self, other):
        """True when every point of `self` is a point of `other`."""
        if self.level is not None and other.level is not None:
            return other.level >= self.level and self.horizon == other.horizon
        return bool(np.all(np.isin(self.points, other.points)))


def prev_point(p, t):
    """Largest point of `p` strictly below `t` (0 when none)."""
    return p.prev_point(t)


def straddle(p, t):
    """Straddle points of `t` in `p`, see :meth:`Partition.straddle`."""
    return p.straddle(t)


class PartitionSequence:
    """Indexed family of partitions ``pi_n`` of a common horizon.

    Parameters
    ----------
    kind : {'dyadic', 'uniform', 'custom'}
    horizon : float
    levels : sequence of int
        Level labels. For ``dyadic`` a level is the dyadic depth, for
        ``uniform`` it is the number of intervals, for ``custom`` it is the
        index into `points`.
    points : list of array_like, optional
        Only for ``custom``.
    """

    def __init__(self, kind, horizon, levels, points=None):
        horizon = float(horizon)
        if not horizon > 0:
            raise ValueError(f"horizon must be positive, got {horizon!r}")
        levels = [int(n) for n in levels]
        if not levels:
            raise ValueError("at least one level is required")
        if kind not in ("dyadic", "uniform", "custom"):
            raise ValueError(f"unknown partition kind {kind!r}")
        if kind == "dyadic" and min(levels) < 0:
            raise ValueError("dyadic levels must be non-negative")
        if kind == "uniform" and min(levels) < 1:
            raise ValueError("uniform levels count intervals and must be >= 1")
        self.kind = kind
        self.horizon = horizon
        self.levels = tuple(levels)
        self._custom = None
        if kind == "custom":
            if points is None or len(points) != len(levels):
                raise ValueError("custom sequences need one point list per level")
            self._custom = {n: Partition(p) for n, p in zip(levels, points)}
            for part in self._custom.values():
                if part.horizon != horizon:
                    raise ValueError("custom partitions must end at the horizon")
        self._cache = {}

    def __repr__(self):
        return f"PartitionSequence({self.kind!r}, T={self.horizon:g}, levels={self.levels[0]}..{self.levels[-1]})"

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        for n in self.levels:
            yield n, self[n]

    def __getitem__(self, n):
        n = int(n)
        if n in self._cache:
            return self._cache[n]
        if self.kind == "dyadic":
            if n < 0:
                raise ValueError("dyadic level must be non-negative")
            k = np.arange(2**n + 1, dtype=float)
            part = Partition(k * (self.horizon / 2**n), level=n)
        elif self.kind == "uniform":
            if n < 1:
                raise ValueError("uniform level must be >= 1")
            pts = np.linspace(0.0, self.horizon, n + 1)
            part = Partition(pts)
        else:
            if n not in self._custom:
                raise KeyError(n)
            part = self._custom[n]
        self._cache[n] = part
        return part

    def with_levels(self, levels):
        """Same family restricted (or extended) to other levels."""
        if self.kind == "custom":
            pts = [self._custom[n].points for n in levels]
            return PartitionSequence("custom", self.horizon, levels, pts)
        return PartitionSequence(self.kind, self.horizon, levels)

    def partitions(self):
        return [self[n] for n in self.levels]

    def is_nested(self):
        parts = self.partitions()
        return all(a.is_refined_by(b) for a, b in zip(parts, parts[1:]))

    def to_spec(self):
        if self.kind == "dyadic":
            return f"dyadic:T={self.horizon!r},levels={self.levels[0]}..{self.levels[-1]}"
        if self.kind == "uniform":
            return f"uniform:T={self.horizon!r},n={'|'.join(map(str, self.levels))}"
        return f"custom:T={self.horizon!r}"


def dyadic_sequence(horizon, max_level, min_level=1):
    """Dyadic partitions ``{k T 2^-n}`` for ``n = min_level..max_level``."""
    horizon = float(horizon)
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if int(max_level) < 1 or int(min_level) < 0 or int(min_level) > int(max_level):
        raise ValueError(f"invalid levels {min_level}..{max_level}")
    return PartitionSequence("dyadic", horizon, range(int(min_level), int(max_level) + 1))


def uniform_sequence(horizon, counts):
    """Uniform partitions with ``n`` equal intervals for each ``n`` in `counts`."""
    return PartitionSequence("uniform", horizon, list(counts))


def parse_partition_spec(spec):
    """Parse ``dyadic:T=1.0,levels=4..14`` or ``uniform:T=1.0,n=1000``.

    For ``uniform`` the ``n`` value may be a single count, a ``|``-separated
    list, or an ``a..b`` range.
    """
    kind, body, off = split_kind(spec)
    pairs = parse_pairs(spec, body, off)
    if kind not in ("dyadic", "uniform"):
        raise SpecError("unknown partition kind", spec, kind, 0)
    horizon = 1.0
    levels = None
    for key, value, pos in pairs:
        vpos = pos + len(key) + 1
        if key == "T":
            horizon = parse_number(value, spec, vpos)
            if not horizon > 0:
                raise SpecError("horizon must be positive", spec, value, vpos)
        elif key == "levels" and kind == "dyadic":
            levels = parse_range(value, spec, vpos)
        elif key == "n" and kind == "uniform":
            if "|" in value:
                levels = [parse_number(v, spec, vpos, int) for v in value.split("|")]
            else:
                levels = parse_range(value, spec, vpos)
        else:
            raise SpecError("unknown key", spec, key, pos)
    if levels is None:
        raise SpecError("missing levels", spec, kind, 0)
    if kind == "dyadic" and min(levels) < 0:
        raise SpecError("dyadic levels must be non-negative", spec, str(min(levels)), off)
    if kind == "uniform" and min(levels) < 1:
        raise SpecError("uniform counts must be positive", spec, str(min(levels)), off)
    return PartitionSequence(kind, horizon, levels)
