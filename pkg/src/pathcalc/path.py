"""Cadlag paths with exact jump bookkeeping.

A path is stored as breakpoints ``0 = b_0 < ... < b_K = T`` with right values
``x(b_k)`` and left limits ``x(b_k-)``. Between breakpoints the path is affine,
running from ``x(b_k)`` to ``x(b_{k+1}-)``. Jumps are ``x(b_k) - x(b_k-)``.
"""

from __future__ import annotations

import csv
import re

import numpy as np

from ._spec import SpecError, parse_number, parse_pairs, split_kind

__all__ = [
    "CadlagPath",
    "step_path",
    "faber_schauder_path",
    "pc_approx",
    "pl_approx",
    "sup_distance",
    "skorokhod_distance",
    "time_change",
    "parse_path_spec",
    "read_path_csv",
]

# exact J1 matching is used for step-path pairs with at most this many jumps each
EXACT_J1_MAX_JUMPS = 80


def _as_2d(values, name):
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-d or 2-d")
    return arr


class CadlagPath:
    """Right-continuous, piecewise-affine path with explicit jumps.

    Parameters
    ----------
    times : array_like of shape (K+1,)
        Breakpoints, strictly increasing, starting at 0. The last one is the
        horizon ``T``.
    values : array_like of shape (K+1,) or (K+1, m)
        Right values ``x(b_k)``.
    left_values : array_like, optional
        Left limits ``x(b_k-)``. Defaults to `values`, i.e. a continuous
        piecewise-linear path. ``left_values[0]`` is ``x(0-)``, which equals
        ``x(0)`` unless a jump at time 0 is wanted.

    Examples
    --------
    >>> x = step_path([(0.5, 1.0)])
    >>> float(x.eval(0.5)[0]), float(x.eval_left(0.5)[0])
    (1.0, 0.0)
    """

    def __init__(self, times, values, left_values=None):
        b = np.array(times, dtype=float).ravel()
        v = _as_2d(values, "values")
        lv = v.copy() if left_values is None else _as_2d(left_values, "left_values")
        if b.size < 2:
            raise ValueError("a path needs at least two breakpoints")
        if b[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if v.shape[0] != b.size or lv.shape != v.shape:
            raise ValueError("values and left_values must have one row per breakpoint")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(lv))):
            raise ValueError("path values must be finite")
        for arr in (b, v, lv):
            arr.setflags(write=False)
        self.times = b
        self.values = v
        self.left_values = lv
        self._cont = None

    # basic attributes -------------------------------------------------
    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return float(self.times[-1])

    def __repr__(self):
        kind = "step" if self.is_step else "affine"
        return f"CadlagPath(dim={self.dim}, T={self.horizon:g}, breakpoints={self.times.size}, {kind})"

    @property
    def is_step(self):
        """True when the path is constant between breakpoints."""
        return bool(np.array_equal(self.left_values[1:], self.values[:-1]))

    @property
    def jump_array(self):
        """Jumps at every breakpoint, shape (K+1, m); row 0 is ``x(0) - x(0-)``."""
        return self.values - self.left_values

    def jumps(self, atol=0.0):
        """Return ``(times, sizes)`` of the nonzero jumps."""
        d = self.jump_array
        mask = np.linalg.norm(d, axis=1) > atol
        return self.times[mask], d[mask]

    # evaluation --------------------------------------------------------
    def _check_times(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.times[-1]) or np.any(~np.isfinite(t)):
            raise ValueError(f"time outside [0, {self.horizon!r}]")
        return t

    def _interp(self, seg, t):
        b = self.times
        nxt = np.minimum(seg + 1, b.size - 1)
        width = b[nxt] - b[seg]
        w = np.where(width > 0, (t - b[seg]) / np.where(width > 0, width, 1.0), 0.0)
        start = self.values[seg]
        return start + w[:, None] * (self.left_values[nxt] - start)

    def eval(self, t):
        """Right-continuous value ``x(t)``; shape (m,) or (n, m)."""
        t = self._check_times(t)
        scalar = t.ndim == 0
        t1 = np.atleast_1d(t)
        seg = np.searchsorted(self.times, t1, side="right") - 1
        seg = np.clip(seg, 0, self.times.size - 1)
        out = self._interp(seg, t1)
        return out[0] if scalar else out

    __call__ = eval

    def eval_left(self, t):
        """Left limit ``x(t-)``, with ``x(0-)`` read from the stored left value."""
        t = self._check_times(t)
        scalar = t.ndim == 0
        t1 = np.atleast_1d(t)
        b = self.times
        k = np.searchsorted(b, t1, side="left")
        kc = np.minimum(k, b.size - 1)
        on = b[kc] == t1
        seg = np.maximum(k - 1, 0)
        out = self._interp(seg, t1)
        out[on] = self.left_values[kc[on]]
        return out[0] if scalar else out

    def jump(self, t):
        """``x(t) - x(t-)``."""
        return self.eval(t) - self.eval_left(t)

    def sample(self, t):
        """Alias of :meth:`eval` for array input, always 2-d."""
        return np.atleast_2d(self.eval(np.atleast_1d(t)))

    # stopping and perturbation -----------------------------------------
    def stop(self, t, left=False):
        """Stopped path ``x(. ^ t)``; with ``left=True`` the jump at t is removed."""
        t = float(self._check_times(t))
        b = self.times
        j = int(np.searchsorted(b, t, side="right")) - 1
        if t == b[j]:
            times = b[: j + 1].copy()
            vals = self.values[: j + 1].copy()
            lefts = self.left_values[: j + 1].copy()
            if left:
                vals[j] = lefts[j]
        else:
            xt = self.eval(t)
            times = np.append(b[: j + 1], t)
            vals = np.vstack([self.values[: j + 1], xt])
            lefts = np.vstack([self.left_values[: j + 1], xt])
        if t < b[-1]:
            times = np.append(times, b[-1])
            vals = np.vstack([vals, vals[-1]])
            lefts = np.vstack([lefts, vals[-2]])
        elif not left and j == b.size - 1:
            return self
        return CadlagPath(times, vals, lefts)

    def stop_left(self, t):
        """Left-stopped path ``x(s) 1_{s<t} + x(t-) 1_{s>=t}``."""
        return self.stop(t, left=True)

    def vertical_perturb(self, t, e):
        """``stop(t) + e 1_{[t, T]}``."""
        e = np.atleast_1d(np.asarray(e, dtype=float))
        if e.shape != (self.dim,):
            raise ValueError(f"perturbation of shape {e.shape} for a {self.dim}-d path")
        y = self.stop(t)
        k = int(np.searchsorted(y.times, float(t), side="left"))
        vals = y.values.copy()
        lefts = y.left_values.copy()
        vals[k:] += e
        lefts[k + 1 :] += e
        return CadlagPath(y.times, vals, lefts)

    def continuous_part(self):
        """Path minus its accumulated jumps (including a jump at 0); continuous."""
        if self._cont is None:
            acc = np.cumsum(self.jump_array, axis=0)
            vals = self.values - acc
            self._cont = CadlagPath(self.times, vals, vals)
        return self._cont

    # arithmetic --------------------------------------------------------
    def _merged(self, other):
        if self.horizon != other.horizon:
            raise ValueError("paths must share the horizon")
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return np.union1d(self.times, other.times)

    def _binary(self, other, op):
        if isinstance(other, CadlagPath):
            u = self._merged(other)
            return CadlagPath(u, op(self.eval(u), other.eval(u)), op(self.eval_left(u), other.eval_left(u)))
        return CadlagPath(self.times, op(self.values, other), op(self.left_values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return CadlagPath(self.times, -self.values, -self.left_values)

    def __mul__(self, c):
        if isinstance(c, CadlagPath):
            raise TypeError("path products are not piecewise affine")
        return self._binary(c, np.multiply)

    __rmul__ = __mul__

    def linear_map(self, A):
        """Coordinates mapped by ``x @ A``; `A` has shape (m, k)."""
        A = np.asarray(A, dtype=float).reshape(self.dim, -1)
        return CadlagPath(self.times, self.values @ A, self.left_values @ A)

    def coordinate(self, i):
        return CadlagPath(self.times, self.values[:, i], self.left_values[:, i])

    def with_horizon_points(self, extra):
        """Same path with additional (redundant) breakpoints."""
        u = np.union1d(self.times, np.asarray(extra, dtype=float))
        return CadlagPath(u, self.eval(u), self.eval_left(u))


def step_path(jumps, horizon=1.0, x0=None, dim=None):
    """Pure-jump path ``x(t) = x0 + sum_{s <= t} jump(s)``.

    Parameters
    ----------
    jumps : list of (time, value) or dict
        Jump times strictly increasing in ``(0, horizon]``; a dict is sorted
        by time.
    """
    horizon = float(horizon)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    jumps = sorted(jumps.items()) if isinstance(jumps, dict) else list(jumps)
    if dim is None:
        dim = np.atleast_1d(jumps[0][1]).size if jumps else (np.atleast_1d(x0).size if x0 is not None else 1)
    start = np.zeros(dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    times = [0.0]
    vals = [start]
    prev = 0.0
    for s, a in jumps:
        s = float(s)
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if a.size != dim:
            raise ValueError("jump dimension mismatch")
        if not 0.0 < s <= horizon:
            raise ValueError(f"jump time {s!r} outside (0, {horizon!r}]")
        if s <= prev:
            raise ValueError(f"jump times must be strictly increasing (duplicate or unsorted at {s!r})")
        prev = s
        times.append(s)
        vals.append(vals[-1] + a)
    if times[-1] < horizon:
        times.append(horizon)
        vals.append(vals[-1])
    vals = np.array(vals)
    lefts = np.vstack([vals[:1], vals[:-1]])
    return CadlagPath(times, vals, lefts)


def _tent(u):
    return np.maximum(0.0, 0.5 - np.abs(u - 0.5))


def faber_schauder_path(levels, seed=42, horizon=1.0, signs=None, dim=1):
    """Continuous piecewise-linear path from a signed Faber-Schauder sum.

    ``x(t) = s_{-1} t + sum_{m<M} sum_k s_{m,k} 2^{-m/2} L(2^m t - k)`` on
    ``[0, 1]`` with ``L(u) = max(0, 1/2 - |u - 1/2|)``, then rescaled to
    ``sqrt(T) x(t / T)``. Signs are +-1 drawn from ``default_rng(seed)``.

    Along dyadic partitions of level ``n <= M`` the quadratic sum at the
    horizon equals ``T`` (the Haar coefficients are orthonormal).
    """
    M = int(levels)
    if M < 1:
        raise ValueError("levels must be >= 1")
    ncoef = 2**M
    if signs is None:
        rng = np.random.default_rng(seed)
        signs = rng.integers(0, 2, size=(dim, ncoef)) * 2 - 1
    signs = np.asarray(signs, dtype=float).reshape(dim, ncoef)
    if not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be +-1")
    t = np.arange(ncoef + 1, dtype=float) / ncoef
    vals = np.empty((ncoef + 1, dim))
    for c in range(dim):
        s = signs[c]
        x = s[0] * t
        pos = 1
        for m in range(M):
            u = t * 2**m
            k = np.minimum(np.floor(u).astype(np.int64), 2**m - 1)
            x = x + s[pos + k] * 2.0 ** (-m / 2) * _tent(u - k)
            pos += 2**m
        vals[:, c] = x
    horizon = float(horizon)
    return CadlagPath(t * horizon, vals * np.sqrt(horizon))


def pc_approx(x, p):
    """Forward-sampled step approximation ``sum x(t_{i+1}) 1_{[t_i, t_{i+1})}``.

    The left limit at 0 is kept at ``x(0)``, so the approximation jumps by
    ``x(t_{i+1}) - x(t_i)`` at every grid point ``t_i``.
    """
    pts = _grid_for(x, p)
    xv = x.eval(pts)
    vals = np.vstack([xv[1:], xv[-1:]])
    lefts = xv.copy()
    return CadlagPath(pts, vals, lefts)


def pl_approx(x, p):
    """Continuous piecewise-linear interpolation of `x` at the points of `p`."""
    pts = _grid_for(x, p)
    return CadlagPath(pts, x.eval(pts))


def _grid_for(x, p):
    pts = p.points if hasattr(p, "points") else np.asarray(p, dtype=float)
    if not np.isclose(pts[-1], x.horizon, rtol=0, atol=1e-12 * max(1.0, x.horizon)):
        raise ValueError(f"partition horizon {pts[-1]!r} differs from path horizon {x.horizon!r}")
    if pts[-1] != x.horizon:
        pts = np.append(pts[:-1], x.horizon)
    return pts


# distances -------------------------------------------------------------

def sup_distance(f, g):
    """Exact ``sup_t |f(t) - g(t)|`` over ``[0, T]`` (Euclidean norm in space)."""
    u = f._merged(g)
    right = np.linalg.norm(f.eval(u) - g.eval(u), axis=1)
    left = np.linalg.norm(f.eval_left(u[1:]) - g.eval_left(u[1:]), axis=1)
    return float(max(right.max(), left.max() if left.size else 0.0))


def time_change(f, u_nodes, v_nodes):
    """Path ``s -> f(lam(s))`` for the piecewise-linear ``lam(u_k) = v_k``."""
    u = np.asarray(u_nodes, dtype=float)
    v = np.asarray(v_nodes, dtype=float)
    if u[0] != 0 or v[0] != 0 or u[-1] != f.horizon or v[-1] != f.horizon:
        raise ValueError("time change must fix 0 and T")
    if np.any(np.diff(u) <= 0) or np.any(np.diff(v) <= 0):
        raise ValueError("time change must be strictly increasing")
    pre = np.interp(f.times, v, u)
    s = np.union1d(u, pre)
    lam = np.clip(np.interp(s, u, v), 0.0, f.horizon)
    # the round trip through interp can miss breakpoints of f by an ulp
    lam[np.searchsorted(s, pre)] = f.times
    lam[0], lam[-1] = 0.0, f.horizon
    return CadlagPath(s, f.eval(lam), f.eval_left(lam))


def _step_data(f):
    t, _ = f.jumps()
    t = t[t > 0]
    vals = np.vstack([f.eval(0.0)[None, :], f.eval(t)]) if t.size else f.eval(0.0)[None, :]
    return t, vals


def _j1_exact_steps(f, g):
    a, F = _step_data(f)
    b, G = _step_data(g)
    T = f.horizon
    dist = np.linalg.norm(F[:, None, :] - G[None, :, :], axis=2)
    p, q = a.size, b.size
    tgap = np.abs(a[:, None] - b[None, :]).ravel() if p and q else np.empty(0)
    cands = np.unique(np.concatenate([[0.0], dist.ravel(), tgap]))

    def feasible(eps):
        ok = dist <= eps * (1 + 1e-12) + 1e-300
        if not ok[0, 0]:
            return False
        S = np.full((p + 1, q + 1), np.inf)
        S[0, 0] = 0.0
        for k in range(p + 1):
            for l in range(q + 1):
                tau = S[k, l]
                if not np.isfinite(tau):
                    continue
                if k < p:
                    s = max(tau, a[k] - eps)
                    hi = min(a[k] + eps, T, b[l] if l < q else T)
                    if s <= hi and ok[k + 1, l] and s < S[k + 1, l]:
                        S[k + 1, l] = s
                if l < q:
                    s = b[l]
                    if tau <= s and ok[k, l + 1] and s < S[k, l + 1]:
                        S[k, l + 1] = s
                    if k < p and tau <= s and abs(a[k] - s) <= eps and ok[k + 1, l + 1] and s < S[k + 1, l + 1]:
                        S[k + 1, l + 1] = s
        return bool(np.isfinite(S[p, q]))

    lo, hi = 0, cands.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


def _j1_aligned_bound(f, g):
    T = f.horizon
    best = sup_distance(f, g)
    ta, da = f.jumps()
    tb, db = g.jumps()
    sa, sb = np.linalg.norm(da, axis=1), np.linalg.norm(db, axis=1)
    keep_a = (ta > 0) & (ta < T)
    keep_b = (tb > 0) & (tb < T)
    ta, da, sa = ta[keep_a], da[keep_a], sa[keep_a]
    tb, db, sb = tb[keep_b], db[keep_b], sb[keep_b]
    if ta.size == 0 or tb.size == 0:
        return best
    top = max(sa.max(), sb.max())
    for frac in (0.5, 0.25, 0.1):
        eta = frac * top
        ia = np.flatnonzero(sa > eta)[:256]
        ib = np.flatnonzero(sb > eta)[:256]
        for w in (T / 64, T / 8, T):
            us, vs = [], []
            i = j = 0
            while i < ia.size and j < ib.size:
                x, y = ta[ia[i]], tb[ib[j]]
                close = abs(x - y) <= w
                similar = np.linalg.norm(da[ia[i]] - db[ib[j]]) <= 0.5 * max(sa[ia[i]], sb[ib[j]])
                if close and similar:
                    us.append(y)
                    vs.append(x)
                    i += 1
                    j += 1
                elif x < y:
                    i += 1
                else:
                    j += 1
            if not us:
                continue
            for u, v in (_global_nodes(us, vs, T), _local_nodes(us, vs, T)):
                cost = max(float(np.max(np.abs(u - v))), sup_distance(time_change(f, u, v), g))
                best = min(best, cost)
    return best


def _global_nodes(us, vs, T):
    return np.concatenate([[0.0], us, [T]]), np.concatenate([[0.0], vs, [T]])


def _local_nodes(us, vs, T):
    # identity outside a small window around each matched pair
    nodes = [(0.0, 0.0)]
    for y, x in zip(us, vs):
        d = abs(x - y)
        for node in ((min(x, y) - d, min(x, y) - d), (y, x), (max(x, y) + d, max(x, y) + d)):
            if 0 < node[0] < T and 0 < node[1] < T and node[0] > nodes[-1][0] and node[1] > nodes[-1][1]:
                nodes.append(node)
    nodes.append((T, T))
    arr = np.array(nodes)
    return arr[:, 0], arr[:, 1]


def skorokhod_distance(f, g, T=None):
    """Skorokhod J1 distance on ``[0, T]``.

    ``inf_lam max(|lam - id|, |f o lam - g|)`` over increasing bijections.
    Exact for pairs of step paths with few jumps (dynamic programming over
    order-preserving jump matchings); otherwise the smallest value among the
    uniform distance and a few jump-aligning piecewise-linear time changes,
    which is a certified upper bound.
    """
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    if T is not None and (float(T) != f.horizon or float(T) != g.horizon):
        f, g = f.stop(min(float(T), f.horizon)), g.stop(min(float(T), g.horizon))
    if f.horizon != g.horizon:
        raise ValueError("paths must share the horizon")
    if f.is_step and g.is_step:
        na = f.jumps()[0].size
        nb = g.jumps()[0].size
        if na <= EXACT_J1_MAX_JUMPS and nb <= EXACT_J1_MAX_JUMPS:
            return _j1_exact_steps(f, g)
    return _j1_aligned_bound(f, g)


# spec strings ----------------------------------------------------------

_KINDS = ("step", "fs", "pl")
_SPLIT = re.compile(r"\+(?=(?:%s):)" % "|".join(_KINDS))


def read_path_csv(path_or_file, horizon=None):
    """Read interpolation nodes from a CSV with header ``t,x1[,x2,...]``."""
    close = False
    fh = path_or_file
    if isinstance(path_or_file, str):
        fh = open(path_or_file, newline="")
        close = True
    try:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    finally:
        if close:
            fh.close()
    if not rows or rows[0][0].strip() != "t":
        raise ValueError("path CSV needs a header starting with 't'")
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("path CSV needs at least one coordinate column")
    t = data[:, 0]
    if horizon is not None and t[-1] < horizon:
        t = np.append(t, horizon)
        data = np.vstack([data, data[-1]])
    return CadlagPath(t, data[:, 1:])


def _parse_one(spec, part, offset, seed, horizon):
    kind, body, off = split_kind(part)
    off += offset
    if kind == "step":
        T = horizon
        jumps = []
        pos = off
        for item in body.split(";") if body else []:
            key, eq, value = item.partition("=")
            if not eq:
                raise SpecError("expected time=jump", spec, item, pos)
            if key.strip() == "T":
                T = parse_number(value, spec, pos + len(key) + 1)
            else:
                s = parse_number(key, spec, pos)
                vec = [parse_number(v, spec, pos + len(key) + 1) for v in value.split("|")]
                jumps.append((s, vec))
            pos += len(item) + 1
        try:
            return step_path(jumps, T if T is not None else 1.0)
        except ValueError as exc:
            raise SpecError(str(exc), spec, body, off) from None
    if kind == "fs":
        opts = {"levels": None, "seed": seed, "T": horizon, "dim": 1}
        for key, value, pos in parse_pairs(spec, body, off):
            vpos = pos + len(key) + 1
            if key in ("levels", "seed", "dim"):
                opts[key] = parse_number(value, spec, vpos, int)
            elif key == "T":
                opts["T"] = parse_number(value, spec, vpos)
            else:
                raise SpecError("unknown key", spec, key, pos)
        if opts["levels"] is None:
            raise SpecError("missing levels", spec, part, off)
        return faber_schauder_path(opts["levels"], seed=42 if opts["seed"] is None else opts["seed"],
                                   horizon=opts["T"] if opts["T"] is not None else 1.0, dim=opts["dim"])
    if kind == "pl":
        pairs = parse_pairs(spec, body, off)
        fname = None
        for key, value, pos in pairs:
            if key == "file":
                fname = value
            else:
                raise SpecError("unknown key", spec, key, pos)
        if fname is None:
            raise SpecError("missing file", spec, part, off)
        try:
            return read_path_csv(fname, horizon)
        except (OSError, ValueError) as exc:
            raise SpecError(f"cannot read path file ({exc})", spec, fname, off) from None
    raise SpecError("unknown path kind", spec, kind, offset)


def parse_path_spec(spec, seed=None, horizon=None):
    """Parse ``step:0.5=2.0;0.75=-1.0``, ``fs:levels=14,seed=42`` or ``pl:file=nodes.csv``.

    Several specs joined by ``+`` are summed, e.g.
    ``fs:levels=12,seed=42+step:0.3183098861837907=1``. Vector jumps use
    ``|`` between coordinates.
    """
    parts = _SPLIT.split(spec)
    paths = []
    offset = 0
    for part in parts:
        paths.append(_parse_one(spec, part, offset, seed, horizon))
        offset += len(part) + 1
    out = paths[0]
    for p in paths[1:]:
        if p.horizon != out.horizon:
            raise SpecError("summed paths must share the horizon", spec, spec, 0)
        out = out + p
    return out
