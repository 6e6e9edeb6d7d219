"""Quadratic sums along partitions, their limits and Stieltjes integrals against them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._report import ConvergenceReport, make_report
from .path import CadlagPath, _grid_for, skorokhod_distance

__all__ = [
    "QvResult",
    "increments",
    "quadratic_sums",
    "qv_level",
    "qv_estimate",
    "qv_matrix",
    "polarise",
    "decompose_qv",
    "jump_qv",
    "weighted_quad_sum",
    "stieltjes_integral",
    "QuadraticVariation",
    "ConvergenceReport",
]


def increments(x, p):
    """Grid points and forward increments ``x(t_{i+1}) - x(t_i)``.

    The increment at the last point is 0 (the path is frozen after its
    horizon). Returns ``(points, deltas)`` with `deltas` of shape (K+1, m).
    """
    pts = _grid_for(x, p)
    xv = x.eval(pts)
    d = np.zeros_like(xv)
    d[:-1] = np.diff(xv, axis=0)
    return pts, d


def _outer_flat(d):
    if d.shape[1] == 1:
        return d * d
    return (d[:, :, None] * d[:, None, :]).reshape(d.shape[0], -1)


def _cum_step(pts, inc):
    vals = np.cumsum(inc, axis=0)
    lefts = np.vstack([np.zeros((1, inc.shape[1])), vals[:-1]])
    return CadlagPath(pts, vals, lefts)


def quadratic_sums(x, p):
    """Step path ``q_n(t) = sum_{t_i <= t} dx_i dx_i'`` (flattened m*m columns)."""
    pts, d = increments(x, p)
    return _cum_step(pts, _outer_flat(d))


def _shape_value(v, m):
    v = np.asarray(v, dtype=float)
    return float(v[0]) if m == 1 else v.reshape(m, m)


def qv_level(x, p, t=None):
    """``q_n(t)`` for the partition `p`; scalar for 1-d paths, matrix otherwise."""
    q = quadratic_sums(x, p)
    t = q.horizon if t is None else t
    return _shape_value(q.eval(t), x.dim)


def jump_qv(x):
    """Step path ``sum_{s <= t} dx(s) dx(s)'`` over the explicit jumps of `x`.

    For a piecewise-affine path this is also the exact quadratic variation
    along any partition sequence with vanishing mesh.
    """
    d = x.jump_array
    return _cum_step(x.times, _outer_flat(d))


def _continuous_estimate(x, p):
    # sums of squared increments of the continuous part, interpolated linearly
    pts, d = increments(x.continuous_part(), p)
    inc = _outer_flat(d)
    vals = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc[:-1], axis=0)])
    return CadlagPath(pts, vals)


@dataclass
class QvResult:
    """Quadratic sums over a range of levels and the limit estimate.

    Attributes
    ----------
    levels : list of int
    paths : dict
        Level -> step path ``q_n`` (flattened matrix columns for m > 1).
    limit : CadlagPath
        Continuous part estimated at the top level plus exact jump products.
    continuous_part : CadlagPath
    jump_part : dict
        Jump time -> ``dx dx'``.
    cauchy_diags : ndarray
        ``d_J1(q_n, q_{n+1})`` for consecutive levels.
    converged : bool
    tol : float
    dim : int
    """

    levels: list
    paths: dict
    limit: CadlagPath
    continuous_part: CadlagPath
    jump_part: dict
    cauchy_diags: np.ndarray
    converged: bool
    tol: float
    dim: int

    @property
    def verdict(self):
        return "converged" if self.converged else "diverged"

    def q(self, n, t=None):
        """``q_n(t)`` as scalar or matrix."""
        path = self.paths[n]
        t = path.horizon if t is None else t
        return _shape_value(path.eval(t), self.dim)

    def limit_at(self, t=None):
        t = self.limit.horizon if t is None else t
        return _shape_value(self.limit.eval(t), self.dim)


def _assemble(x, seq, levels, paths, tol, tail):
    diags = np.array([skorokhod_distance(paths[a], paths[b]) for a, b in zip(levels, levels[1:])])
    cont = _continuous_estimate(x, seq[levels[-1]])
    jq = jump_qv(x)
    limit = cont + jq
    times, sizes = x.jumps()
    jumps = {float(s): _shape_value(_outer_flat(a[None, :])[0], x.dim) for s, a in zip(times, sizes)}
    converged = bool(diags.size and np.all(diags[-tail:] < tol))
    return QvResult(list(levels), paths, limit, cont, jumps, diags, converged, float(tol), x.dim)


def qv_estimate(x, seq, levels=None, tol=1e-3, tail=2):
    """Quadratic sums over several levels with a Skorokhod-Cauchy verdict.

    Parameters
    ----------
    x : CadlagPath
    seq : PartitionSequence
    levels : list of int, optional
        Defaults to all levels of `seq`; at least two are needed.
    tol : float
        The verdict is "converged" when the last `tail` distances
        ``d_J1(q_n, q_{n+1})`` are below `tol`.

    Returns
    -------
    QvResult
    """
    levels = list(seq.levels if levels is None else levels)
    if len(levels) < 2:
        raise ValueError("qv_estimate needs at least two levels")
    paths = {n: quadratic_sums(x, seq[n]) for n in levels}
    return _assemble(x, seq, levels, paths, tol, tail)


def polarise(q_i, q_j, q_sum):
    """``(q_sum - q_i - q_j) / 2`` on a common grid."""
    for q in (q_j, q_sum):
        if q.times.shape != q_i.times.shape or not np.array_equal(q.times, q_i.times):
            raise ValueError("polarise needs paths on a common grid")
    vals = 0.5 * (q_sum.values - q_i.values - q_j.values)
    lefts = 0.5 * (q_sum.left_values - q_i.left_values - q_j.left_values)
    return CadlagPath(q_i.times, vals, lefts)


def qv_matrix(x, seq, T=None, tol=1e-3, levels=None, tail=2):
    """Matrix quadratic variation built from coordinate sums by polarisation.

    Diagonal entries are the quadratic sums of each coordinate, off-diagonal
    entries come from :func:`polarise` applied to ``x_i + x_j``.
    """
    m = x.dim
    levels = list(seq.levels if levels is None else levels)
    if len(levels) < 2:
        raise ValueError("qv_matrix needs at least two levels")
    coords = [x.coordinate(i) for i in range(m)]
    paths = {}
    for n in levels:
        p = seq[n]
        diag = [quadratic_sums(c, p) for c in coords]
        cols = np.empty((diag[0].times.size, m * m))
        lcols = np.empty_like(cols)
        for i in range(m):
            for j in range(i, m):
                if i == j:
                    qij = diag[i]
                else:
                    qij = polarise(diag[i], diag[j], quadratic_sums(coords[i] + coords[j], p))
                for a, b in ((i, j), (j, i)):
                    cols[:, a * m + b] = qij.values[:, 0]
                    lcols[:, a * m + b] = qij.left_values[:, 0]
        paths[n] = CadlagPath(diag[0].times, cols, lcols)
    res = _assemble(x, seq, levels, paths, tol, tail)
    res.value_at_T = res.limit_at(T)
    return res


def decompose_qv(limit, x, atol=1e-9):
    """Split a quadratic-variation estimate into continuous and jump parts.

    Returns
    -------
    continuous_part : CadlagPath
        ``limit`` minus the accumulated ``dx dx'`` of the jumps of `x`.
    jump_part : dict
        Jump time -> ``dx dx'``.

    Raises
    ------
    ValueError
        If the continuous part decreases by more than `atol` (scalar case) or
        has increments with an eigenvalue below ``-atol`` (matrix case).
    """
    jq = jump_qv(x)
    cont = limit - jq
    m = x.dim
    v = np.vstack([cont.left_values[:1], cont.values])
    inc = np.diff(v, axis=0)
    inc = np.vstack([inc, cont.values[1:] - cont.left_values[1:]])
    if m == 1:
        worst = float(inc.min()) if inc.size else 0.0
    else:
        mats = inc.reshape(-1, m, m)
        worst = float(np.linalg.eigvalsh(0.5 * (mats + mats.transpose(0, 2, 1))).min())
    if worst < -atol:
        raise ValueError(f"continuous part of the quadratic variation decreases by {-worst:.3g}")
    times, sizes = x.jumps()
    jumps = {float(s): _shape_value(_outer_flat(a[None, :])[0], m) for s, a in zip(times, sizes)}
    return cont, jumps


# Stieltjes integrals -----------------------------------------------------

_GL = {}


def _gauss(order):
    if order not in _GL:
        _GL[order] = np.polynomial.legendre.leggauss(order)
    return _GL[order]


def _call(f, t):
    t = np.asarray(t, dtype=float)
    try:
        out = np.asarray(f(t), dtype=float)
        if out.shape[:1] != t.shape[:1] or (out.ndim == 0 and t.size != 1):
            raise ValueError
    except (TypeError, ValueError):
        out = np.array([np.asarray(f(float(s)), dtype=float) for s in t])
    return out.reshape(t.size, -1)


def stieltjes_integral(f, g, T=None, *, f_left=None, left_continuous=False, order=8):
    """``sum_k int_0^T f_k(s-) dg_k(s)`` for a piecewise-affine BV path `g`.

    Atoms of `g` (including one at 0 when ``g(0-) != g(0)``) are weighted by
    ``f(s-)``; affine pieces use Gauss-Legendre quadrature of `order` nodes.

    Parameters
    ----------
    f : callable
        Vectorised function of time returning shape (n,) or (n, k) with
        ``k == g.dim``; scalar output is broadcast over the columns of `g`.
    g : CadlagPath
    T : float, optional
        Upper limit, default ``g.horizon``.
    f_left : callable, optional
        Analytic left limit ``s -> f(s-)``.
    left_continuous : bool
        Declare ``f(s-) = f(s)``.
    """
    T = g.horizon if T is None else float(T)
    if not 0 <= T <= g.horizon:
        raise ValueError("T outside the integrator's horizon")
    b = g.times
    k_end = int(np.searchsorted(b, T, side="right"))
    d = g.jump_array[:k_end]
    atoms = np.flatnonzero(np.any(d != 0, axis=1))
    total = 0.0
    if atoms.size:
        s = b[atoms]
        if left_continuous:
            w = _call(f, s)
        elif f_left is not None:
            w = _call(f_left, s)
        else:
            h = max(T, 1.0) * 2.0**-40
            w = _call(f, np.where(s - h > 0, s - h, s))
        total += float(np.sum(w * d[atoms]))
    # affine pieces on [b_k, b_{k+1}] clipped to [0, T]
    lo = b[:-1]
    hi = np.minimum(b[1:], T)
    slope = (g.left_values[1:] - g.values[:-1]) / (b[1:] - b[:-1])[:, None]
    live = (hi > lo) & np.any(slope != 0, axis=1)
    if np.any(live):
        nodes, weights = _gauss(order)
        a, c, sl = lo[live], hi[live], slope[live]
        half = 0.5 * (c - a)
        ts = (0.5 * (c + a))[:, None] + half[:, None] * nodes[None, :]
        vals = _call(f, ts.ravel()).reshape(ts.shape[0], order, -1)
        seg = np.einsum("sok,o->sk", vals, weights) * half[:, None]
        total += float(np.sum(seg * sl))
    return total


def weighted_quad_sum(f, x, seq, variant="i", T=None, levels=None, tol=1e-6, reference=None):
    """Weighted quadratic Riemann sums along each level.

    Variants:

    * ``'i'``   ``sum_{t_i <= T} f(t_i) |dx_i|^2``
    * ``'ii'``  ``sum_{t_i <= T} f(t_{i+1} ^ T) |dx_i|^2``
    * ``'iii'`` ``sum_{t_i < T} f(t_i) |dx_i|^2``
    * ``'iv'``  ``sum_{t_i < T} f(t_{i+1} ^ T) |dx_i|^2``

    `f` is a vectorised left-continuous function of time. For m-d paths the
    squared norm (trace of the outer product) is used. When `reference` is
    None it is ``stieltjes_integral(f, [x], T)`` with ``[x]`` the top-level
    estimate of :func:`qv_estimate`.

    Returns
    -------
    ConvergenceReport
    """
    if variant not in ("i", "ii", "iii", "iv"):
        raise ValueError(f"unknown variant {variant!r}")
    T = x.horizon if T is None else float(T)
    levels = list(seq.levels if levels is None else levels)
    values = []
    for n in levels:
        pts, d = increments(x, seq[n])
        sq = np.sum(d * d, axis=1)
        nxt = np.append(pts[1:], pts[-1])
        mask = pts <= T if variant in ("i", "ii") else pts < T
        at = pts if variant in ("i", "iii") else np.minimum(nxt, T)
        w = _call(f, at[mask])[:, 0]
        values.append(float(np.sum(w * sq[mask])))
    if reference is None:
        lim = _continuous_estimate(x, seq[levels[-1]]) + jump_qv(x)
        tr = lim.linear_map(np.eye(x.dim).reshape(-1, 1))
        reference = stieltjes_integral(f, tr, T, left_continuous=True)
    return make_report(levels, values, tol, reference=float(reference), variant=variant)


class QuadraticVariation(TransformerMixin, BaseEstimator):
    """Estimator-style front end to :func:`qv_estimate`.

    Parameters
    ----------
    partition : str or PartitionSequence, default='dyadic:T=1.0,levels=4..14'
    tol : float, default=1e-3

    Attributes
    ----------
    result_ : QvResult
    limit_ : CadlagPath
    converged_ : bool

    Examples
    --------
    >>> from pathcalc.path import step_path
    >>> qv = QuadraticVariation("dyadic:T=1,levels=2..6").fit(step_path([(0.5, 2.0)]))
    >>> float(qv.transform([1.0])[0, 0])
    4.0
    """

    def __init__(self, partition="dyadic:T=1.0,levels=4..14", tol=1e-3):
        self.partition = partition
        self.tol = tol

    def fit(self, x, y=None):
        from .partition import parse_partition_spec

        seq = parse_partition_spec(self.partition) if isinstance(self.partition, str) else self.partition
        self.result_ = qv_estimate(x, seq, tol=self.tol)
        self.limit_ = self.result_.limit
        self.converged_ = self.result_.converged
        return self

    def transform(self, t):
        """Limit estimate ``[x](t)`` at the given times, shape (n, m*m)."""
        check_is_fitted(self, "result_")
        return np.atleast_2d(self.limit_.eval(np.atleast_1d(np.asarray(t, dtype=float))))
