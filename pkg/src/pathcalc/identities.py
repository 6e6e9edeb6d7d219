"""Product-rule, 1-form and harmonic identities, the fair-game probe and counterexample demos."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._base import ambient, as_functional
from .families import BracketFunctional, FollmerFunctional, JumpAtFunctional, OneFormFunctional
from .functional import numeric_dt, numeric_hess, pi_continuity_report, uniform_continuity_probe
from .integrate import riemann_sum
from .path import CadlagPath, pc_approx, pl_approx, skorokhod_distance, step_path, sup_distance
from .quadvar import increments, jump_qv, qv_estimate

__all__ = [
    "IdentityResidual",
    "bracket",
    "kw_check",
    "one_form_identity_check",
    "HarmonicResult",
    "harmonic_check",
    "FairGameResult",
    "fair_game_probe",
    "demo_prop11",
    "demo_U_discontinuity",
    "demo_compare_iii",
]


@dataclass
class IdentityResidual:
    """Both sides of an identity per level.

    ``residual = lhs - sum(rhs.values())`` elementwise.
    """

    levels: list
    lhs: np.ndarray
    rhs: dict
    residual: np.ndarray
    tol: float = 1e-3
    extra: dict = field(default_factory=dict)

    @property
    def converged(self):
        return bool(abs(self.residual[-1]) <= self.tol)

    @property
    def verdict(self):
        return "converged" if self.converged else "diverged"


def _residual(levels, lhs, rhs, tol, **extra):
    n = len(levels)
    lhs = np.broadcast_to(np.asarray(lhs, dtype=float), (n,)).copy()
    rhs = {k: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy() for k, v in rhs.items()}
    res = lhs - sum(rhs.values())
    return IdentityResidual(list(levels), lhs, rhs, res, float(tol), dict(extra))


def bracket(phi, psi):
    """``{phi, psi}(t, x) = [psi int phi dx + phi int psi dx](t, x_{t-})``."""
    return BracketFunctional(phi, psi)


def _vec(v, n, m):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = np.full(n, float(v))
    if v.ndim == 1:
        v = v[:, None]
    return np.broadcast_to(v, (n, m))


def _weighted_qv(w_fn, x, p, T):
    """``int <w(s, x_{s-}), d[x](s)>`` for a diagonal-pairing weight.

    ``w_fn(kind, arg)`` returns per-coordinate weights times increments: it
    is called as ``w_fn('grid', p)`` giving a function of the continuous
    increments, and ``w_fn('jump', u)`` for an explicit jump at u. The
    continuous part is summed on `p`, jumps exactly.
    """
    total = 0.0
    if not x.is_step:
        pts, dc = increments(x.continuous_part(), p)
        keep = pts < T
        total += float(np.sum(w_fn("grid", p)(dc)[keep]))
    jt, js = x.jumps()
    for u, a in zip(jt, js):
        if u <= T:
            total += float(w_fn("jump", u)(a[None, :])[0])
    return total


def kw_check(phi, psi, x, seq, T=None, levels=None, tol=1e-3):
    """Product rule for pathwise integrals, checked level by level.

    ``lhs_n = (int phi dx)_n (int psi dx)_n`` against
    ``int <phi psi', d[x]> + (int {phi, psi} dx)_n``. The quadratic term uses
    the top-level estimate of the continuous part and the exact jumps; the
    bracket is recomputed on each level.

    Returns
    -------
    IdentityResidual
    """
    phi, psi = as_functional(phi), as_functional(psi)
    levels = list(seq.levels if levels is None else levels)
    T = x.horizon if T is None else float(T)
    top = seq[levels[-1]]
    m = x.dim
    br = bracket(phi, psi)

    def w_fn(kind, arg):
        if kind == "grid":
            n = increments(x, arg)[0].size
            a = _vec(phi.along_pc(x, arg, left=True), n, m)
            b = _vec(psi.along_pc(x, arg, left=True), n, m)
            return lambda d: np.sum(a * d, axis=1) * np.sum(b * d, axis=1)
        y = x.stop_left(arg)
        a = _vec(phi(arg, y), 1, m)
        b = _vec(psi(arg, y), 1, m)
        return lambda d: np.sum(a * d, axis=1) * np.sum(b * d, axis=1)

    with ambient(top):
        qv_term = _weighted_qv(w_fn, x, top, T)
        lhs, brk = [], []
        for n in levels:
            p = seq[n]
            lhs.append(riemann_sum(phi, x, p, T) * riemann_sum(psi, x, p, T))
            brk.append(riemann_sum(br, x, p, T))
    return _residual(levels, lhs, {"qv": qv_term, "bracket": brk}, tol)


def one_form_identity_check(fs, x, seq, T=None, levels=None, tol=1e-3):
    """Integral of the path-dependent 1-form ``(int f_i(x_i) dx_i)(t-)``.

    ``lhs_n`` is its left Riemann sum; the right side is
    ``sum_i [int (x_i(T) - x_i) f_i(x_i) dx_i - int f_i(x_i) d[x_i]]`` with the
    first integral summed on the same level and the second taken against the
    top-level quadratic variation estimate.
    """
    form = OneFormFunctional(fs)
    levels = list(seq.levels if levels is None else levels)
    T = x.horizon if T is None else float(T)
    top = seq[levels[-1]]
    xT = x.eval(T)

    def w_fn(kind, arg):
        if kind == "grid":
            fx = form._f(x.eval(increments(x, arg)[0]))
            return lambda d: np.sum(fx * d * d, axis=1)
        fx = form._f(x.eval_left(arg)[None, :])
        return lambda d: np.sum(fx * d * d, axis=1)

    with ambient(top):
        qv_term = _weighted_qv(w_fn, x, top, T)
        lhs, first = [], []
        for n in levels:
            p = seq[n]
            lhs.append(riemann_sum(form.grad, x, p, T))
            pts, d = increments(x, p)
            xs = x.eval(pts)
            terms = np.sum((xT - xs) * form._f(xs) * d, axis=1)
            first.append(float(np.sum(terms[pts <= T])))
    return _residual(levels, lhs, {"drift": first, "qv": -qv_term}, tol)


# harmonic functionals -----------------------------------------------------------


@dataclass
class HarmonicResult:
    """PDE residual samples and the martingale-representation residual."""

    times: np.ndarray
    pde_residual: np.ndarray
    representation: IdentityResidual
    membership_error: float

    @property
    def pde_max(self):
        return float(np.max(np.abs(self.pde_residual)))


def _sigma(Sigma, t, y, m):
    s = Sigma(t, y) if callable(Sigma) else Sigma
    s = np.asarray(s, dtype=float)
    return s * np.eye(m) if s.ndim == 0 else s.reshape(m, m)


def harmonic_check(F, Sigma, x, seq, T=None, levels=None, n_samples=33, windows=8, rel_tol=0.1,
                   tol=1e-2):
    """Check the PDE and the representation of a harmonic functional.

    Parameters
    ----------
    F : Functional
    Sigma : float, ndarray or callable ``(t, x_t) -> matrix``
        Target quadratic-variation density ``d[x]/dt``.
    x : CadlagPath
    seq : PartitionSequence
    windows : int
        Number of equal windows on which ``d[x]/dt`` is compared with
        `Sigma` (finite differences of the top-level estimate).
    rel_tol : float
        Relative tolerance of that comparison (absolute on windows where
        `Sigma` is zero).

    Raises
    ------
    ValueError
        When the path's quadratic variation density is not within `rel_tol`
        of `Sigma`.
    """
    levels = list(seq.levels if levels is None else levels)
    T = x.horizon if T is None else float(T)
    m = x.dim
    res = qv_estimate(x, seq, levels=levels[-2:], tol=np.inf)
    L = res.limit
    edges = np.linspace(0.0, T, windows + 1)
    worst = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        slope = (L.eval(b) - L.eval(a)) / (b - a)
        mids = np.linspace(a, b, 5)
        target = np.mean([_sigma(Sigma, s, x.stop(s), m) for s in mids], axis=0).ravel()
        scale = np.linalg.norm(target)
        # absolute error where Sigma vanishes
        err = float(np.linalg.norm(slope - target) / (scale if scale > 0 else 1.0))
        worst = max(worst, err)
    if worst > rel_tol:
        raise ValueError(f"quadratic variation density deviates from Sigma by {worst:.3g} "
                         f"(relative tolerance rel_tol={rel_tol})")

    D = F.dt if F.dt is not None else numeric_dt(F)
    H = F.hess if F.hess is not None else numeric_hess(F)
    ts = np.linspace(0.0, T, n_samples)
    pde = []
    with ambient(seq[levels[-1]]):
        for t in ts:
            y = x.stop(t)
            h = np.asarray(H(t, y), dtype=float).reshape(m, m)
            pde.append(float(D(t, y)) + 0.5 * float(np.sum(h * _sigma(Sigma, t, y, m))))
        lhs = float(F(T, x)) - float(F(0.0, x.stop(0.0)))
        integ = [riemann_sum(F.grad, x, seq[n], T) for n in levels]
    rep = _residual(levels, lhs, {"integral": integ}, tol)
    return HarmonicResult(ts, np.array(pde), rep, worst)


# fair game ---------------------------------------------------------------------------


@dataclass
class FairGameResult:
    """Outcome of the fair-game construction.

    Attributes
    ----------
    verdict : {'certified', 'no-op', 'failed'}
    t_star : float or None
    level : int
    path : CadlagPath or None
        Path on which ``M(t_star, path) - M(0, x_0) < 0``.
    value : float
        That difference.
    reverified : float
        The same difference recomputed on a path rebuilt from raw arrays.
    """

    verdict: str
    t_star: float | None
    level: int
    path: CadlagPath | None
    value: float
    reverified: float

    @property
    def certified(self):
        return self.verdict == "certified"


def fair_game_probe(M, x, seq, eps=0.5, level=None, atol=1e-12):
    """Build a path on which a class-M functional falls below its start value.

    Along the step approximation on the chosen level, the first grid time
    ``t*`` at which the functional exceeds ``M(0, x_0)`` is located; the
    approximation is stopped just before ``t*`` and its jump there replaced
    by ``-eps`` times that jump. If the functional never exceeds its start
    value but drops below it, the approximation stopped at the first such
    grid time is returned instead; if it never moves the verdict is "no-op".
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = seq.levels[-1] if level is None else level
    p = seq[n]
    with ambient(p):
        base = float(M(0.0, x.stop(0.0)))
        vals = np.asarray(M.along_pc(x, p, left=False), dtype=float)
        xn = pc_approx(x, p)
        scale = atol * max(1.0, abs(base))
        above = np.flatnonzero(vals > base + scale)
        below = np.flatnonzero(vals < base - scale)
        if above.size:
            i = int(above[0])
            t_star = float(xn.times[i])
            z = xn.stop_left(t_star).vertical_perturb(t_star, -eps * xn.jump(t_star))
        elif below.size:
            t_star = float(xn.times[int(below[0])])
            z = xn.stop(t_star)
        else:
            return FairGameResult("no-op", None, n, None, 0.0, 0.0)
        value = float(M(t_star, z)) - base
        z2 = CadlagPath(z.times.copy(), z.values.copy(), z.left_values.copy())
        again = float(M(t_star, z2)) - base
    verdict = "certified" if value < 0 and abs(again - value) <= 1e-10 else "failed"
    return FairGameResult(verdict, t_star, n, z, value, again)


# counterexamples ---------------------------------------------------------------------


def demo_prop11(alpha, seq):
    """Jump at a time outside every grid, yet convergent quadratic variation.

    Parameters
    ----------
    alpha : float, str or Fraction
        Jump time in ``(0, T)``; strings such as ``"1/3"`` are exact.
    seq : PartitionSequence

    Returns
    -------
    dict
        ``membership`` (level -> bool, exact rational test), ``j1`` (Cauchy
        distances between consecutive quadratic sums), ``j1_to_limit``
        (distance of the top level to ``1_{[alpha, T]}``) and ``qv``.
    """
    a = Fraction(alpha) if isinstance(alpha, str) else Fraction(alpha)
    T = seq.horizon
    if not 0 < a < Fraction(T):
        raise ValueError("alpha must lie in (0, T)")
    membership = {n: seq[n].contains(a) for n in seq.levels}
    x = step_path([(float(a), 1.0)], horizon=T)
    res = qv_estimate(x, seq, tol=2.0 ** -(seq.levels[-1] - 1))
    target = jump_qv(x)
    top = res.paths[seq.levels[-1]]
    return {
        "alpha": float(a),
        "membership": membership,
        "levels": list(seq.levels),
        "j1": res.cauchy_diags,
        "j1_to_limit": skorokhod_distance(top, target),
        "qv": res,
    }


def demo_U_discontinuity(x, seq, T=None):
    """Uniform approximation that does not carry the quadratic variation.

    For each level the piecewise-linear interpolant ``x^(n)`` is compared with
    `x`: the uniform distance shrinks while ``[x^(n)](T) = 0`` stays away from
    ``[x](T)``; ``G = int 2x dx`` shows the same gap.

    Returns
    -------
    dict with ``applicable``, ``levels``, ``sup_distance``, ``qv_gap`` and
    ``G_gap`` arrays.
    """
    T = x.horizon if T is None else float(T)
    levels = list(seq.levels)
    if x.jumps()[0].size and np.any(x.jumps()[0] > 0):
        return {"applicable": False, "reason": "path has jumps", "levels": levels}
    res = qv_estimate(x, seq, tol=np.inf)
    qx = float(np.trace(np.atleast_2d(res.limit_at(T))))
    G = FollmerFunctional("square")
    with ambient(seq[levels[-1]]):
        gx = float(G(T, x))
    sup, qgap, ggap = [], [], []
    for n in levels:
        xn = pl_approx(x, seq[n])
        sup.append(sup_distance(xn.stop(T), x.stop(T)))
        qn = float(np.trace(np.atleast_2d(jump_qv(xn).eval(T).reshape(x.dim, x.dim))))
        qgap.append(abs(qn - qx))
        # the integral of a continuous bounded-variation path is exact
        gn = float(xn.eval(T) @ xn.eval(T) - xn.eval(0.0) @ xn.eval(0.0)) - qn
        ggap.append(abs(gn - gx))
    return {"applicable": True, "levels": levels, "sup_distance": np.array(sup), "qv_gap": np.array(qgap),
            "G_gap": np.array(ggap), "qv": qx}


def demo_compare_iii(seq, t0="1/3", x=None, tol=1e-6):
    """``F(t, x) = |dx_t(t0)|`` is uniformly continuous but fails criterion 2(c).

    Returns
    -------
    dict with the uniform-continuity probe, the continuity report at ``t0``
    and the two headline booleans ``u_continuous`` and ``fails_2c``.
    """
    t0 = float(Fraction(t0)) if isinstance(t0, str) else float(t0)
    x = step_path([(t0, 1.0)], horizon=seq.horizon) if x is None else x
    F = JumpAtFunctional(t0)
    u = uniform_continuity_probe(F, t0, x, tol=tol)
    rep = pi_continuity_report(F, x, t0, seq, tol=tol)
    return {"u_probe": u, "report": rep, "u_continuous": u["passed"], "fails_2c": not rep["2c"].passed}
