"""Causal functionals: numeric derivatives, causality and continuity probes, builtins.

A functional is evaluated as ``F(t, x)`` where `x` is a :class:`CadlagPath`;
builtins only read `x` on ``[0, t]``. Analytic derivatives are exposed as the
functionals ``F.dt``, ``F.grad`` and ``F.hess`` (None when unknown).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._base import (
    DEFAULT_LEVEL,
    ZERO,
    Constant,
    Functional,
    LeftStopped,
    Outer,
    Product,
    Scaled,
    Sum,
    ambient,
    ambient_grid,
    as_functional,
)
from ._spec import SpecError, parse_number, parse_pairs, split_kind
from .families import (
    SCALAR_FUNCTIONS,
    BracketFunctional,
    FollmerFunctional,
    IntegralFunctional,
    JumpAtFunctional,
    LeftPointFunctional,
    OneFormFunctional,
    PointFunctional,
    QvEvalFunctional,
    QvIntegralFunctional,
    eval_functional,
    heat_polynomial,
    left_eval,
    markov_affine,
)
from .path import CadlagPath, pc_approx

__all__ = [
    "Functional",
    "Constant",
    "ZERO",
    "Sum",
    "Scaled",
    "Product",
    "Outer",
    "LeftStopped",
    "as_functional",
    "ambient",
    "ambient_grid",
    "DEFAULT_LEVEL",
    "PointFunctional",
    "LeftPointFunctional",
    "FollmerFunctional",
    "QvIntegralFunctional",
    "QvEvalFunctional",
    "OneFormFunctional",
    "IntegralFunctional",
    "BracketFunctional",
    "JumpAtFunctional",
    "SCALAR_FUNCTIONS",
    "DerivativeResult",
    "horizontal_derivative",
    "vertical_derivative",
    "vertical_hessian",
    "numeric_dt",
    "numeric_grad",
    "numeric_hess",
    "strict_causality_probe",
    "causality_details",
    "ContinuityReport",
    "CriterionResult",
    "pi_continuity_report",
    "vertical_modulus_estimate",
    "local_boundedness_probe",
    "uniform_continuity_probe",
    "builtin",
    "parse_functional_spec",
    "eval_functional",
    "left_eval",
    "markov_affine",
    "heat_polynomial",
]

DEFAULT_BUMPS = 2.0 ** -np.arange(4, 13)
DERIV_TOL = 1e-7


# numeric derivatives ---------------------------------------------------------


@dataclass
class DerivativeResult:
    """Extrapolated finite-difference estimate.

    Attributes
    ----------
    value : float or ndarray
    converged : bool
        Successive Richardson extrapolants agreed to `tol`.
    table : list
        Extrapolants in schedule order.
    """

    value: object
    converged: bool
    table: list = field(default_factory=list)

    @property
    def verdict(self):
        return "converged" if self.converged else "diverged"


def _richardson(raw_fn, steps, order, tol):
    """Evaluate ``raw_fn(h)`` lazily along `steps`, extrapolate, stop early."""
    steps = np.asarray(steps, dtype=float)
    if steps.size < 2:
        raise ValueError("a derivative schedule needs at least two steps")
    prev_d = np.asarray(raw_fn(steps[0]), dtype=float)
    table = []
    for h0, h1 in zip(steps[:-1], steps[1:]):
        d = np.asarray(raw_fn(h1), dtype=float)
        r = (h1 / h0) ** order
        e = (d - r * prev_d) / (1.0 - r)
        table.append(e)
        if len(table) > 1:
            scale = max(1.0, float(np.max(np.abs(e))))
            if float(np.max(np.abs(e - table[-2]))) < tol * scale:
                return DerivativeResult(_out(e), True, table)
        prev_d = d
    return DerivativeResult(_out(table[-1]), False, table)


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def horizontal_derivative(F, t, x, h_schedule=None, tol=DERIV_TOL):
    """Forward-difference horizontal derivative on the path stopped at `t`.

    ``(F(t+h, x_t) - F(t, x_t)) / h`` over the schedule, first-order
    Richardson extrapolation.
    """
    steps = DEFAULT_BUMPS * x.horizon if h_schedule is None else np.asarray(h_schedule, dtype=float)
    steps = steps[t + steps <= x.horizon]
    if steps.size < 2:
        raise ValueError(f"t={t!r} too close to the horizon for the step schedule")
    y = x.stop(t)
    f0 = np.asarray(F(t, y), dtype=float)
    return _richardson(lambda h: (np.asarray(F(t + h, y)) - f0) / h, steps, 1, tol)


def _bump(y, t, e):
    return y.vertical_perturb(t, e)


def vertical_derivative(F, t, x, bump_schedule=None, tol=DERIV_TOL):
    """Central-difference vertical gradient, second-order Richardson.

    Returns a :class:`DerivativeResult` whose value has shape (m,) (or
    (m, ...) for vector-valued `F`).
    """
    steps = DEFAULT_BUMPS if bump_schedule is None else np.asarray(bump_schedule, dtype=float)
    y = x.stop(t)
    m = x.dim
    eye = np.eye(m)

    def raw(h):
        return np.stack([(np.asarray(F(t, _bump(y, t, h * eye[i])), dtype=float)
                          - np.asarray(F(t, _bump(y, t, -h * eye[i])), dtype=float)) / (2 * h)
                         for i in range(m)])

    return _richardson(raw, steps, 2, tol)


def vertical_hessian(F, t, x, bump_schedule=None, tol=DERIV_TOL):
    """Second-difference vertical Hessian, second-order Richardson."""
    steps = DEFAULT_BUMPS if bump_schedule is None else np.asarray(bump_schedule, dtype=float)
    y = x.stop(t)
    m = x.dim
    eye = np.eye(m)
    f0 = float(F(t, y))

    def val(e):
        return float(F(t, _bump(y, t, e)))

    def raw(h):
        H = np.empty((m, m))
        for i in range(m):
            H[i, i] = (val(h * eye[i]) - 2 * f0 + val(-h * eye[i])) / h**2
            for j in range(i + 1, m):
                a, b = eye[i], eye[j]
                H[i, j] = H[j, i] = (val(h * (a + b)) - val(h * (a - b)) - val(h * (b - a))
                                     + val(-h * (a + b))) / (4 * h**2)
        return H

    return _richardson(raw, steps, 2, tol)


class _Numeric(Functional):
    def __init__(self, f, kind, schedule=None):
        super().__init__(name=f"{kind}[{f.name}]")
        self.f, self.kind, self.schedule = f, kind, schedule
        self.last = None

    def evaluate(self, t, x):
        fn = {"dt": horizontal_derivative, "grad": vertical_derivative, "hess": vertical_hessian}[self.kind]
        res = fn(self.f, t, x, self.schedule)
        self.last = res
        v = res.value
        if self.kind == "grad" and np.ndim(v) == 1 and x.dim == 1:
            return np.asarray(v)
        return v


def numeric_dt(F, schedule=None):
    return _Numeric(F, "dt", schedule)


def numeric_grad(F, schedule=None):
    return _Numeric(F, "grad", schedule)


def numeric_hess(F, schedule=None):
    return _Numeric(F, "hess", schedule)


# causality ---------------------------------------------------------------


def causality_details(F, t, x, bumps=None, tol=1e-8):
    """Return ``(invariant, zero_gradient)`` for the two strict-causality probes."""
    m = x.dim
    bumps = np.array([1.0, -1.0, 0.5, -0.25, 1e-3]) if bumps is None else np.atleast_1d(bumps)
    if bumps.size == 0:
        raise ValueError("bumps must be nonempty")
    y = x.stop(t)
    f0 = np.asarray(F(t, y), dtype=float)
    scale = max(1.0, float(np.max(np.abs(f0))))
    invariant = True
    for e in bumps:
        for i in range(m):
            v = np.asarray(F(t, _bump(y, t, e * np.eye(m)[i])), dtype=float)
            if float(np.max(np.abs(v - f0))) > tol * scale:
                invariant = False
    g = vertical_derivative(F, t, x)
    zero_grad = bool(np.max(np.abs(g.value)) <= 1e-6 * scale)
    return invariant, zero_grad


def strict_causality_probe(F, t, x, bumps=None, tol=1e-8):
    """True when bumping the path at t never moves `F` and the numeric gradient vanishes."""
    inv, zg = causality_details(F, t, x, bumps, tol)
    return inv and zg


# pi-continuity ----------------------------------------------------------------

CRITERIA = ("1a", "1b", "1c", "1d", "2a", "2b", "2c", "2d")


@dataclass
class CriterionResult:
    """Per-level samples for one continuity criterion.

    ``values[k]`` is the worst sampled value at level ``levels[k]`` (NaN when
    the side constraint cannot be met there) and ``deviations[k]`` its
    distance to `target`.
    """

    label: str
    levels: list
    times: list
    values: list
    deviations: np.ndarray
    target: object
    tol: float

    @property
    def applicable(self):
        return bool(np.isfinite(self.deviations[-1]))

    @property
    def limit(self):
        return self.values[-1]

    @property
    def passed(self):
        return self.applicable and bool(self.deviations[-1] <= self.tol)

    @property
    def status(self):
        if not self.applicable:
            return "n/a"
        return "pass" if self.passed else "fail"


@dataclass
class ContinuityReport:
    """Outcome of the eight sequential continuity criteria at one (t, x)."""

    t: float
    criteria: dict

    def __getitem__(self, label):
        return self.criteria[label]

    @property
    def passed(self):
        return {k: c.passed for k, c in self.criteria.items()}

    @property
    def all_passed(self):
        return all(c.passed or not c.applicable for c in self.criteria.values())

    def summary(self):
        return {k: c.status for k, c in self.criteria.items()}


def _dist(a, b):
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def pi_continuity_report(F, x, t, seq, levels=None, tol=1e-3):
    """Sample the eight sequential continuity criteria at ``(t, x)``.

    Group 1 targets ``F(t, x_{t-})`` and group 2 ``F(t, x_t)``. Criteria (a)
    and (b) approach t along the raw path with offsets equal to the mesh of
    each level; (c) and (d) use the step approximation on ``pi_n`` at times
    positioned relative to ``t'_n = prev_point(pi_n, t)``. Several admissible
    times are sampled per level and the worst one is kept.
    """
    T = x.horizon
    if not 0 < t < T:
        raise ValueError(f"t={t!r} must lie in (0, {T!r})")
    levels = list(seq.levels if levels is None else levels)
    tgt1 = F(t, x.stop_left(t))
    tgt2 = F(t, x.stop(t))
    rows = {c: ([], [], []) for c in CRITERIA}

    for n in levels:
        p = seq[n]
        pts = p.points
        d = p.mesh
        tp = p.prev_point(t)
        xn = pc_approx(x, p)
        i_tp = int(np.searchsorted(pts, tp))
        prev_tp = float(pts[i_tp - 1]) if i_tp > 0 else None
        nxt_strict = p.straddle(t)[2]
        cand = {
            "1a": [(s, x.stop_left(s)) for s in (t - d, t - d / 2) if s >= 0],
            "1b": [(s, x.stop(s)) for s in (t - d, t - d / 2) if s >= 0],
            "2a": [(s, x.stop(s)) for s in (t + d, t + d / 2, t) if s <= T],
            "2b": [(s, x.stop_left(s)) for s in (t + d, t + d / 2) if s <= T],
            "1c": [(s, xn.stop_left(s)) for s in ([tp] + ([prev_tp] if prev_tp is not None else []))],
            "1d": [(s, xn.stop(s)) for s in ([prev_tp] if prev_tp is not None else [])],
            "2c": [(s, xn.stop(s)) for s in sorted({tp, t, nxt_strict}) if tp <= s <= T],
            "2d": [(s, xn.stop_left(s)) for s in sorted({t, nxt_strict}) if tp < s <= T],
        }
        for c in CRITERIA:
            target = tgt1 if c.startswith("1") else tgt2
            best = (np.nan, None, -1.0)
            for s, y in cand[c]:
                v = F(s, y)
                dev = _dist(v, target)
                if dev > best[2]:
                    best = (s, v, dev)
            rows[c][0].append(best[0])
            rows[c][1].append(best[1])
            rows[c][2].append(best[2] if best[1] is not None else np.nan)

    crit = {}
    for c in CRITERIA:
        ts, vs, devs = rows[c]
        crit[c] = CriterionResult(c, levels, ts, vs, np.asarray(devs, dtype=float),
                                  tgt1 if c.startswith("1") else tgt2, float(tol))
    return ContinuityReport(float(t), crit)


# empirical moduli and boundedness ------------------------------------------


def vertical_modulus_estimate(F, x, T, r, seq, n_t=5, n_ab=9, level=None):
    """Empirical modulus of vertical continuity on the ball of radius `r`.

    Samples ``|F(t, x^n_{t-} + a) - F(t, x^n_{t-} + b)|`` over ``t`` on the
    top-level grid below `T` and ``a, b`` on a grid of ``[-r, r]`` (along the
    diagonal direction for multi-dimensional paths).

    Returns
    -------
    dict with keys ``delta`` (sorted distinct ``|a - b|``) and ``modulus``
    (running maximum of the oscillation).
    """
    if not r > 0:
        raise ValueError("r must be positive")
    n = seq.levels[-1] if level is None else level
    p = seq[n]
    xn = pc_approx(x, p)
    grid = p.points[p.points <= T]
    ts = grid[np.unique(np.linspace(0, grid.size - 1, n_t).round().astype(int))]
    ab = np.linspace(-r, r, n_ab)
    direction = np.ones(x.dim) / np.sqrt(x.dim)
    osc = {}
    for t in ts:
        y = xn.stop_left(t)
        vals = [np.asarray(F(t, y.vertical_perturb(t, a * direction)), dtype=float) for a in ab]
        for i in range(n_ab):
            for j in range(i + 1, n_ab):
                dlt = round(float(ab[j] - ab[i]), 12)
                osc[dlt] = max(osc.get(dlt, 0.0), _dist(vals[i], vals[j]))
    delta = np.array(sorted(osc))
    modulus = np.maximum.accumulate(np.array([osc[d] for d in delta]))
    return {"delta": delta, "modulus": modulus}


def local_boundedness_probe(F, x, seq, T=None):
    """``max |F(t_i, x^n_{t_i})|`` over grid times ``t_i <= T`` at every level.

    Returns a dict with ``levels``, ``sup`` and ``growth`` (ratio of the last
    to the first level sup). No verdict: growth is a flag to inspect.
    """
    T = x.horizon if T is None else T
    sups = []
    for n, p in seq:
        vals = np.asarray(F.along_pc(x, p, left=False), dtype=float)
        keep = p.points <= T
        v = vals[keep].reshape(int(keep.sum()), -1)
        sups.append(float(np.max(np.abs(v))))
    sups = np.array(sups)
    growth = sups[-1] / sups[0] if sups[0] > 0 else (np.inf if sups[-1] > 0 else 1.0)
    return {"levels": list(seq.levels), "sup": sups, "growth": float(growth)}


def _random_continuous(rng, horizon, dim, nodes=16):
    times = np.linspace(0.0, horizon, nodes + 1)
    vals = rng.uniform(-1.0, 1.0, size=(nodes + 1, dim))
    return CadlagPath(times, vals)


def uniform_continuity_probe(F, t, x, deltas=None, n_samples=8, seed=0, tol=1e-6):
    """Probe continuity of ``y -> F(t, y_t)`` in the uniform norm at `x`.

    Draws ``y = x + delta h`` with continuous piecewise-linear ``h``,
    ``|h| <= 1``, and records the worst ``|F(t, y_t) - F(t, x_t)|`` per delta.

    Returns
    -------
    dict with ``delta``, ``deviation`` and ``passed``. The probe passes when
    the deviations are nonincreasing as delta shrinks (up to `tol`) and the
    one at the smallest delta is within ``tol + dev_max sqrt(delta_min /
    delta_max)``, i.e. they vanish at least at a square-root rate.
    """
    deltas = 2.0 ** -np.arange(2, 12) if deltas is None else np.asarray(deltas, dtype=float)
    rng = np.random.default_rng(seed)
    hs = [_random_continuous(rng, x.horizon, x.dim) for _ in range(n_samples)]
    f0 = F(t, x.stop(t))
    dev = []
    for d in deltas:
        worst = 0.0
        for h in hs:
            y = x + h * float(d)
            worst = max(worst, _dist(F(t, y.stop(t)), f0))
        dev.append(worst)
    dev = np.array(dev)
    order = np.argsort(-deltas)
    d_sorted, dev_sorted = deltas[order], dev[order]
    env_ok = bool(np.all(np.diff(dev_sorted) <= tol))
    bound = tol + dev_sorted[0] * np.sqrt(d_sorted[-1] / d_sorted[0])
    return {"delta": deltas, "deviation": dev, "passed": bool(dev_sorted[-1] <= bound and env_ok)}


# builtins -----------------------------------------------------------------------


def builtin(name, **params):
    """Construct a builtin functional by family name.

    Families: ``eval(f)``, ``qv_eval(f)``, ``qv_integral(phi, W)``,
    ``follmer_grad(f)``, ``bracket_1form(fs)``, ``markov_affine(alpha, beta)``,
    ``heat(n)``, ``left_eval(i)``, ``jump_at(t0)``, ``constant(c)``,
    ``integral(phi)``, ``bracket(phi, psi)``.
    """
    makers = {
        "eval": lambda f="square": eval_functional(f),
        "qv_eval": lambda f="identity": QvEvalFunctional(f),
        "qv_integral": lambda phi="one", W=None: QvIntegralFunctional(phi, W),
        "follmer_grad": lambda f="square": FollmerFunctional(f),
        "bracket_1form": lambda fs="identity": OneFormFunctional(fs),
        "markov_affine": lambda alpha=0.0, beta=1.0: markov_affine(alpha, beta),
        "heat": lambda n=2: heat_polynomial(int(n)),
        "left_eval": lambda i=0: left_eval(int(i)),
        "jump_at": lambda t0=0.5: JumpAtFunctional(t0),
        "constant": lambda c=1.0: Constant(c),
        "integral": lambda phi=1.0: IntegralFunctional(phi),
        "bracket": lambda phi=1.0, psi=1.0: BracketFunctional(phi, psi),
    }
    if name not in makers:
        raise ValueError(f"unknown builtin {name!r}; choose from {sorted(makers)}")
    try:
        return makers[name](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for builtin {name!r}: {exc}") from None


_SPEC_KINDS = {
    "eval": ("eval", {"f": "f"}),
    "follmer": ("follmer_grad", {"f": "f"}),
    "qvint": ("qv_integral", {"phi": "phi"}),
    "qveval": ("qv_eval", {"f": "f"}),
    "affine": ("markov_affine", {"a": "alpha", "b": "beta"}),
    "oneform": ("bracket_1form", {"f": "fs"}),
    "heat": ("heat", {"n": "n"}),
    "const": ("constant", {"c": "c"}),
    "left": ("left_eval", {"i": "i"}),
    "jumpat": ("jump_at", {"t0": "t0"}),
}

_NAME_KEYS = {"f", "phi"}


def parse_functional_spec(spec):
    """Parse the functional mini-language, e.g. ``eval:f=square`` or ``affine:a=1,b=2``.

    Kinds: ``eval``, ``follmer``, ``qvint``, ``qveval``, ``affine``
    (``b`` may be a ``|`` vector), ``oneform`` (``f`` may be a ``|`` list),
    ``heat``, ``const``, ``left``, ``jumpat``. ``qvint:phi=identity`` is the
    trace of the quadratic variation.
    """
    kind, body, off = split_kind(spec)
    if kind not in _SPEC_KINDS:
        raise SpecError("unknown functional kind", spec, kind, 0)
    name, keys = _SPEC_KINDS[kind]
    params = {}
    for key, value, pos in parse_pairs(spec, body, off):
        vpos = pos + len(key) + 1
        if key not in keys:
            raise SpecError("unknown key", spec, key, pos)
        if key in _NAME_KEYS:
            items = value.split("|")
            for it in items:
                if it not in SCALAR_FUNCTIONS:
                    raise SpecError("unknown function name", spec, it, vpos)
            if kind == "qvint":
                # phi=identity means the identity weight matrix, i.e. the trace
                value = "one" if value == "identity" else value
                items = [value]
            params[keys[key]] = items if (kind == "oneform" and len(items) > 1) else items[0]
        elif key == "b":
            params["beta"] = [parse_number(v, spec, vpos) for v in value.split("|")]
        elif key in ("n", "i"):
            params[keys[key]] = parse_number(value, spec, vpos, int)
        else:
            params[keys[key]] = parse_number(value, spec, vpos)
    return builtin(name, **params)
