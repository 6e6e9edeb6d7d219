"""Causal functional base class, algebra, and shared integral helpers."""

from __future__ import annotations

import contextlib
import contextvars
from functools import lru_cache

import numpy as np

from .partition import Partition
from .path import CadlagPath, _grid_for

__all__ = [
    "Functional",
    "ambient",
    "ambient_grid",
    "DEFAULT_LEVEL",
    "split_integral",
    "pc_data",
]

DEFAULT_LEVEL = 14
_AMBIENT = contextvars.ContextVar("pathcalc_ambient", default=None)

_CLASS_RANK = {"classM": 3, "classS": 2, "C12": 1, "generic": 0}
_RANK_CLASS = {v: k for k, v in _CLASS_RANK.items()}


@contextlib.contextmanager
def ambient(level_or_partition):
    """Set the partition used inside functionals that need quadratic sums.

    Accepts a dyadic level (int) or a :class:`Partition`. Functionals that
    integrate against the continuous part of a path use this grid; jumps are
    always handled exactly.
    """
    token = _AMBIENT.set(level_or_partition)
    try:
        yield
    finally:
        _AMBIENT.reset(token)


@lru_cache(maxsize=64)
def _dyadic_points(level, horizon):
    pts = np.arange(2**level + 1, dtype=float) * (horizon / 2**level)
    pts.setflags(write=False)
    return pts


def ambient_grid(x):
    """Grid points of the current ambient partition on the horizon of `x`."""
    v = _AMBIENT.get()
    if isinstance(v, Partition):
        return _grid_for(x, v)
    level = DEFAULT_LEVEL if v is None else int(v)
    return _dyadic_points(level, x.horizon)


def split_integral(x, t, h, mode="dx"):
    """Coordinatewise integrals of ``h(x(s-))`` over ``[0, t]``.

    ``mode='dx'`` returns ``int h_i(x(s-)) dx_i(s)`` and ``mode='dq'`` returns
    ``int h_i(x(s-)) d[x_i](s)``, both as arrays of shape (m,). The continuous
    part of `x` is handled by left Riemann sums on the ambient grid, jumps
    (including one at time 0) exactly.
    """
    m = x.dim
    out = np.zeros(m)
    if not x.is_step:
        g = ambient_grid(x)
        pts = g[g < t]
        if pts.size:
            nxt = np.minimum(np.append(pts[1:], t), t)
            xc = x.continuous_part()
            dc = xc.eval(nxt) - xc.eval(pts)
            w = np.broadcast_to(h(x.eval_left(pts)), dc.shape)
            out += np.sum(w * (dc if mode == "dx" else dc * dc), axis=0)
    jt, js = x.jumps()
    keep = jt <= t
    if np.any(keep):
        jt, js = jt[keep], js[keep]
        w = np.broadcast_to(h(x.eval_left(jt)), js.shape)
        out += np.sum(w * (js if mode == "dx" else js * js), axis=0)
    return out


def pc_data(x, p):
    """Arrays describing the step approximation of `x` on `p`.

    Returns ``(pts, xl, xr, d)`` where ``xl[i] = x(t_i)`` is the left value of
    the approximation at ``t_i``, ``xr[i] = x(t_{i+1})`` its value and
    ``d = xr - xl`` its jump there.
    """
    pts = _grid_for(x, p)
    xl = x.eval(pts)
    xr = np.vstack([xl[1:], xl[-1:]])
    return pts, xl, xr, xr - xl


def _bmul(a, b):
    """Broadcasting product where leading axes match and trailing axes extend."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    while a.ndim < b.ndim:
        a = a[..., None]
    while b.ndim < a.ndim:
        b = b[..., None]
    return a * b


def _bouter(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., :, None] * b[..., None, :]


def _combine_class(a, b, product=False):
    ra, rb = _CLASS_RANK[a], _CLASS_RANK[b]
    r = min(ra, rb)
    if product:
        r = min(r, 1) if r >= 1 else 0
    return _RANK_CLASS[r]


def _value(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


class Functional:
    """Causal functional ``F(t, x_t)``.

    Parameters
    ----------
    func : callable, optional
        ``func(t, x) -> float or ndarray``. It must only read `x` on
        ``[0, t]``; evaluation through :meth:`__call__` passes the path as is,
        use :meth:`evaluate_stopped` to enforce stopping.
    dt, grad, hess : Functional, optional
        Analytic horizontal derivative, vertical gradient and Hessian.
    declared_class : {'generic', 'C12', 'classS', 'classM'}
    name : str, optional

    Notes
    -----
    Subclasses may override :meth:`along_pc`, which returns
    ``F(t_i, x^n_{t_i-})`` (``left=True``) or ``F(t_i, x^n_{t_i})`` for every
    point of a partition, where ``x^n`` is the forward-sampled step
    approximation of `x`.
    """

    def __init__(self, func=None, *, dt=None, grad=None, hess=None, declared_class="generic", name=None):
        if declared_class not in _CLASS_RANK:
            raise ValueError(f"unknown functional class {declared_class!r}")
        self.func = func
        self._dt = dt
        self._grad = grad
        self._hess = hess
        self.declared_class = declared_class
        self.name = name or getattr(func, "__name__", "F")

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, class={self.declared_class})"

    # evaluation -------------------------------------------------------
    def evaluate(self, t, x):
        if self.func is None:
            raise NotImplementedError("functional has no evaluator")
        return _value(self.func(float(t), x))

    def __call__(self, t, x):
        return self.evaluate(t, x)

    def evaluate_stopped(self, t, x):
        """``F(t, x_t)`` with the path explicitly stopped first."""
        return self.evaluate(t, x.stop(t))

    def along_pc(self, x, p, left=True):
        """Values on the step approximation at every partition point."""
        from .path import pc_approx

        xn = pc_approx(x, p)
        out = [self.evaluate(t, xn.stop(t, left=left)) for t in xn.times]
        return np.array(out, dtype=float)

    # derivatives ------------------------------------------------------
    @property
    def dt(self):
        return self._dt

    @property
    def grad(self):
        return self._grad

    @property
    def hess(self):
        return self._hess

    @property
    def is_class_m(self):
        return self.declared_class == "classM"

    def left(self):
        """``F_-(t, x_t) = F(t, x_{t-})``."""
        return LeftStopped(self)

    # algebra ----------------------------------------------------------
    def __add__(self, other):
        return Sum(self, as_functional(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum(self, Scaled(-1.0, as_functional(other)))

    def __rsub__(self, other):
        return Sum(as_functional(other), Scaled(-1.0, self))

    def __neg__(self):
        return Scaled(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, Functional):
            return Product(self, other)
        return Scaled(float(other), self)

    __rmul__ = __mul__


class Constant(Functional):
    """``F(t, x) = c``; `c` may be a scalar or an array."""

    def __init__(self, c=0.0, name=None):
        super().__init__(declared_class="classM", name=name or f"const({c})")
        self.c = np.asarray(c, dtype=float)

    def evaluate(self, t, x):
        return _value(self.c)

    def along_pc(self, x, p, left=True):
        n = _grid_for(x, p).size
        return np.broadcast_to(self.c, (n,) + self.c.shape).copy()

    @property
    def dt(self):
        return ZERO

    @property
    def grad(self):
        return ZERO

    @property
    def hess(self):
        return ZERO


ZERO = Constant(0.0, name="zero")


def as_functional(v):
    return v if isinstance(v, Functional) else Constant(v)


def _maybe(f, attr):
    return getattr(f, attr) if f is not None else None


class Sum(Functional):
    def __init__(self, a, b):
        super().__init__(declared_class=_combine_class(a.declared_class, b.declared_class),
                         name=f"({a.name} + {b.name})")
        self.a, self.b = a, b

    def evaluate(self, t, x):
        return _value(np.add(self.a(t, x), self.b(t, x)))

    def along_pc(self, x, p, left=True):
        return self.a.along_pc(x, p, left) + self.b.along_pc(x, p, left)

    def _d(self, attr):
        da, db = getattr(self.a, attr), getattr(self.b, attr)
        return None if da is None or db is None else Sum(da, db)

    @property
    def dt(self):
        return self._d("dt")

    @property
    def grad(self):
        return self._d("grad")

    @property
    def hess(self):
        return self._d("hess")


class Scaled(Functional):
    def __init__(self, c, f):
        super().__init__(declared_class=f.declared_class, name=f"{c:g}*{f.name}")
        self.c, self.f = float(c), f

    def evaluate(self, t, x):
        return _value(self.c * np.asarray(self.f(t, x)))

    def along_pc(self, x, p, left=True):
        return self.c * self.f.along_pc(x, p, left)

    def _d(self, attr):
        d = getattr(self.f, attr)
        return None if d is None else Scaled(self.c, d)

    @property
    def dt(self):
        return self._d("dt")

    @property
    def grad(self):
        return self._d("grad")

    @property
    def hess(self):
        return self._d("hess")


class Product(Functional):
    """Pointwise product; derivatives follow the Leibniz rule."""

    def __init__(self, a, b):
        super().__init__(declared_class=_combine_class(a.declared_class, b.declared_class, product=True),
                         name=f"({a.name} * {b.name})")
        self.a, self.b = a, b

    def evaluate(self, t, x):
        return _value(_bmul(self.a(t, x), self.b(t, x)))

    def along_pc(self, x, p, left=True):
        return _bmul(self.a.along_pc(x, p, left), self.b.along_pc(x, p, left))

    @property
    def dt(self):
        da, db = self.a.dt, self.b.dt
        if da is None or db is None:
            return None
        return Sum(Product(da, self.b), Product(self.a, db))

    @property
    def grad(self):
        ga, gb = self.a.grad, self.b.grad
        if ga is None or gb is None:
            return None
        return Sum(Product(self.b, ga), Product(self.a, gb))

    @property
    def hess(self):
        ga, gb, ha, hb = self.a.grad, self.b.grad, self.a.hess, self.b.hess
        if None in (ga, gb, ha, hb):
            return None
        return Sum(Sum(Product(self.b, ha), Product(self.a, hb)), Sum(Outer(ga, gb), Outer(gb, ga)))


class Outer(Functional):
    """Outer product of two vector-valued functionals."""

    def __init__(self, a, b):
        super().__init__(name=f"outer({a.name}, {b.name})")
        self.a, self.b = a, b

    def _vec(self, v, m):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(v, v.shape[:-1] + (m,)) if v.ndim and v.shape[-1] == m else np.broadcast_to(v[..., None] if v.ndim else v, v.shape + (m,))

    def evaluate(self, t, x):
        m = x.dim
        a = np.broadcast_to(np.asarray(self.a(t, x), dtype=float), (m,))
        b = np.broadcast_to(np.asarray(self.b(t, x), dtype=float), (m,))
        return np.outer(a, b)

    def along_pc(self, x, p, left=True):
        m = x.dim
        a = np.asarray(self.a.along_pc(x, p, left), dtype=float)
        b = np.asarray(self.b.along_pc(x, p, left), dtype=float)
        n = a.shape[0]
        a = np.broadcast_to(a.reshape(n, -1), (n, m))
        b = np.broadcast_to(b.reshape(n, -1), (n, m))
        return _bouter(a, b)


class LeftStopped(Functional):
    """``F_-``: evaluate `F` on the path stopped just before t."""

    def __init__(self, f):
        super().__init__(declared_class="generic", name=f"{f.name}_-")
        self.f = f

    def evaluate(self, t, x):
        return self.f(t, x.stop_left(t))

    def along_pc(self, x, p, left=True):
        return self.f.along_pc(x, p, left=True)

    @property
    def grad(self):
        return ZERO


def cumulative(values, left):
    """Cumulative sums along axis 0, inclusive (``left=False``) or exclusive."""
    c = np.cumsum(values, axis=0)
    if not left:
        return c
    return np.concatenate([np.zeros((1,) + c.shape[1:]), c[:-1]], axis=0)


__all__ += ["Constant", "ZERO", "Sum", "Scaled", "Product", "Outer", "LeftStopped", "as_functional",
            "cumulative", "CadlagPath"]
