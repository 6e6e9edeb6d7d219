"""Builtin functional families with analytic derivatives."""

from __future__ import annotations

import numpy as np

from ._base import (
    ZERO,
    Constant,
    Functional,
    LeftStopped,
    cumulative,
    pc_data,
    split_integral,
)

__all__ = [
    "SCALAR_FUNCTIONS",
    "scalar_function",
    "PointFunctional",
    "LeftPointFunctional",
    "eval_functional",
    "left_eval",
    "markov_affine",
    "heat_polynomial",
    "FollmerFunctional",
    "QvIntegralFunctional",
    "QvEvalFunctional",
    "OneFormFunctional",
    "IntegralFunctional",
    "BracketFunctional",
    "JumpAtFunctional",
]


def _const(c):
    return lambda u: np.full_like(np.asarray(u, dtype=float), c)


# name -> (g, g', g'')
SCALAR_FUNCTIONS = {
    "identity": (lambda u: np.asarray(u, dtype=float), _const(1.0), _const(0.0)),
    "square": (lambda u: np.square(u), lambda u: 2.0 * np.asarray(u), _const(2.0)),
    "cube": (lambda u: np.power(u, 3), lambda u: 3.0 * np.square(u), lambda u: 6.0 * np.asarray(u)),
    "sin": (np.sin, np.cos, lambda u: -np.sin(u)),
    "cos": (np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u)),
    "exp": (np.exp, np.exp, np.exp),
    "zero": (_const(0.0), _const(0.0), _const(0.0)),
    "one": (_const(1.0), _const(0.0), _const(0.0)),
}


def scalar_function(name):
    """Look up ``(g, g', g'')`` for a registered scalar function."""
    try:
        return SCALAR_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown scalar function {name!r}; choose from {sorted(SCALAR_FUNCTIONS)}") from None


# point functionals --------------------------------------------------------


class PointFunctional(Functional):
    """``F(t, x) = f(t, x(t))`` for a vectorised ``f(t, u)``.

    Parameters
    ----------
    f : callable
        ``f(t, u)`` with ``t`` of shape (n,) and ``u`` of shape (n, m).
        Returns shape (n,) for scalar functionals, (n, m) or (n, m, m) for
        gradient and Hessian fields.
    dfdt, dfdu, d2fdu2 : callable, optional
    left : bool
        Evaluate at ``x(t-)`` instead of ``x(t)``; the functional is then
        strictly causal.
    """

    def __init__(self, f, dfdt=None, dfdu=None, d2fdu2=None, *, left=False, declared_class="C12",
                 name=None):
        super().__init__(declared_class=declared_class, name=name or getattr(f, "__name__", "f"))
        self.f = f
        self.dfdt = dfdt
        self.dfdu = dfdu
        self.d2fdu2 = d2fdu2
        self.left_eval = left

    def evaluate(self, t, x):
        u = x.eval_left(t) if self.left_eval else x.eval(t)
        v = np.asarray(self.f(np.array([float(t)]), u[None, :]), dtype=float)[0]
        return float(v) if v.ndim == 0 else v

    def along_pc(self, x, p, left=True):
        pts, xl, xr, _ = pc_data(x, p)
        u = xl if (left or self.left_eval) else xr
        return np.asarray(self.f(pts, u), dtype=float)

    def _child(self, g):
        if g is None:
            return None
        return PointFunctional(g, left=self.left_eval, declared_class="generic", name=f"d{self.name}")

    @property
    def dt(self):
        return self._child(self.dfdt)

    @property
    def grad(self):
        if self.left_eval:
            return ZERO
        return self._child(self.dfdu)

    @property
    def hess(self):
        if self.left_eval:
            return ZERO
        return self._child(self.d2fdu2)


def LeftPointFunctional(f, name=None):
    """``F(t, x) = f(t, x(t-))``; strictly causal, so ``grad`` is zero."""
    return PointFunctional(f, left=True, declared_class="generic", name=name)


def _separable(name):
    g, g1, g2 = scalar_function(name)
    f = lambda t, u: np.sum(g(u), axis=-1)  # noqa: E731
    df = lambda t, u: g1(u)  # noqa: E731

    def d2f(t, u):
        u = np.asarray(u, dtype=float)
        return np.einsum("...i,ij->...ij", g2(u), np.eye(u.shape[-1]))

    return f, df, d2f


def eval_functional(f="square"):
    """``F(t, x) = sum_i f(x_i(t))`` for a registered scalar `f`, or a callable ``f(t, u)``."""
    if callable(f):
        return PointFunctional(f, declared_class="generic")
    fn, df, d2f = _separable(f)
    zero = lambda t, u: np.zeros(np.shape(u)[:-1])  # noqa: E731
    return PointFunctional(fn, zero, df, d2f, name=f"eval({f})")


def left_eval(i=0):
    """``F(t, x) = x_i(t-)``."""
    return LeftPointFunctional(lambda t, u: np.asarray(u, dtype=float)[..., i], name=f"x{i}(t-)")


def markov_affine(alpha=0.0, beta=1.0):
    """``F(t, x) = alpha + beta . x(t)``, a class-M functional."""
    alpha = float(alpha)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))

    def f(t, u):
        u = np.asarray(u, dtype=float)
        return alpha + u @ np.broadcast_to(beta, (u.shape[-1],))

    def grad(t, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(beta, u.shape).copy()

    def hess(t, u):
        u = np.asarray(u, dtype=float)
        return np.zeros(u.shape + (u.shape[-1],))

    zero = lambda t, u: np.zeros(np.shape(u)[:-1])  # noqa: E731
    return PointFunctional(f, zero, grad, hess, declared_class="classM",
                           name=f"affine({alpha:g},{np.array2string(beta, separator=',')})")


_HEAT = {
    1: (lambda t, u: u, lambda t, u: 0 * u, lambda t, u: 1 + 0 * u, lambda t, u: 0 * u),
    2: (lambda t, u: u**2 - t, lambda t, u: -1 + 0 * u, lambda t, u: 2 * u, lambda t, u: 2 + 0 * u),
    3: (lambda t, u: u**3 - 3 * t * u, lambda t, u: -3 * u, lambda t, u: 3 * u**2 - 3 * t, lambda t, u: 6 * u),
    4: (lambda t, u: u**4 - 6 * t * u**2 + 3 * t**2, lambda t, u: -6 * u**2 + 6 * t,
        lambda t, u: 4 * u**3 - 12 * t * u, lambda t, u: 12 * u**2 - 12 * t),
}


def heat_polynomial(n=2):
    """Heat polynomial ``H_n(t, x(t))`` on a 1-d path (``u^2 - t``, ``u^3 - 3tu``, ...).

    These satisfy ``dt F + 1/2 d2F/du2 = 0``.
    """
    if n not in _HEAT:
        raise ValueError(f"heat polynomial degree must be one of {sorted(_HEAT)}")
    f, ft, fu, fuu = _HEAT[n]

    def wrap(g, shape):
        def h(t, u):
            t = np.asarray(t, dtype=float)
            v = g(t, np.asarray(u, dtype=float)[..., 0])
            return v.reshape(v.shape + shape)
        return h

    return PointFunctional(wrap(f, ()), wrap(ft, ()), wrap(fu, (1,)), wrap(fuu, (1, 1)), name=f"heat{n}")


# integral functionals -------------------------------------------------------


class FollmerFunctional(Functional):
    """``F(t, x) = int_0^t grad f(x(s-)) . dx(s)`` for separable ``f = sum_i g(u_i)``.

    The continuous part is integrated on the ambient grid, jumps exactly.
    Class M: ``grad F = grad f(x(t-))``, ``dt F = 0``, ``hess F = 0``.
    """

    def __init__(self, f="square"):
        super().__init__(declared_class="classM", name=f"follmer({f})")
        self.fname = f
        _, self.g1, _ = scalar_function(f)

    def evaluate(self, t, x):
        return float(np.sum(split_integral(x, t, self.g1, "dx")))

    def along_pc(self, x, p, left=True):
        _, xl, _, d = pc_data(x, p)
        return cumulative(np.sum(self.g1(xl) * d, axis=1), left)

    @property
    def dt(self):
        return ZERO

    @property
    def grad(self):
        g1 = self.g1
        return LeftPointFunctional(lambda t, u: g1(u), name=f"grad {self.fname}(x(t-))")

    @property
    def hess(self):
        return ZERO


class QvIntegralFunctional(Functional):
    """``F(t, x) = int_0^t g(x(s-)) <W, d[x](s)>`` with constant matrix `W`.

    With ``g = 1`` and ``W = I`` this is ``trace [x](t)``. Derivatives:
    ``grad F = g(x(t-)) (W + W') Dx(t)``, ``hess F = g(x(t-)) (W + W')``.
    """

    def __init__(self, g="one", W=None):
        super().__init__(declared_class="C12", name=f"qvint({g if isinstance(g, str) else 'g'})")
        self.gname = g
        self.g = scalar_function(g)[0] if isinstance(g, str) else g
        self.W = None if W is None else np.atleast_2d(np.asarray(W, dtype=float))

    def _weight(self, u):
        # named weights read the first coordinate; callables get the full state
        u = np.asarray(u, dtype=float)
        if isinstance(self.gname, str):
            return np.asarray(self.g(u[..., 0]), dtype=float)
        return np.asarray(self.g(u), dtype=float)

    def _W(self, m):
        return np.eye(m) if self.W is None else self.W

    def evaluate(self, t, x):
        W = self._W(x.dim)
        if self.W is None or np.allclose(W, np.diag(np.diag(W))):
            w = np.diag(W)
            h = lambda u: self._weight(u)[..., None] * w  # noqa: E731
            return float(np.sum(split_integral(x, t, h, "dq")))
        # general W: polarise through the eigen-directions of the symmetric part
        S = 0.5 * (W + W.T)
        lam, V = np.linalg.eigh(S)
        y = x.linear_map(V.T)
        h = lambda u: self._weight(x_back(u, V))[..., None] * lam  # noqa: E731
        return float(np.sum(split_integral(y, t, h, "dq")))

    def along_pc(self, x, p, left=True):
        _, xl, _, d = pc_data(x, p)
        W = self._W(x.dim)
        terms = self._weight(xl) * np.einsum("ni,ij,nj->n", d, W, d)
        return cumulative(terms, left)

    @property
    def dt(self):
        return ZERO

    @property
    def grad(self):
        return _QvIntGrad(self)

    @property
    def hess(self):
        return _QvIntHess(self)


def x_back(u, V):
    return np.asarray(u, dtype=float) @ V.T


class _QvIntGrad(Functional):
    def __init__(self, parent):
        super().__init__(name=f"grad {parent.name}")
        self.parent = parent

    def _sym(self, m):
        W = self.parent._W(m)
        return W + W.T

    def evaluate(self, t, x):
        w = float(self.parent._weight(x.eval_left(t)[None, :])[0])
        return w * (self._sym(x.dim) @ x.jump(t))

    def along_pc(self, x, p, left=True):
        _, xl, _, d = pc_data(x, p)
        if left:
            return np.zeros_like(d)
        return self.parent._weight(xl)[:, None] * (d @ self._sym(x.dim).T)


class _QvIntHess(Functional):
    def __init__(self, parent):
        super().__init__(name=f"hess {parent.name}")
        self.parent = parent

    def evaluate(self, t, x):
        W = self.parent._W(x.dim)
        return float(self.parent._weight(x.eval_left(t)[None, :])[0]) * (W + W.T)

    def along_pc(self, x, p, left=True):
        _, xl, _, _ = pc_data(x, p)
        W = self.parent._W(x.dim)
        return self.parent._weight(xl)[:, None, None] * (W + W.T)[None]


class QvEvalFunctional(Functional):
    """``F(t, x) = g(trace [x](t))``.

    ``grad F = 2 g'(Q) Dx(t)`` and ``hess F = 4 g''(Q) Dx Dx' + 2 g'(Q) I``
    where ``Q = trace [x](t)``.
    """

    def __init__(self, g="identity"):
        super().__init__(declared_class="C12", name=f"qveval({g})")
        self.gname = g
        self.g, self.g1, self.g2 = scalar_function(g)

    def trace_qv(self, t, x):
        return float(np.sum(split_integral(x, t, lambda u: np.ones_like(u), "dq")))

    def evaluate(self, t, x):
        return float(self.g(self.trace_qv(t, x)))

    def _q(self, x, p, left):
        _, _, _, d = pc_data(x, p)
        return cumulative(np.sum(d * d, axis=1), left), d

    def along_pc(self, x, p, left=True):
        q, _ = self._q(x, p, left)
        return self.g(q)

    @property
    def dt(self):
        return ZERO

    @property
    def grad(self):
        parent = self

        class _Grad(Functional):
            def evaluate(self, t, x):
                return 2.0 * float(parent.g1(parent.trace_qv(t, x))) * x.jump(t)

            def along_pc(self, x, p, left=True):
                q, d = parent._q(x, p, left)
                if left:
                    return np.zeros_like(d)
                return 2.0 * parent.g1(q)[:, None] * d

        return _Grad(name=f"grad {self.name}")

    @property
    def hess(self):
        parent = self

        class _Hess(Functional):
            def evaluate(self, t, x):
                q = parent.trace_qv(t, x)
                j = x.jump(t)
                return 4.0 * float(parent.g2(q)) * np.outer(j, j) + 2.0 * float(parent.g1(q)) * np.eye(x.dim)

            def along_pc(self, x, p, left=True):
                q, d = parent._q(x, p, left)
                if left:
                    d = np.zeros_like(d)
                eye = np.eye(d.shape[1])
                return (4.0 * parent.g2(q)[:, None, None] * d[:, :, None] * d[:, None, :]
                        + 2.0 * parent.g1(q)[:, None, None] * eye)

        return _Hess(name=f"hess {self.name}")


class OneFormFunctional(Functional):
    """Path-dependent 1-form functional.

    ``F(t, x) = sum_i [x_i(t) A_i(t) - int x_i(s-) f_i(x_i(s-)) dx_i - int f_i(x_i(s-)) d[x_i]]``
    with ``A_i(t) = int_0^t f_i(x_i(s-)) dx_i(s)``. Its vertical gradient is
    ``A(t-)``, strictly causal, and ``dt F = 0``, so it is class M.

    Parameters
    ----------
    fs : str or list of str
        One registered scalar function per coordinate (a single name is
        broadcast).
    """

    def __init__(self, fs="identity"):
        names = [fs] if isinstance(fs, str) else list(fs)
        super().__init__(declared_class="classM", name=f"oneform({'|'.join(names)})")
        self.fnames = names
        self.fns = [scalar_function(n)[0] for n in names]

    def _f(self, u):
        u = np.asarray(u, dtype=float)
        m = u.shape[-1]
        fns = self.fns if len(self.fns) == m else self.fns[:1] * m
        if len(fns) != m:
            raise ValueError(f"oneform has {len(self.fns)} functions for a {m}-d path")
        return np.stack([fn(u[..., i]) for i, fn in enumerate(fns)], axis=-1)

    def parts(self, t, x):
        """``(A, B, C)`` coordinate arrays at time t."""
        A = split_integral(x, t, self._f, "dx")
        B = split_integral(x, t, lambda u: np.asarray(u) * self._f(u), "dx")
        C = split_integral(x, t, self._f, "dq")
        return A, B, C

    def evaluate(self, t, x):
        A, B, C = self.parts(t, x)
        return float(np.sum(x.eval(t) * A - B - C))

    def along_pc(self, x, p, left=True):
        _, xl, xr, d = pc_data(x, p)
        fx = self._f(xl)
        A = cumulative(fx * d, left)
        B = cumulative(xl * fx * d, left)
        C = cumulative(fx * d * d, left)
        y = xl if left else xr
        return np.sum(y * A - B - C, axis=1)

    @property
    def dt(self):
        return ZERO

    @property
    def grad(self):
        parent = self

        class _Grad(Functional):
            def evaluate(self, t, x):
                return split_integral(x.stop_left(t), t, parent._f, "dx")

            def along_pc(self, x, p, left=True):
                _, xl, _, d = pc_data(x, p)
                return cumulative(parent._f(xl) * d, True)

        return _Grad(name=f"grad {self.name}")

    @property
    def hess(self):
        return ZERO


class IntegralFunctional(Functional):
    """``I_phi(t, x) = int_0^t phi(s, x_{s-}) . dx(s)``.

    Jumps are integrated exactly; the continuous part by left Riemann sums on
    the ambient grid with ``phi`` evaluated on the step approximation.
    ``grad I_phi = phi_-`` and ``dt I_phi = 0``.
    """

    def __init__(self, phi):
        from ._base import as_functional

        phi = as_functional(phi)
        cls = "classM" if phi.grad is ZERO or isinstance(phi, Constant) else "classS"
        super().__init__(declared_class=cls, name=f"int {phi.name} dx")
        self.phi = phi

    def _phi_vals(self, vals, m):
        v = np.asarray(vals, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        return np.broadcast_to(v, (v.shape[0], m))

    def evaluate(self, t, x):
        from ._base import ambient_grid

        total = 0.0
        if not x.is_step:
            g = ambient_grid(x)
            pts = g[g < t]
            if pts.size:
                nxt = np.minimum(np.append(pts[1:], t), t)
                xc = x.continuous_part()
                dc = xc.eval(nxt) - xc.eval(pts)
                from .partition import Partition

                phi = self._phi_vals(self.phi.along_pc(x, Partition(g), left=True), x.dim)[: pts.size]
                total += float(np.sum(phi * dc))
        jt, js = x.jumps()
        for u, a in zip(jt, js):
            if u <= t:
                total += float(np.sum(np.broadcast_to(self.phi(u, x.stop_left(u)), a.shape) * a))
        return total

    def along_pc(self, x, p, left=True):
        _, _, _, d = pc_data(x, p)
        phi = self._phi_vals(self.phi.along_pc(x, p, left=True), x.dim)
        return cumulative(np.sum(phi * d, axis=1), left)

    @property
    def dt(self):
        return ZERO

    @property
    def grad(self):
        return LeftStopped(self.phi)

    @property
    def hess(self):
        return ZERO


class BracketFunctional(Functional):
    """``{phi, psi}(t, x) = [psi I_phi + phi I_psi](t, x_{t-})``."""

    def __init__(self, phi, psi):
        from ._base import as_functional

        self.phi, self.psi = as_functional(phi), as_functional(psi)
        super().__init__(name=f"{{{self.phi.name},{self.psi.name}}}")
        self.Iphi = IntegralFunctional(self.phi)
        self.Ipsi = IntegralFunctional(self.psi)

    def evaluate(self, t, x):
        y = x.stop_left(t)
        m = x.dim
        phi = np.broadcast_to(np.asarray(self.phi(t, y), dtype=float), (m,))
        psi = np.broadcast_to(np.asarray(self.psi(t, y), dtype=float), (m,))
        return psi * self.Iphi(t, y) + phi * self.Ipsi(t, y)

    def along_pc(self, x, p, left=True):
        m = x.dim
        phi = self.Iphi._phi_vals(self.phi.along_pc(x, p, left=True), m)
        psi = self.Iphi._phi_vals(self.psi.along_pc(x, p, left=True), m)
        Iphi = self.Iphi.along_pc(x, p, left=True)
        Ipsi = self.Ipsi.along_pc(x, p, left=True)
        return psi * Iphi[:, None] + phi * Ipsi[:, None]

    @property
    def grad(self):
        return ZERO


class JumpAtFunctional(Functional):
    """``F(t, x) = |Dx_t(t0)|``: size of the jump of the stopped path at `t0`."""

    def __init__(self, t0):
        super().__init__(name=f"|Dx({t0:g})|")
        self.t0 = float(t0)

    def evaluate(self, t, x):
        if t < self.t0:
            return 0.0
        return float(np.linalg.norm(x.jump(self.t0)))

    def along_pc(self, x, p, left=True):
        pts, _, _, d = pc_data(x, p)
        out = np.zeros(pts.size)
        k = np.flatnonzero(pts == self.t0)
        if k.size:
            k = int(k[0])
            size = float(np.linalg.norm(d[k]))
            out[k + (1 if left else 0):] = size
        return out

