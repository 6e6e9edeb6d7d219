import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcalc import (
    CadlagPath,
    builtin,
    dyadic_sequence,
    pc_approx,
    riemann_sum,
    skorokhod_distance,
    step_path,
    sup_distance,
)
from pathcalc.path import time_change
from pathcalc.quadvar import polarise, quadratic_sums, qv_level

SETTINGS = settings(max_examples=40, deadline=None)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def step_paths(draw, dim=1, max_jumps=6):
    k = draw(st.integers(0, max_jumps))
    slots = sorted(draw(st.sets(st.integers(1, 2**12), min_size=k, max_size=k)))
    jumps = [(s / 2.0**12, [draw(finite) for _ in range(dim)]) for s in slots]
    return step_path(jumps, x0=[draw(finite) for _ in range(dim)], dim=dim)


@st.composite
def pl_paths(draw):
    k = draw(st.integers(1, 8))
    inner = sorted(draw(st.sets(st.floats(0.01, 0.99), min_size=k, max_size=k)))
    t = np.array([0.0] + inner + [1.0])
    v = np.array([draw(finite) for _ in t])
    return CadlagPath(t, v[:, None])


@SETTINGS
@given(st.one_of(step_paths(), pl_paths()), st.integers(1, 12))
def test_discrete_ito_telescoping(x, n):
    p = dyadic_sequence(1.0, n)[n]
    lhs = riemann_sum(builtin("eval", f="identity") * 2.0, x, p) + qv_level(x, p)
    rhs = x.eval(1.0)[0] ** 2 - x.eval(0.0)[0] ** 2
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs), qv_level(x, p))


@SETTINGS
@given(step_paths(dim=2), st.integers(1, 12))
def test_polarisation_exact(x, n):
    p = dyadic_sequence(1.0, n)[n]
    a, b = x.coordinate(0), x.coordinate(1)
    pol = polarise(quadratic_sums(a, p), quadratic_sums(b, p), quadratic_sums(a + b, p))
    np.testing.assert_allclose(pol.values[:, 0], quadratic_sums(x, p).values[:, 1], atol=1e-10)


@SETTINGS
@given(step_paths())
def test_separated_jumps_give_exact_sums(x):
    # at level 12 every cell holds at most one jump time
    _, sizes = x.jumps()
    p = dyadic_sequence(1.0, 12)[12]
    assert np.isclose(qv_level(x, p), float(np.sum(sizes**2)), rtol=1e-12, atol=1e-12)


@SETTINGS
@given(step_paths(), step_paths())
def test_skorokhod_metric_properties(f, g):
    d = skorokhod_distance(f, g)
    assert 0 <= d <= sup_distance(f, g) + 1e-12
    assert abs(d - skorokhod_distance(g, f)) < 1e-12
    assert skorokhod_distance(f, f) == 0.0


@SETTINGS
@given(step_paths(), st.floats(0.2, 0.8), st.floats(-0.1, 0.1))
def test_time_change_bound(f, u, shift):
    g = time_change(f, [0.0, u, 1.0], [0.0, u + shift, 1.0])
    assert skorokhod_distance(f, g) <= abs(shift) + 1e-12


@SETTINGS
@given(st.one_of(step_paths(), pl_paths()), st.integers(1, 10))
def test_pc_approx_samples_forward(x, n):
    p = dyadic_sequence(1.0, n)[n]
    y = pc_approx(x, p)
    pts = p.points
    np.testing.assert_array_equal(y.eval(pts[:-1]), x.eval(pts[1:]))
    assert y.eval(1.0)[0] == x.eval(1.0)[0]


@SETTINGS
@given(st.one_of(step_paths(), pl_paths()), st.integers(1, 10), finite, finite)
def test_riemann_sum_linear_in_integrand(x, n, a, b):
    p = dyadic_sequence(1.0, n)[n]
    F, G = builtin("eval", f="sin"), builtin("eval", f="cube")
    lhs = riemann_sum(a * F + b * G, x, p)
    rhs = a * riemann_sum(F, x, p) + b * riemann_sum(G, x, p)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@SETTINGS
@given(st.one_of(step_paths(), pl_paths()), st.floats(0.0, 1.0))
def test_stop_is_idempotent(x, t):
    y = x.stop(t)
    assert sup_distance(y.stop(t), y) == 0.0
    assert np.array_equal(y.eval(1.0), x.eval(t))
