import numpy as np
import pytest

from pathcalc import (
    CadlagPath,
    QuadraticVariation,
    dyadic_sequence,
    faber_schauder_path,
    pl_approx,
    qv_estimate,
    qv_matrix,
    stieltjes_integral,
    step_path,
    weighted_quad_sum,
)
from pathcalc.quadvar import decompose_qv, polarise, quadratic_sums, qv_level


def test_single_jump_level_sum():
    x = step_path({0.5: 2.0})
    for n in (1, 4, 9):
        assert qv_level(x, dyadic_sequence(1.0, n)[n]) == 4.0


def test_piecewise_linear_sums_vanish():
    y = pl_approx(faber_schauder_path(10, seed=1), dyadic_sequence(1.0, 5)[5])
    q = [qv_level(y, dyadic_sequence(1.0, n)[n]) for n in (6, 9, 12)]
    assert q[0] > q[1] > q[2] and q[2] < 1e-2


def test_fs_matches_oracle(fs14, fs_oracle):
    seq = dyadic_sequence(1.0, 14, 8)
    for n in seq.levels:
        assert qv_level(fs14, seq[n]) == pytest.approx(fs_oracle["q_at_1"][n], abs=1e-12)


def test_step_estimate():
    x = step_path({0.5: 2.0, 0.75: -1.0})
    res = qv_estimate(x, dyadic_sequence(1.0, 12, 4), tol=1e-3)
    assert res.converged
    # pointwise sums are exactly constant across levels
    assert len({res.q(n, 1.0) for n in res.levels}) == 1
    assert res.limit.jump(0.5)[0] == 4.0
    assert res.limit_at(1.0) == 5.0
    assert set(res.jump_part) == {0.5, 0.75}


def test_zero_path():
    res = qv_estimate(step_path([]), dyadic_sequence(1.0, 6, 2))
    assert res.converged
    assert np.all(res.limit.values == 0)


def test_nonconvergence_reported():
    res = qv_estimate(faber_schauder_path(14), dyadic_sequence(1.0, 14, 12), tol=1e-6)
    assert res.verdict == "diverged"


def test_polarise_examples():
    p = dyadic_sequence(1.0, 5)[5]
    x = faber_schauder_path(8, seed=2)
    qx = quadratic_sums(x, p)
    same = polarise(qx, qx, quadratic_sums(x + x, p))
    np.testing.assert_allclose(same.values, qx.values, atol=1e-14)
    zero = step_path([])
    z = polarise(qx, quadratic_sums(zero, p), quadratic_sums(x + zero, p))
    assert np.max(np.abs(z.values)) < 1e-15
    a, b = 1.5, -0.5
    x2 = step_path({0.5: [a, b]})
    cross = polarise(quadratic_sums(x2.coordinate(0), p), quadratic_sums(x2.coordinate(1), p),
                     quadratic_sums(x2.coordinate(0) + x2.coordinate(1), p))
    assert cross.eval(1.0)[0] == pytest.approx(a * b)
    with pytest.raises(ValueError):
        polarise(qx, quadratic_sums(x, dyadic_sequence(1.0, 4)[4]), qx)


def test_decompose():
    x = step_path({0.5: 2.0})
    res = qv_estimate(x, dyadic_sequence(1.0, 8, 4))
    cont, jumps = decompose_qv(res.limit, x)
    assert np.all(np.abs(cont.values) < 1e-12)
    assert jumps == {0.5: 4.0}
    fs = faber_schauder_path(10)
    res = qv_estimate(fs, dyadic_sequence(1.0, 10, 6))
    cont, jumps = decompose_qv(res.limit, fs)
    assert jumps == {}
    assert cont.eval(1.0)[0] == pytest.approx(res.limit_at(1.0))
    bad = CadlagPath([0.0, 1.0], [[1.0], [0.0]])
    with pytest.raises(ValueError):
        decompose_qv(bad, fs)


def test_weighted_sum_constant_weight(fs14):
    seq = dyadic_sequence(1.0, 12, 10)
    rep = weighted_quad_sum(lambda t: np.ones_like(t), fs14, seq, variant="i")
    for n, v in zip(rep.levels, rep.values):
        assert v == pytest.approx(qv_level(fs14, seq[n]), abs=1e-13)


@pytest.mark.parametrize("variant", ["i", "ii", "iii", "iv"])
def test_weighted_sum_single_atom(variant):
    a = 1.5
    x = step_path({0.5: a})
    rep = weighted_quad_sum(lambda t: t, x, dyadic_sequence(1.0, 14, 8), variant=variant)
    assert rep.reference == pytest.approx(0.5 * a * a)
    errors = np.abs(rep.values - 0.5 * a * a)
    # right-point weights hit the atom exactly; left-point ones lag by one mesh
    if variant in ("ii", "iv"):
        assert np.all(errors < 1e-15)
    else:
        np.testing.assert_allclose(errors, a * a * 2.0 ** -np.array(rep.levels), rtol=1e-12)


def test_weighted_sum_bad_variant():
    with pytest.raises(ValueError):
        weighted_quad_sum(lambda t: t, step_path([]), dyadic_sequence(1.0, 3, 2), variant="v")


def test_qv_matrix_step():
    a, b = 2.0, -0.5
    res = qv_matrix(step_path({0.5: [a, b]}), dyadic_sequence(1.0, 8, 4))
    np.testing.assert_allclose(res.value_at_T, [[a * a, a * b], [a * b, b * b]])


def test_qv_matrix_independent_and_equal_coords(fs_oracle):
    f1, f2 = faber_schauder_path(14, seed=42), faber_schauder_path(14, seed=43)
    x = CadlagPath(f1.times, np.column_stack([f1.values[:, 0], f2.values[:, 0]]))
    res = qv_matrix(x, dyadic_sequence(1.0, 14, 12))
    m = res.q(14, 1.0)
    assert m[0, 1] == pytest.approx(fs_oracle["cross_42_43_level14"], abs=1e-12)
    assert abs(m[0, 1]) < 0.05
    y = CadlagPath(f1.times, np.column_stack([f1.values[:, 0], f1.values[:, 0]]))
    my = qv_matrix(y, dyadic_sequence(1.0, 10, 8)).value_at_T
    assert my[0, 1] == pytest.approx(my[0, 0], abs=1e-13)


def test_stieltjes_examples():
    g = faber_schauder_path(6, seed=9)
    g = CadlagPath(g.times, np.abs(np.cumsum(np.abs(np.diff(g.values[:, 0], prepend=0))))[:, None])
    assert stieltjes_integral(lambda t: 3.0 * np.ones_like(t), g) == pytest.approx(
        3.0 * (g.eval(1.0)[0] - g.eval(0.0)[0]))
    assert stieltjes_integral(lambda t: t, step_path({0.5: 1.0})) == pytest.approx(0.5)
    assert stieltjes_integral(lambda t: t, CadlagPath([0.0, 1.0], [[0.0], [1.0]])) == pytest.approx(0.5)


def test_quadratic_variation_estimator(fs14):
    est = QuadraticVariation(partition="dyadic:T=1.0,levels=10..14", tol=0.05).fit(fs14)
    assert est.converged_
    assert est.transform([1.0])[0] == pytest.approx(1.0, abs=1e-10)
    assert est.get_params()["tol"] == 0.05
