import numpy as np
import pytest

from pathcalc import (
    Functional,
    ambient,
    builtin,
    dyadic_sequence,
    faber_schauder_path,
    parse_functional_spec,
    pi_continuity_report,
    step_path,
    strict_causality_probe,
)
from pathcalc._spec import SpecError
from pathcalc.families import PointFunctional
from pathcalc.functional import (
    CRITERIA,
    horizontal_derivative,
    local_boundedness_probe,
    uniform_continuity_probe,
    vertical_derivative,
    vertical_hessian,
    vertical_modulus_estimate,
)

NAMES = ["eval", "qv_eval", "qv_integral", "follmer_grad", "bracket_1form", "markov_affine", "heat",
         "left_eval", "integral", "bracket", "constant"]


@pytest.fixture(scope="module")
def mixed():
    return step_path({0.3: 1.0, 0.5: -2.0, 1 / np.pi: 0.7}, x0=0.4) + faber_schauder_path(6, seed=1)


@pytest.mark.parametrize("name", NAMES + ["jump_at", "product"])
def test_along_pc_matches_generic_loop(name, mixed):
    F = builtin("eval") * builtin("qv_eval") if name == "product" else builtin(name)
    p = dyadic_sequence(1.0, 5)[5]
    with ambient(10):
        for G in (F, F.grad, F.hess):
            if G is None:
                continue
            for left in (True, False):
                a = np.asarray(G.along_pc(mixed, p, left), dtype=float)
                b = np.asarray(Functional.along_pc(G, mixed, p, left), dtype=float)
                np.testing.assert_allclose(a.reshape(b.shape), b, atol=1e-12)


def test_horizontal_examples(mixed):
    t = 0.41
    assert horizontal_derivative(builtin("eval", f="square"), t, mixed).value == 0.0
    tx = PointFunctional(lambda s, u: s * u[..., 0], dfdt=lambda s, u: u[..., 0])
    assert horizontal_derivative(tx, t, mixed).value == pytest.approx(mixed.eval(t)[0], abs=1e-8)
    with ambient(10):
        assert abs(horizontal_derivative(builtin("qv_integral", phi="one"), t, mixed).value) < 1e-8


def test_vertical_examples(mixed):
    t = 0.5
    sq = builtin("eval", f="square")
    g = vertical_derivative(sq, t, mixed)
    assert g.converged
    assert g.value == pytest.approx(2 * mixed.eval(t)[0], abs=1e-8)
    assert vertical_hessian(sq, t, mixed).value == pytest.approx(2.0, abs=1e-6)
    with ambient(10):
        # (phi + phi') x(t-) dx(t) with phi = identity weight on [x]
        F = builtin("qv_integral", phi="identity")
        v = vertical_derivative(F, t, mixed).value
        assert v == pytest.approx(2 * mixed.eval_left(t)[0] * mixed.jump(t)[0], abs=1e-6)
        G = builtin("follmer_grad", f="square")
        assert vertical_derivative(G, t, mixed).value == pytest.approx(2 * mixed.eval_left(t)[0], abs=1e-6)


def test_analytic_matches_numeric(mixed):
    with ambient(10):
        for name in NAMES:
            F = builtin(name)
            for t in (0.3, 0.41, 0.5):
                for exact, probe in ((F.grad, vertical_derivative), (F.hess, vertical_hessian),
                                     (F.dt, horizontal_derivative)):
                    if exact is None:
                        continue
                    num = np.asarray(probe(F, t, mixed).value, dtype=float)
                    a = np.broadcast_to(np.asarray(exact(t, mixed.stop(t)), dtype=float), num.shape)
                    np.testing.assert_allclose(a, num, atol=1e-6, err_msg=f"{name} {probe.__name__} {t}")


def test_causality_examples(mixed):
    assert strict_causality_probe(builtin("left_eval"), 0.5, mixed)
    assert not strict_causality_probe(builtin("eval", f="identity"), 0.5, mixed)
    assert strict_causality_probe(builtin("follmer_grad").grad, 0.5, mixed)


def test_continuity_report_eval():
    x = faber_schauder_path(8, seed=1)
    rep = pi_continuity_report(builtin("eval", f="sin"), x, 0.4, dyadic_sequence(1.0, 16, 4))
    assert rep.all_passed
    assert set(rep.summary()) == set(CRITERIA)
    # deviations shrink with the mesh
    d = rep["2c"].deviations
    assert d[-1] < d[0]


def test_continuity_report_step_grid_time():
    x = step_path({0.5: 1.0})
    rep = pi_continuity_report(builtin("eval", f="sin"), x, 0.5, dyadic_sequence(1.0, 12, 4))
    assert rep.all_passed
    with pytest.raises(ValueError):
        pi_continuity_report(builtin("eval"), x, 1.0, dyadic_sequence(1.0, 4, 2))


def test_modulus_examples():
    x = faber_schauder_path(8, seed=1)
    seq = dyadic_sequence(1.0, 8, 4)
    lin = vertical_modulus_estimate(builtin("eval", f="identity"), x, 1.0, 1.0, seq)
    np.testing.assert_allclose(lin["modulus"], lin["delta"], atol=1e-12)
    const = vertical_modulus_estimate(builtin("constant"), x, 1.0, 1.0, seq)
    assert np.all(const["modulus"] == 0)
    r = 1.0
    B = float(np.max(np.abs(x.values)))
    sq = vertical_modulus_estimate(builtin("eval", f="square"), x, 1.0, r, seq)
    # a, b in [-r, r]: |(y+a)^2 - (y+b)^2| = |a-b| |2y+a+b| <= (2B + 2r - delta) delta
    assert np.all(sq["modulus"] <= (2 * B + 2 * r - sq["delta"]) * sq["delta"] + 1e-12)
    with pytest.raises(ValueError):
        vertical_modulus_estimate(builtin("eval"), x, 1.0, 0.0, seq)


def test_boundedness_and_uniform_probes():
    x = faber_schauder_path(8, seed=1)
    out = local_boundedness_probe(builtin("eval", f="identity"), x, dyadic_sequence(1.0, 10, 4))
    assert out["growth"] <= float(np.max(np.abs(x.values))) + 1e-12
    assert uniform_continuity_probe(builtin("eval", f="sin"), 0.5, x)["passed"]
    # continuous perturbations leave the jump at t0 unchanged
    jump = builtin("jump_at", t0=0.5)
    y = step_path({0.5: 1.0})
    assert uniform_continuity_probe(jump, 0.7, y)["passed"]


def test_builtin_classes():
    assert builtin("markov_affine", alpha=1, beta=2).declared_class == "classM"
    F = builtin("markov_affine", alpha=1, beta=2)
    x = step_path({0.5: 1.0})
    assert F(1.0, x) == pytest.approx(3.0)
    G = builtin("follmer_grad", f="square")
    assert G.declared_class == "classM"
    assert G.grad(0.7, x.stop(0.7)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        builtin("nope")
    with pytest.raises(ValueError):
        builtin("heat", m=2)


def test_functional_algebra(mixed):
    F, G = builtin("eval", f="square"), builtin("eval", f="identity")
    t, y = 0.6, mixed.stop(0.6)
    assert (F + G)(t, y) == pytest.approx(F(t, y) + G(t, y))
    assert (2.0 * F)(t, y) == pytest.approx(2 * F(t, y))
    assert (F * G)(t, y) == pytest.approx(F(t, y) * G(t, y))
    assert (F * G).grad(t, y) == pytest.approx(3 * mixed.eval(t)[0] ** 2)


def test_parse_functional_spec():
    assert parse_functional_spec("heat:n=3").name == "heat3"
    F = parse_functional_spec("affine:a=1,b=2")
    assert F(1.0, step_path({0.5: 1.0})) == pytest.approx(3.0)
    assert parse_functional_spec("qvint:phi=identity").declared_class == "C12"
    with pytest.raises(SpecError) as exc:
        parse_functional_spec("heat:n=q")
    assert "'q'" in str(exc.value) and "position 7" in str(exc.value)
    with pytest.raises(SpecError):
        parse_functional_spec("wobble:x=1")
