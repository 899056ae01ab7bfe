import math

import numpy as np
import pytest

from conftest import FAMILY_SPECS
from mbm.errors import DomainError, HurstSpecError, ParameterDomainError
from mbm.hurst import (
    Family,
    Smoothness,
    eval_h,
    make_constant,
    make_cusp,
    make_plateau,
    make_sine,
    parse_hurst_spec,
    smoothstep,
)

PLATEAU = make_plateau(0.3, 0.7, 0.4, 0.6)


def second_diff(f, t, s):
    return (f(t + s) - 2.0 * f(t) + f(t - s)) / (s * s)


def plateau_h2(t, hmin=0.3, hmax=0.7, a=0.4, b=0.6, w=0.1):
    """Analytic h'' of the plateau family from the quintic smoothstep."""
    def s2(u):
        return 0.0 if (u <= 0.0 or u >= 1.0) else 60 * u - 180 * u**2 + 120 * u**3
    return (hmax - hmin) * (s2((a - t) / w) + s2((t - b) / w)) / w**2


def test_constant():
    f = make_constant(0.5)
    assert eval_h(f, 0.37) == 0.5
    assert f.h_min == f.h_max == 0.5
    assert f.min_set.q == 1 and f.min_set.intervals == ((0.0, 1.0),)
    assert eval_h(make_constant(0.7), 1.0) == 0.7


@pytest.mark.parametrize("H", [1.2, 0.0, 1.0, -0.1, float("nan")])
def test_constant_domain(H):
    with pytest.raises(ParameterDomainError):
        make_constant(H)


def test_plateau_examples():
    assert eval_h(PLATEAU, 0.5) == 0.3
    assert eval_h(PLATEAU, 0.4) == 0.3
    assert eval_h(PLATEAU, 0.4 - 1e-6) > 0.3
    assert eval_h(PLATEAU, 0.0) == 0.7
    assert PLATEAU.smoothness is Smoothness.CTWO
    assert PLATEAU.min_set.intervals == ((0.4, 0.6),)
    assert (PLATEAU.h_min, PLATEAU.h_max) == (0.3, 0.7)


@pytest.mark.parametrize("args", [(0.7, 0.3, 0.4, 0.6), (0.3, 0.7, 0.6, 0.4), (0.3, 1.0, 0.4, 0.6),
                                  (0.3, 0.7, 0.0, 0.6), (0.3, 0.7, 0.4, 1.0)])
def test_plateau_ordering_errors(args):
    with pytest.raises(ParameterDomainError):
        make_plateau(*args)


@pytest.mark.parametrize("t", [0.32, 0.35, 0.38, 0.63, 0.66])
def test_plateau_second_derivative_inside_band(t):
    # fourth derivative is ~1e6 on the band, so a step of 1e-5 keeps truncation ~1e-5
    assert second_diff(PLATEAU, t, 1e-5) == pytest.approx(plateau_h2(t), abs=1e-4)


def test_plateau_knot_second_difference_converges():
    # h'' is continuous (zero) at the knot but h''' jumps, so the central
    # quotient converges only linearly in the step
    errs = [abs(second_diff(PLATEAU, 0.4, s) - plateau_h2(0.4)) for s in (1e-3, 1e-4)]
    assert 5.0 < errs[0] / errs[1] < 20.0
    assert abs(second_diff(PLATEAU, 0.4, 1e-6)) < 1e-2


def test_plateau_analytic_second_derivative_continuous_across_knots():
    for knot in (0.3, 0.4, 0.6, 0.7):
        for eps in (1e-9, 1e-7):
            assert abs(plateau_h2(knot + eps) - plateau_h2(knot - eps)) < 1e-2


def test_smoothstep_endpoints():
    u = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.array_equal(smoothstep(u), [0.0, 0.0, 0.5, 1.0, 1.0])


def test_cusp_examples():
    f = make_cusp(0.3, 0.5, 2, 1.0, 0.8)
    assert eval_h(f, 0.5) == 0.3
    assert eval_h(f, 0.6) == pytest.approx(0.31, abs=1e-15)
    assert eval_h(f, 0.9) == pytest.approx(0.46, abs=1e-15)
    assert f.min_set.points == ((0.5, 2),)
    assert f.min_set.q == 0


def test_cusp_order_three_sign_pattern():
    f = make_cusp(0.3, 0.4, 3, 4.0, 0.75)
    x, s = 0.4, 1e-3
    right = (f(x + 3 * s) - 3 * f(x + 2 * s) + 3 * f(x + s) - f(x)) / s**3
    left = (f(x) - 3 * f(x - s) + 3 * f(x - 2 * s) - f(x - 3 * s)) / s**3
    assert right > 0 and left < 0
    assert f.smoothness is Smoothness.CTWO


def test_cusp_even_order_sign_pattern():
    f = make_cusp(0.3, 0.5, 2, 1.5, 0.8)
    x, s = 0.5, 1e-3
    right = (f(x + 2 * s) - 2 * f(x + s) + f(x)) / s**2
    left = (f(x) - 2 * f(x - s) + f(x - 2 * s)) / s**2
    assert right > 0 and left > 0


def test_cusp_declared_smoothness():
    assert make_cusp(0.3, 0.5, 1, 1.0, 0.8).smoothness is Smoothness.C0
    assert make_cusp(0.3, 0.5, 2, 4.0, 0.8).smoothness is Smoothness.C0  # cap reached
    assert make_cusp(0.3, 0.5, 2, 1.5, 0.8).smoothness is Smoothness.CINFINITY  # cap never reached
    assert make_cusp(0.3, 0.5, 2, 0.1, 0.8).smoothness is Smoothness.CINFINITY


def test_cusp_glued_cap_is_c2():
    f = make_cusp(0.3, 0.4, 3, 4.0, 0.75)
    t = np.linspace(0.0, 1.0, 20001)[1:-1]
    s = 1e-4
    d2 = (f(t + s) - 2 * f(t) + f(t - s)) / s**2
    # bounded second differences everywhere: no kink
    assert np.max(np.abs(d2)) < 200.0
    assert np.max(f(t)) <= 0.75


@pytest.mark.parametrize("args", [(0.8, 0.5, 2, 1.0, 0.3), (0.3, 0.5, 0, 1.0, 0.8), (0.3, 0.5, 2, -1.0, 0.8),
                                  (0.3, 1.2, 2, 1.0, 0.8), (0.3, 0.5, 2.5, 1.0, 0.8)])
def test_cusp_errors(args):
    with pytest.raises(ParameterDomainError):
        make_cusp(*args)


def test_sine_examples():
    f = make_sine(0.5, 0.2, 1)
    assert f.h_min == pytest.approx(0.3)
    assert eval_h(f, 0.0) == pytest.approx(0.3, abs=1e-15)
    assert all(p == 2 for _, p in f.min_set.points)
    assert f.smoothness is Smoothness.CINFINITY
    g = make_sine(0.5, 0.2, 3)
    for x, _ in g.min_set.points:
        assert eval_h(g, x) == pytest.approx(g.h_min, abs=1e-15)


@pytest.mark.parametrize("args", [(0.1, 0.2, 1), (0.9, 0.2, 1), (0.5, 0.0, 1), (0.5, 0.2, 0)])
def test_sine_errors(args):
    with pytest.raises(ParameterDomainError):
        make_sine(*args)


@pytest.mark.parametrize("t", [-0.01, 1.01, float("nan")])
def test_eval_domain(t):
    with pytest.raises(DomainError):
        eval_h(PLATEAU, t)


@pytest.mark.parametrize("spec", FAMILY_SPECS)
def test_range_on_grid(spec):
    f = parse_hurst_spec(spec)
    v = f(np.arange(1001) / 1000)
    assert np.all((v > 0.0) & (v < 1.0))
    assert np.all(v >= f.h_min) and np.all(v <= f.h_max + 1e-15)


@pytest.mark.parametrize("spec", FAMILY_SPECS)
def test_min_set_is_exact(spec):
    f = parse_hurst_spec(spec)
    t = np.arange(100001) / 1e5
    v = f(t)
    d = f.min_set.distance(t)
    on = d == 0.0
    for x, _ in f.min_set.points:
        on |= np.abs(t - x) < 1e-12
    assert np.all(np.abs(v[on] - f.h_min) <= 1e-12)
    if not f.is_constant:
        assert np.all(v[d > 1e-3] > f.h_min)
    assert abs(v.min() - f.h_min) <= 1e-12


@pytest.mark.parametrize("f,x", [(make_cusp(0.3, 0.5, 2, 1.5, 0.8), 0.5), (make_cusp(0.3, 0.5, 4, 20.0, 0.8), 0.5),
                                 (PLATEAU, 0.5)])
def test_symmetry(f, x):
    d = np.linspace(0.0, 0.5, 1001)
    assert np.allclose(f(x + d), f(x - d), rtol=0.0, atol=1e-12)


def test_parse_roundtrip_and_key_order():
    f = parse_hurst_spec("plateau:b=0.6,a=0.4,hmax=0.7,hmin=0.3")
    assert f == PLATEAU
    assert parse_hurst_spec(f.spec) == f
    assert parse_hurst_spec("const:H=0.5").family is Family.CONSTANT
    assert parse_hurst_spec("sine:freq=2,amp=0.2,base=0.5") == make_sine(0.5, 0.2, 2)


@pytest.mark.parametrize("text,key", [
    ("const:H=1.5", "H"),
    ("const:H=abc", "H"),
    ("plateau:hmin=0.3,hmax=0.7,a=0.4", "b"),
    ("plateau:hmin=0.3,hmax=0.7,a=0.4,b=0.6,z=1", "z"),
    ("cusp:hmin=0.3,x=0.5,p=2.5,c=1,cap=0.8", "p"),
    ("cusp:hmin=0.3,x=0.5,p=2,c=1,cap=0.2", "cap"),
    ("wave:H=0.5", "family"),
])
def test_parse_errors_name_key(text, key):
    with pytest.raises(HurstSpecError) as info:
        parse_hurst_spec(text)
    assert info.value.key == key


def test_hashable_for_caching():
    assert hash(make_plateau(0.3, 0.7, 0.4, 0.6)) == hash(PLATEAU)
    assert len({PLATEAU, make_plateau(0.3, 0.7, 0.4, 0.6), make_constant(0.5)}) == 2
    assert math.isfinite(PLATEAU(0.45))
