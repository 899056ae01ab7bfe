import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FAMILY_SPECS
from mbm.errors import DomainError
from mbm.hurst import make_constant, make_cusp, make_plateau, parse_hurst_spec
from mbm.kernel import (
    MomentReport,
    c_coef,
    expected_qv,
    increment_cov,
    moment_report,
    qv_variance,
    r_cov,
    u_ratio,
)

ORACLES = json.loads((Path(__file__).parent / "fixtures" / "oracles.json").read_text())
PLATEAU = make_plateau(0.3, 0.7, 0.4, 0.6)
CUSP = make_cusp(0.3, 0.5, 2, 1.5, 0.8)


def fbm_cov(H, t, s):
    return 0.5 * (t ** (2 * H) + s ** (2 * H) - abs(t - s) ** (2 * H))


def naive_increment_cov(f, n, k, i, j):
    R = lambda a, b: r_cov(f, a / n, b / n)
    return R(i + k, j + k) - R(i, j + k) - R(i + k, j) + R(i, j)


@pytest.mark.parametrize("x", ["0.3", "0.5", "0.8"])
def test_c_coef_oracle(x):
    assert c_coef(float(x)) == pytest.approx(float(ORACLES["c_coef"][x]), rel=1e-14)


def test_c_coef_half_and_continuity():
    assert c_coef(0.5) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-15)
    assert c_coef(0.5 - 1e-9) == pytest.approx(c_coef(0.5), rel=1e-8)
    with pytest.raises(DomainError):
        c_coef(1.0)


@pytest.mark.parametrize("entry", ORACLES["r_cov_plateau"], ids=lambda e: f"{e['t']}-{e['s']}")
def test_r_cov_oracle(entry):
    got = r_cov(PLATEAU, float(entry["t"]), float(entry["s"]))
    assert got == pytest.approx(float(entry["value"]), rel=1e-13)


def test_r_cov_constant_reduces_to_fbm():
    g = np.linspace(0.02, 1.0, 50)
    for H in (0.2, 0.5, 0.8):
        f = make_constant(H)
        T, S = np.meshgrid(g, g, indexing="ij")
        got = r_cov(f, T, S)
        want = 0.5 * (T ** (2 * H) + S ** (2 * H) - np.abs(T - S) ** (2 * H))
        assert np.allclose(got, want, rtol=1e-12, atol=0.0)


def test_r_cov_examples():
    f = make_constant(0.5)
    assert r_cov(f, 0.3, 0.7) == pytest.approx(0.3, rel=1e-15)
    assert r_cov(f, 0.0, 0.7) == 0.0
    assert r_cov(PLATEAU, 0.5, 0.5) == pytest.approx(0.5 ** 0.6, rel=1e-15)
    with pytest.raises(DomainError):
        r_cov(f, 1.5, 0.2)


@pytest.mark.parametrize("spec", FAMILY_SPECS)
def test_r_cov_symmetric(spec):
    f = parse_hurst_spec(spec)
    g = np.arange(1, 65) / 64
    T, S = np.meshgrid(g, g, indexing="ij")
    M = r_cov(f, T, S)
    assert np.array_equal(M, M.T)
    assert np.all(np.diag(M) > 0.0)


@pytest.mark.parametrize("family,key", [(PLATEAU, "increment_cov_plateau_256"), (CUSP, "increment_cov_cusp_256")])
def test_increment_cov_oracle(family, key):
    for e in ORACLES[key]:
        got = increment_cov(family, 256, e["k"], e["i"], e["j"])
        want = float(e["value"])
        # absolute scale: a typical increment variance on this grid
        assert abs(got - want) <= 1e-14 * 0.03 + 1e-12 * abs(want)


def test_increment_cov_fbm_closed_form():
    H, n = 0.7, 100
    want = 0.5 * n ** (-2 * H) * (3 ** (2 * H) - 2 * 2 ** (2 * H) + 1)
    got = increment_cov(make_constant(H), n, 1, 10, 12)
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(float(ORACLES["increment_cov_const_07"]), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("H", [0.2, 0.5, 0.9])
def test_increment_variance_constant(H, k):
    n = 1000
    for i in (0, 17, n - k):
        assert increment_cov(make_constant(H), n, k, i, i) == pytest.approx((k / n) ** (2 * H), rel=1e-13)


def test_brownian_increments_uncorrelated():
    f = make_constant(0.5)
    assert increment_cov(f, 100, 1, 3, 4) == 0.0
    assert increment_cov(f, 100, 1, 3, 90) == 0.0


@settings(max_examples=40, deadline=None)
@given(i=st.integers(0, 62), j=st.integers(0, 62), k=st.sampled_from([1, 2]))
def test_increment_cov_matches_naive_on_coarse_grid(i, j, k):
    n = 64
    i, j = min(i, n - k), min(j, n - k)
    got = increment_cov(PLATEAU, n, k, i, j)
    want = naive_increment_cov(PLATEAU, n, k, i, j)
    assert abs(got - want) < 1e-13
    assert abs(got - increment_cov(PLATEAU, n, k, j, i)) < 1e-16


def test_increment_cov_index_errors():
    with pytest.raises(DomainError):
        increment_cov(PLATEAU, 10, 2, 9, 0)
    with pytest.raises(DomainError):
        increment_cov(PLATEAU, 10, 1, -1, 0)


def test_expected_qv_closed_forms():
    f = make_constant(0.5)
    assert expected_qv(f, 100, 2) == pytest.approx(1.98, rel=1e-14)
    assert expected_qv(f, 100, 1) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(DomainError):
        expected_qv(f, 1, 2)


@pytest.mark.parametrize("entry", ORACLES["expected_qv"], ids=lambda e: f"{e['family']}-{e['k']}")
def test_expected_qv_oracle(entry):
    f = PLATEAU if entry["family"] == "plateau" else CUSP
    assert expected_qv(f, entry["n"], entry["k"]) == pytest.approx(float(entry["value"]), rel=1e-13)


def test_u_ratio_examples():
    assert u_ratio(make_constant(0.5), 100) == pytest.approx(100 / 198, rel=1e-14)
    for H in (0.3, 0.65):
        for n in (3, 57, 1000):
            want = n * (1 / n) ** (2 * H) / ((n - 1) * (2 / n) ** (2 * H))
            assert u_ratio(make_constant(H), n) == pytest.approx(want, rel=1e-13)


def test_u_ratio_plateau_approaches_limit():
    errs = [abs(u_ratio(PLATEAU, 2**m) - 2**-0.6) for m in (8, 10, 12)]
    assert errs[0] > errs[1] > errs[2]


def test_qv_variance_examples():
    f = make_constant(0.5)
    assert qv_variance(f, 2, 1) == pytest.approx(1.0, rel=1e-15)
    # independent Brownian increments: var = 2 * n * (1/n)^2
    assert qv_variance(f, 300, 1) == pytest.approx(2.0 / 300, rel=1e-13)
    with pytest.raises(DomainError):
        qv_variance(f, 1, 2)


@pytest.mark.parametrize("spec", FAMILY_SPECS)
@pytest.mark.parametrize("k", [1, 2])
def test_qv_variance_brute_force(spec, k):
    f = parse_hurst_spec(spec)
    n = 40
    r = np.array([[naive_increment_cov(f, n, k, i, j) for j in range(n - k + 1)] for i in range(n - k + 1)])
    got = qv_variance(f, n, k)
    assert got == pytest.approx(2.0 * np.sum(r * r), rel=1e-10)
    assert got >= 2.0 * np.sum(np.diag(r) ** 2)


def test_qv_variance_worker_independent():
    a = qv_variance(PLATEAU, 1500, 2, workers=1)
    b = qv_variance(PLATEAU, 1500, 2, workers=4)
    c = qv_variance(PLATEAU, 1500, 2, workers=7)
    assert a == b == c


def test_moment_report_row():
    m = moment_report(PLATEAU, 128)
    assert isinstance(m, MomentReport)
    row = m.as_row()
    assert tuple(row) == MomentReport.CSV_FIELDS
    assert row["k"] == 2
    assert m.u_ratio == m.ev1 / m.ev2
    assert m.hmin_target == 2 ** -0.6
    assert moment_report(PLATEAU, 128, variance=False).var1 is None
