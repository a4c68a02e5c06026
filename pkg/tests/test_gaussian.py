import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pavecop.gaussian import (
    CovKind,
    FieldKind,
    GridField,
    _bridge_values,
    _tied_values,
    bridge_to_tied_down,
    covariance,
    integral_squared_weighted,
    sheet_to_bridge,
    simulate_sheet,
    simulate_sheets,
    simulate_tied_down,
)
from pavecop.models import CopulaModel

REPS = 20_000
M = 8


@pytest.fixture(scope="module")
def sheets():
    return simulate_sheets(M, REPS, 5)


def _cov_within(x, y, target, k=4.0):
    """Sample covariance within ``k`` standard errors of ``target``."""
    xc = x - x.mean()
    yc = y - y.mean()
    prod = xc * yc
    est = prod.mean()
    se = prod.std(ddof=1) / math.sqrt(len(x))
    return abs(est - target) <= k * se, est, se


# ---------------------------------------------------------------------------
# sheet


@given(st.integers(1, 40), st.integers(0, 2 ** 32))
@settings(max_examples=20, deadline=None)
def test_sheet_zero_on_axes(m, seed):
    f = simulate_sheet(m, seed)
    assert f.kind is FieldKind.SHEET
    assert np.all(f.values[0, :] == 0) and np.all(f.values[:, 0] == 0)


def test_sheet_deterministic():
    a = simulate_sheet(16, 3, 1, 2)
    b = simulate_sheet(16, 3, 1, 2)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_sheet(16, 3, 1, 3)
    assert not np.array_equal(a.values, c.values)


def test_stack_matches_single_streams():
    stack = simulate_sheets(6, 4, 11, 7)
    for r in range(4):
        np.testing.assert_array_equal(stack[r], simulate_sheet(6, 11, 7, r).values)


def test_sheet_variance_at_corner(sheets):
    var = sheets[:, -1, -1].var(ddof=1)
    assert abs(var - 1.0) <= 4 * math.sqrt(2 / REPS)


def test_sheet_covariance_center_corner(sheets):
    ok, est, se = _cov_within(sheets[:, M // 2, M // 2], sheets[:, -1, -1], 0.25)
    assert ok, (est, se)


def test_sheet_rejects_bad_resolution():
    with pytest.raises(ValueError):
        simulate_sheet(0, 1)


# ---------------------------------------------------------------------------
# bridge and tied-down bridge


def test_bridge_boundary():
    b = sheet_to_bridge(simulate_sheet(10, 4))
    assert b.kind is FieldKind.BRIDGE
    assert b.values[-1, -1] == 0.0
    assert np.all(b.values[0, :] == 0) and np.all(b.values[:, 0] == 0)


def test_tied_down_boundary():
    t = bridge_to_tied_down(sheet_to_bridge(simulate_sheet(10, 4)))
    assert t.kind is FieldKind.TIED_DOWN
    for edge in (t.values[0, :], t.values[-1, :], t.values[:, 0], t.values[:, -1]):
        assert np.all(edge == 0.0)


def test_transform_kind_checks():
    sheet = simulate_sheet(4, 1)
    with pytest.raises(ValueError):
        bridge_to_tied_down(sheet)
    with pytest.raises(ValueError):
        sheet_to_bridge(sheet_to_bridge(sheet))


def test_bridge_variance_center(sheets):
    b = sheets - np.multiply.outer(np.linspace(0, 1, M + 1), np.linspace(0, 1, M + 1)) * sheets[:, -1:, -1:]
    x = b[:, M // 2, M // 2]
    ok, est, se = _cov_within(x, x, 0.1875)
    assert ok, (est, se)


def test_tied_down_moments():
    t = simulate_tied_down(M, REPS, 6)
    c = t[:, M // 2, M // 2]
    ok, est, se = _cov_within(c, c, 1 / 16)
    assert ok, (est, se)
    ok, est, se = _cov_within(t[:, M // 4, M // 2], c, 0.03125)
    assert ok, (est, se)


@pytest.mark.parametrize("kind", [CovKind.SHEET, CovKind.BRIDGE, CovKind.TIED_DOWN])
def test_covariance_matrix_interior(kind):
    fields = simulate_sheets(4, REPS, 8)
    if kind is not CovKind.SHEET:
        fields = _bridge_values(fields)
        if kind is CovKind.TIED_DOWN:
            fields = _tied_values(fields)
    pts = [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)]
    for i, (a1, b1) in enumerate(pts):
        for a2, b2 in pts[i:]:
            target = covariance(kind, a1 / 4, b1 / 4, a2 / 4, b2 / 4)
            ok, est, se = _cov_within(fields[:, a1, b1], fields[:, a2, b2], target)
            assert ok, ((a1, b1, a2, b2), est, target, se)


# ---------------------------------------------------------------------------
# closed-form covariances


def test_covariance_examples():
    assert covariance(CovKind.TIED_DOWN, 0.5, 0.5, 0.5, 0.5) == pytest.approx(0.0625)
    assert covariance(CovKind.SHEET, 0.3, 0.7, 0.5, 0.5) == pytest.approx(0.15)


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_general_bridge_under_independence(s, t):
    ind = CopulaModel.independence()
    assert covariance(CovKind.GENERAL_BRIDGE, s, t, s, t, model=ind) == pytest.approx(
        s * t * (1 - s * t), abs=1e-15)
    assert covariance(CovKind.GENERAL_BRIDGE, s, t, s, t, model=ind) == pytest.approx(
        covariance(CovKind.BRIDGE, s, t, s, t), abs=1e-15)


def test_covariance_errors():
    with pytest.raises(ValueError):
        covariance(CovKind.GENERAL_BRIDGE, 0.1, 0.2, 0.3, 0.4)
    with pytest.raises(ValueError):
        covariance(CovKind.SHEET, 1.1, 0.2, 0.3, 0.4)


# ---------------------------------------------------------------------------
# weighted integral


def test_integral_examples():
    m = 16
    zero = GridField(m, np.zeros((m + 1, m + 1)))
    one = GridField(m, np.ones((m + 1, m + 1)))
    assert integral_squared_weighted(zero, 1.0, 0.0, 0.0) == 0.0
    assert integral_squared_weighted(one, 1.0, 0.0, 0.0) == pytest.approx(1.0, abs=1e-13)
    assert integral_squared_weighted(one, 1.0, 0.5, 0.5) == pytest.approx(0.25, abs=1e-13)


@given(st.floats(0.05, 1.0), st.floats(-0.45, 2.0), st.floats(-0.45, 2.0))
@settings(max_examples=40, deadline=None)
def test_integral_constant_field_window(w, a, b):
    m = 12
    one = np.ones((m + 1, m + 1))
    ref = w ** (2 * a + 1) / (2 * a + 1) * w ** (2 * b + 1) / (2 * b + 1)
    assert integral_squared_weighted(one, w, a, b) == pytest.approx(ref, rel=1e-10)


def test_integral_bilinear_field_exact():
    # the interpolant of a bilinear field is the field itself
    m = 8
    g = np.linspace(0, 1, m + 1)
    f = 1 + 2 * g[:, None] - g[None, :] + 3 * np.outer(g, g)
    ref = 0.0
    # int int (1 + 2u - v + 3uv)^2 du dv by expanding with moments 1/(k+1)
    coef = {(0, 0): 1, (1, 0): 2, (0, 1): -1, (1, 1): 3}
    for (i1, j1), c1 in coef.items():
        for (i2, j2), c2 in coef.items():
            ref += c1 * c2 / ((i1 + i2 + 1) * (j1 + j2 + 1))
    assert integral_squared_weighted(f, 1.0, 0.0, 0.0) == pytest.approx(ref, rel=1e-12)


def test_integral_refinement():
    def field(m):
        g = np.linspace(0, 1, m + 1)
        return np.sin(3 * g)[:, None] * np.cos(2 * g)[None, :] + np.outer(g, g)

    for w, a, b in ((1.0, 0.0, 0.0), (0.37, 0.3, -0.2)):
        coarse = integral_squared_weighted(field(64), w, a, b)
        fine = integral_squared_weighted(field(256), w, a, b)
        assert abs(coarse - fine) < 1e-3


def test_integral_batched():
    stack = simulate_tied_down(10, 5, 2)
    batch = integral_squared_weighted(stack, 0.6, 0.1, 0.2)
    single = [integral_squared_weighted(s, 0.6, 0.1, 0.2) for s in stack]
    np.testing.assert_allclose(batch, single, rtol=1e-13)


def test_integral_errors():
    one = np.ones((5, 5))
    with pytest.raises(ValueError):
        integral_squared_weighted(one, 1.0, -0.5, 0.0)
    with pytest.raises(ValueError):
        integral_squared_weighted(one, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# GridField


def test_gridfield_validation_and_io():
    with pytest.raises(ValueError):
        GridField(3, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        GridField(1, np.array([[0.0, np.nan], [0.0, 0.0]]))
    f = simulate_sheet(4, 9)
    back = np.loadtxt(f.dumps().splitlines(), delimiter=",")
    np.testing.assert_array_equal(back, f.values)
    assert f.at(0.5, 0.75) == f.values[2, 3]
    with pytest.raises(ValueError):
        f.at(0.3, 0.5)
