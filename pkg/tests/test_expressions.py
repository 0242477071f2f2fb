import numpy as np
import pytest

from hjlab.expressions import parse_expression


def pt(*vals):
    return np.array(vals, dtype=float)


def test_constant_and_sum():
    e = parse_expression("1.5 + 0.5", dim=1)
    assert e(pt(0.3)) == 2.0


def test_cos_wave():
    e = parse_expression("cos(2pi*x)", dim=1)
    xs = np.linspace(0, 1, 7)[:, None]
    assert np.allclose(e(xs), np.cos(2 * np.pi * xs[:, 0]))


def test_pi_literals_and_scaling():
    e = parse_expression("0.8*cos(0.5pi*x + 0.25)", dim=1)
    assert np.isclose(e(pt(1.0)), 0.8 * np.cos(0.5 * np.pi + 0.25))
    e2 = parse_expression("pi", dim=1)
    assert e2(pt(0.0)) == np.pi


def test_multi_axis_wave():
    e = parse_expression("sin(2pi*x1 - 2pi*x2 + 1)", dim=2)
    assert np.isclose(e(pt(0.25, 0.5)), np.sin(2 * np.pi * 0.25 - np.pi + 1))


def test_abs_and_minmax():
    e = parse_expression("abs(x)", dim=1)
    assert e(pt(-2.5)) == 2.5
    e2 = parse_expression("min(2*x + 1, -1*x + 3)", dim=1)
    assert e2(pt(0.0)) == 1.0
    assert e2(pt(4.0)) == -1.0
    e3 = parse_expression("max(x, -1*x)", dim=1)
    assert e3(pt(-0.7)) == pytest.approx(0.7)


def test_lipschitz_bounds():
    # term-by-term: |a|*|w| for waves, |w| for abs, max slope for min/max
    assert parse_expression("cos(2pi*x)", 1).lipschitz() == pytest.approx(2 * np.pi)
    assert parse_expression("0.5*sin(2pi*x)+abs(x)", 1).lipschitz() == pytest.approx(np.pi + 1)
    assert parse_expression("min(2*x+1, -1*x+3)", 1).lipschitz() == pytest.approx(2.0)
    assert parse_expression("cos(0.5pi*x)", 1).lipschitz() == pytest.approx(0.5 * np.pi)


def test_sampled_lipschitz_never_exceeds_symbolic():
    rng = np.random.default_rng(3)
    for src in ["cos(2pi*x) + 0.3*sin(4pi*x + 1)", "abs(x) + 0.2*cos(2pi*x)",
                "min(x + 1, -2*x + 1) + 0.5"]:
        e = parse_expression(src, 1)
        k = e.lipschitz()
        xs = np.sort(rng.uniform(-3, 3, 400))[:, None]
        vals = e(xs)
        quot = np.abs(np.diff(vals)) / np.diff(xs[:, 0])
        assert np.max(quot) <= k + 1e-9


def test_gradient_matches_finite_differences():
    e = parse_expression("0.7*sin(2pi*x1 + 1) + cos(2pi*x2)", dim=2)
    x = np.array([[0.13, 0.77], [0.5, 0.25]])
    g = e.gradient(x)
    h = 1e-6
    for axis in range(2):
        dx = np.zeros(2)
        dx[axis] = h
        fd = (e(x + dx) - e(x - dx)) / (2 * h)
        assert np.allclose(g[..., axis], fd, atol=1e-6)


def test_gradient_refuses_kinks():
    e = parse_expression("abs(x)", 1)
    with pytest.raises(ValueError):
        e.gradient(np.array([[0.5]]))


def test_periodicity_detection():
    assert parse_expression("cos(2pi*x)", 1).is_cell_periodic()
    assert parse_expression("sin(4pi*x + 0.3)", 1).is_cell_periodic()
    assert not parse_expression("cos(0.5pi*x)", 1).is_cell_periodic()
    assert not parse_expression("abs(x)", 1).is_cell_periodic()
    assert parse_expression("2.5", 1).is_cell_periodic()


def test_parse_errors_carry_position():
    with pytest.raises(ValueError, match="position"):
        parse_expression("cos(2pi*q)", 1)
    with pytest.raises(ValueError):
        parse_expression("", 1)
    with pytest.raises(ValueError, match="out of range"):
        parse_expression("sin(2pi*x3)", 2)
