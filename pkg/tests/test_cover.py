import numpy as np
import pytest

from hjlab.cover import (
    ClosedOneForm,
    CoverWindow,
    constant_matrix,
    coordinate_forms,
    f_eps,
    lipschitz_bound_G,
    period_map,
    preimage_window,
)
from hjlab.errors import DegenerateForms
from hjlab.expressions import parse_expression


def winding_form():
    return ClosedOneForm(constant=np.array([1.0]),
                         potential=parse_expression("0.1*sin(2pi*x)", 1))


def line_integral_oracle(form, x0, x1, n=200001):
    # numerical line integral of the form along the straight segment
    ts = np.linspace(0.0, 1.0, n)
    pts = (x0 + ts * (x1 - x0))[:, None]
    vals = form.covector(pts)[:, 0] * (x1 - x0)
    return np.trapezoid(vals, ts)


def test_period_map_identity_winding():
    forms = coordinate_forms(2)
    g = period_map(forms, np.array([3.5, -2.0]))
    assert np.allclose(g, [3.5, -2.0])


def test_period_map_base_point():
    forms = coordinate_forms(2)
    x0 = np.array([0.75, 1.25])
    assert np.allclose(period_map(forms, x0, x0), 0.0)


def test_period_map_winding_against_line_integral():
    form = winding_form()
    val = period_map([form], np.array([1.25]))
    # closed form: 1.25 + 0.1 sin(pi/2) = 1.35
    assert val[0] == pytest.approx(1.35, abs=1e-12)
    oracle = line_integral_oracle(form, 0.0, 1.25)
    assert val[0] == pytest.approx(oracle, abs=1e-8)


def test_deck_equivariance():
    forms = [winding_form()]
    A = constant_matrix(forms)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-3, 3, size=(1,))
        k = rng.integers(-4, 5, size=(1,)).astype(float)
        lhs = period_map(forms, x + k) - period_map(forms, x)
        assert np.allclose(lhs, A @ k, atol=1e-12)


def test_f_eps():
    assert np.allclose(f_eps(0.1, np.array([3.0, 4.0])), [0.3, 0.4])
    g = np.array([1.7, -2.2])
    assert np.array_equal(f_eps(1.0, g), g)
    with pytest.raises(ValueError):
        f_eps(0.0, g)


def test_f_eps_lipschitz_sampled():
    # composition with the period map is eps * bound Lipschitz in cover metric
    forms = [winding_form()]
    eps = 0.2
    bound = eps * lipschitz_bound_G(forms)
    rng = np.random.default_rng(1)
    xs = rng.uniform(-5, 5, size=(200, 1))
    ys = xs + rng.uniform(-0.05, 0.05, size=xs.shape)
    fx = f_eps(eps, period_map(forms, xs))
    fy = f_eps(eps, period_map(forms, ys))
    quot = np.abs(fx - fy)[:, 0] / np.abs(xs - ys)[:, 0]
    assert np.max(quot) <= bound * (1 + 1e-6)


def test_lipschitz_bound_trivial_and_winding():
    assert lipschitz_bound_G(coordinate_forms(3)) == pytest.approx(1.0)
    # dense-grid oracle: max |1 + 0.2 pi cos(2 pi x)| = 1 + 0.2 pi
    assert lipschitz_bound_G([winding_form()]) == pytest.approx(1 + 0.2 * np.pi, abs=1e-4)


def test_lipschitz_bound_scaling():
    f1 = winding_form()
    f3 = ClosedOneForm(constant=np.array([3.0]),
                       potential=parse_expression("0.3*sin(2pi*x)", 1))
    assert lipschitz_bound_G([f3]) == pytest.approx(3 * lipschitz_bound_G([f1]), abs=1e-9)


def test_preimage_window_linear():
    w = preimage_window(0.1, 0.0, 1.0, coordinate_forms(1), cell_res=8)
    assert w.box_radius == 10
    assert w.cell_res == 8
    assert w.points_per_axis == 21 * 8 + 1


def test_preimage_window_shrinks_to_single_cell():
    w = preimage_window(0.5, 0.0, 1e-9, coordinate_forms(1), cell_res=4)
    assert w.box_radius == 1  # ceil of a tiny positive radius
    w2 = preimage_window(0.5, 0.0, 1e-9, coordinate_forms(1), cell_res=4, extra_cells=0)
    assert w2.box_radius <= 1


def test_preimage_window_monotone_in_eps():
    forms = coordinate_forms(1)
    w1 = preimage_window(0.05, 0.0, 1.0, forms, cell_res=4)
    w2 = preimage_window(0.1, 0.0, 1.0, forms, cell_res=4)
    assert w1.box_radius >= w2.box_radius


def test_preimage_window_winding_containment():
    # exhaustive scan: every cover point with |F_eps(G(x)) - center| <= r
    # lies inside the returned box
    forms = [winding_form()]
    eps, r = 0.25, 0.8
    w = preimage_window(eps, 0.0, r, forms, cell_res=4)
    lam = float(np.linalg.svd(constant_matrix(forms), compute_uv=False)[-1])
    inflation = int(np.ceil(2 * 0.1 / (eps * lam)))
    assert w.box_radius == int(np.ceil(r / (eps * lam))) + inflation
    xs = np.linspace(-3 * w.box_radius, 3 * w.box_radius, 20001)[:, None]
    fe = f_eps(eps, period_map(forms, xs))[:, 0]
    hit = xs[np.abs(fe) <= r][:, 0]
    assert hit.min() >= -w.box_radius and hit.max() <= w.box_radius + 1


def test_preimage_window_degenerate_forms():
    forms = [ClosedOneForm(np.array([1.0, 0.0])), ClosedOneForm(np.array([2.0, 0.0]))]
    with pytest.raises(DegenerateForms):
        preimage_window(0.1, np.zeros(2), 1.0, forms, cell_res=4)


def test_window_validation():
    with pytest.raises(ValueError):
        CoverWindow(box_radius=-1, cell_res=4, margin=0.0)
    with pytest.raises(ValueError):
        CoverWindow(box_radius=1, cell_res=4, margin=-0.5)


def test_form_potential_must_be_periodic():
    with pytest.raises(ValueError):
        ClosedOneForm(np.array([1.0]), potential=parse_expression("sin(pi*x)", 1))
