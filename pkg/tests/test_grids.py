import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmtherm.grids import FrequencyGrid, TimeGrid, adaptive_edges, panel_nodes


class TestTimeGrid:
    def test_defaults(self):
        g = TimeGrid()
        assert g.dt == pytest.approx(0.01)
        assert len(g) == 5001
        assert g.times[0] == 0.0 and g.times[-1] == pytest.approx(50.0)

    def test_from_dt(self):
        assert TimeGrid.from_dt(20.0, 0.025).n_steps == 800

    @pytest.mark.parametrize("kw", [dict(t_max=0), dict(t_max=-1), dict(n_steps=0),
                                    dict(n_steps=2.5)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TimeGrid(**kw)

    def test_monotone(self):
        assert np.all(np.diff(TimeGrid(3.0, 17).times) > 0)


class TestFrequencyGrid:
    @pytest.mark.parametrize("wc", [0.5, 3.0, 10.0, 40.0])
    def test_constant_reproduces_width(self, wc):
        fg = FrequencyGrid.build(wc, 50.0)
        assert fg.weights.sum() == pytest.approx(fg.omega_max, rel=1e-10)
        assert fg.omega_max == 40 * max(wc, 1.0)

    def test_nodes_positive_increasing(self):
        fg = FrequencyGrid.build(10.0, 50.0)
        assert fg.nodes[0] > 0
        assert np.all(np.diff(fg.nodes) > 0)
        assert np.all(fg.weights > 0)

    def test_log_densification_near_zero(self):
        fg = FrequencyGrid.build(10.0, 50.0)
        assert np.sum(fg.nodes < 1e-3) > 100

    def test_panel_width_follows_horizon(self):
        short = FrequencyGrid.build(10.0, 50.0)
        long = FrequencyGrid.build(10.0, 400.0)
        assert len(long) > 4 * len(short) / 2

    def test_oscillatory_integral(self):
        # int_0^W cos(w t) exp(-a w) dw at t = 50 in closed form
        fg = FrequencyGrid.build(10.0, 50.0)
        t, a = 50.0, 0.5
        w = fg.omega_max
        exact = (a + np.exp(-a * w) * (t * np.sin(t * w) - a * np.cos(t * w))) / (a * a + t * t)
        got = fg.integrate(np.cos(fg.nodes * t) * np.exp(-a * fg.nodes))
        assert got == pytest.approx(exact, abs=1e-10)

    def test_rejects_unsorted_edges(self):
        with pytest.raises(ValueError):
            FrequencyGrid.from_edges([0.0, 2.0, 1.0])

    @settings(max_examples=30, deadline=None)
    @given(k=st.integers(0, 31))
    def test_gauss_legendre_exact_for_polynomials(self, k):
        nodes, weights = panel_nodes(np.array([0.0, 0.5, 2.0]))
        assert np.dot(weights, nodes ** k) == pytest.approx(2.0 ** (k + 1) / (k + 1), rel=1e-12)


class TestAdaptive:
    def test_refines_near_spike(self):
        f = lambda x: 1e-3 / ((x - 0.3) ** 2 + 1e-6)
        edges = adaptive_edges(f, np.linspace(0.0, 1.0, 3), rtol=1e-10)
        nodes, weights = panel_nodes(edges)
        exact = 1e-3 / 1e-3 * (np.arctan(0.7 / 1e-3) + np.arctan(0.3 / 1e-3))
        assert np.dot(weights, f(nodes)) == pytest.approx(exact, rel=1e-8)
        assert np.min(np.diff(edges)) < 1e-2

    def test_smooth_function_stays_coarse(self):
        edges = adaptive_edges(np.exp, np.array([0.0, 1.0]))
        assert edges.size <= 3
