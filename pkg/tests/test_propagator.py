import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartree_lab.grid import Field, lp_norm, make_grid
from hartree_lab.observables import energy, mass
from hartree_lab.potential import (constant_kernel, delta_kernel, inverse_power, sample_potential,
                                   zero_potential)
from hartree_lab.propagator import (EvolutionError, EvolveConfig, evolve, free_propagate,
                                    nonlinear_phase_step, picard_iterate, strang_evolve)


def periodized_free_gaussian(g, s, t, images=2):
    """Exact free solution for ``exp(-|x|^2 / (2 s^2))`` summed over periodic images."""
    z = s**2 + 1j * t
    out = np.zeros(g.shape, complex)
    shifts = range(-images, images + 1)
    for m in np.stack(np.meshgrid(*[shifts] * g.n, indexing="ij"), -1).reshape(-1, g.n):
        r2 = sum((x + 2 * g.L * mi) ** 2 for x, mi in zip(g.coords, m))
        out += np.exp(-r2 / (2 * z))
    return (s**2 / z) ** (g.n / 2) * out


def gaussian(g, width=1.0, amp=1.0, kick=0.0):
    r2 = sum(x**2 for x in g.coords)
    return Field(g, amp * np.exp(-r2 / (2 * width**2) + 1j * kick * g.coords[0]))


def l2_dist(a, b):
    return lp_norm(a - b, 2)


class TestFreeFlow:
    def test_matches_closed_form_1d(self):
        g = make_grid(1, 256, 20.0)
        u0 = Field(g, periodized_free_gaussian(g, 1.0, 0.0, images=3))
        for t in (0.5, 2.0, 5.0):
            exact = periodized_free_gaussian(g, 1.0, t, images=3)
            got = free_propagate(u0, t).values
            assert np.max(np.abs(got - exact)) / np.max(np.abs(exact)) < 1e-12

    def test_group_law(self):
        g = make_grid(2, 32, 6.0)
        u = gaussian(g, kick=0.7)
        a = free_propagate(free_propagate(u, 0.3), 1.1)
        b = free_propagate(u, 1.4)
        assert l2_dist(a, b) < 1e-12
        assert l2_dist(free_propagate(b, -1.4), u) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(t=st.floats(-10, 10), seed=st.integers(0, 2**31))
    def test_unitary(self, t, seed):
        g = make_grid(2, 16, 3.0)
        rng = np.random.default_rng(seed)
        u = Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        assert lp_norm(free_propagate(u, t), 2) == pytest.approx(lp_norm(u, 2), rel=1e-12)


class TestNonlinearPhase:
    @settings(max_examples=20, deadline=None)
    @given(dt=st.floats(-1, 1), seed=st.integers(0, 2**31))
    def test_preserves_modulus(self, dt, seed):
        g = make_grid(3, 8, 4.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        np.testing.assert_allclose(np.abs(nonlinear_phase_step(v, pot, dt)), np.abs(v), rtol=1e-13)

    def test_delta_kernel_gives_local_phase(self):
        g = make_grid(2, 16, 4.0)
        v = gaussian(g).values
        out = nonlinear_phase_step(v, delta_kernel(g), 0.2)
        np.testing.assert_allclose(out, v * np.exp(-0.2j * np.abs(v) ** 2), atol=1e-12)

    def test_constant_kernel_gives_global_phase(self):
        g = make_grid(2, 16, 4.0)
        u = gaussian(g)
        c = 0.7
        out = nonlinear_phase_step(u.values, constant_kernel(g, c), 0.3)
        np.testing.assert_allclose(out, u.values * np.exp(-0.3j * c * mass(u)), atol=1e-12)


class TestStrang:
    def test_zero_potential_is_free_flow(self):
        g = make_grid(3, 16, 6.0)
        u0 = gaussian(g, kick=0.5)
        tr = strang_evolve(u0, sample_potential(zero_potential(), g), EvolveConfig(dt=0.05, t_end=1.0))
        assert l2_dist(tr.final, free_propagate(u0, 1.0)) < 1e-12

    def test_records_endpoints_and_stride(self):
        g = make_grid(3, 8, 4.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        tr = strang_evolve(gaussian(g), pot, EvolveConfig(dt=0.1, t_end=1.0, sample_stride=3,
                                                            diagnostics_every=4))
        assert tr.times[0] == 0.0
        assert tr.times[-1] == pytest.approx(1.0)
        assert np.allclose(tr.times, [0, 0.3, 0.6, 0.9, 1.0])
        assert np.allclose([r.t for r in tr.rows], [0, 0.4, 0.8, 1.0])

    def test_step_shrinks_to_fit_span(self):
        cfg = EvolveConfig(dt=0.3, t_end=1.0)
        assert cfg.steps == 4
        assert cfg.signed_dt == pytest.approx(0.25)
        assert EvolveConfig(dt=0.1, t_start=1.0, t_end=0.0).signed_dt == pytest.approx(-0.1)

    @pytest.mark.parametrize("kw", [dict(dt=0.0, t_end=1), dict(dt=-1, t_end=1), dict(dt=0.1, t_end=1, scheme="rk4"),
                                    dict(dt=0.1, t_end=1, sample_stride=0)])
    def test_rejects_bad_config(self, kw):
        with pytest.raises(ValueError):
            EvolveConfig(**kw)

    def test_grid_mismatch(self):
        g, h = make_grid(3, 8, 4.0), make_grid(3, 8, 5.0)
        with pytest.raises(ValueError):
            strang_evolve(gaussian(g), sample_potential(zero_potential(), h), EvolveConfig(dt=0.1, t_end=1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_raises(self):
        g = make_grid(2, 8, 4.0)
        pot = constant_kernel(g, 1.0)
        v = gaussian(g).values.copy()
        v[0, 0] = 1e300
        with pytest.raises(EvolutionError) as exc:
            strang_evolve(Field(g, v), pot, EvolveConfig(dt=0.1, t_end=0.5))
        assert exc.value.step >= 1

    def test_second_order_self_convergence(self):
        g = make_grid(3, 16, 6.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        u0 = gaussian(g, amp=1.5, kick=0.4)
        ends = [strang_evolve(u0, pot, EvolveConfig(dt=dt, t_end=0.5), diagnostics=False).final
                for dt in (0.05, 0.025, 0.0125)]
        e1, e2 = l2_dist(ends[0], ends[1]), l2_dist(ends[1], ends[2])
        assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.15)

    def test_phase_equivariance(self):
        g = make_grid(3, 8, 4.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        u0 = gaussian(g, kick=0.3)
        cfg = EvolveConfig(dt=0.05, t_end=0.5)
        a = strang_evolve(Field(g, np.exp(0.9j) * u0.values), pot, cfg, diagnostics=False).final
        b = strang_evolve(u0, pot, cfg, diagnostics=False).final
        assert l2_dist(a, Field(g, np.exp(0.9j) * b.values)) < 1e-12

    def test_reversible(self):
        g = make_grid(3, 16, 6.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        u0 = gaussian(g, kick=0.4)
        fwd = strang_evolve(u0, pot, EvolveConfig(dt=0.01, t_end=1.0), diagnostics=False).final
        back = strang_evolve(fwd, pot, EvolveConfig(dt=0.01, t_start=1.0, t_end=0.0), diagnostics=False).final
        assert l2_dist(back, u0) < 1e-11

    def test_mass_conserved(self):
        g = make_grid(3, 16, 6.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        tr = strang_evolve(gaussian(g, amp=2.0), pot, EvolveConfig(dt=0.02, t_end=1.0))
        m = [r.mass for r in tr.rows]
        assert max(abs(x - m[0]) for x in m) / m[0] < 1e-12


class TestPicard:
    def test_zero_potential_gives_free_flow_at_once(self):
        g = make_grid(2, 16, 4.0)
        u0 = gaussian(g)
        res = picard_iterate(u0, sample_potential(zero_potential(), g), 0.5, dt_quad=0.05)
        assert res.converged
        assert res.iterations <= 2
        assert l2_dist(res.field, free_propagate(u0, 0.5)) < 1e-12

    def test_agrees_with_strang(self):
        g = make_grid(3, 16, 6.0)
        pot = sample_potential(inverse_power(1.0, 2.5), g)
        u0 = gaussian(g, amp=0.5)
        gaps = []
        for dt in (2e-3, 1e-3):
            res = picard_iterate(u0, pot, (0.0, 0.1), dt_quad=dt)
            ref = strang_evolve(u0, pot, EvolveConfig(dt=dt, t_end=0.1), diagnostics=False).final
            assert res.converged
            gaps.append(l2_dist(res.field, ref))
        assert gaps[-1] < 1e-5
        assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.1)

    def test_flags_divergence(self):
        g = make_grid(2, 16, 4.0)
        pot = constant_kernel(g, 50.0)
        u0 = gaussian(g, amp=3.0)
        with pytest.warns(RuntimeWarning):
            res = picard_iterate(u0, pot, 5.0, dt_quad=0.05, n_iter=40)
        assert res.diverged and not res.converged

    def test_evolve_dispatches_to_picard(self):
        g = make_grid(2, 16, 4.0)
        pot = sample_potential(zero_potential(), g)
        u0 = gaussian(g)
        tr = evolve(u0, pot, EvolveConfig(dt=0.05, t_end=0.2, scheme="picard"))
        assert l2_dist(tr.final, free_propagate(u0, 0.2)) < 1e-12
        assert len(tr.rows) == len(tr.times) == 5

    def test_rejects_bad_arguments(self):
        g = make_grid(2, 8, 4.0)
        pot = sample_potential(zero_potential(), g)
        with pytest.raises(ValueError):
            picard_iterate(gaussian(g), pot, 1.0, n_iter=0)
        with pytest.raises(ValueError):
            picard_iterate(gaussian(g), pot, 1.0, dt_quad=0)
