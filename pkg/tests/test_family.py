import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from bubblelab.errors import InvalidInputError
from bubblelab.family import (SWEEP_HEADER, enclosed_volume, family_sweep, lateral_area,
                              mean_curvature_residual, solve_profile, volume_to_s1,
                              write_profile_csv, write_sweep_csv)

from conftest import ex1_f


def _singular_quad(phi, dphi, weight, s, s1, tol=1e-13):
    """int_s^s1 weight(x) / sqrt(phi1^2 - phi(x)^2) dx with x = s1 - v^2.

    The substitution turns the (s1 - x)^(-1/2) endpoint into a smooth factor
    v / sqrt(phi1 - phi(x)) -> 1 / sqrt(phi'(s1)).
    """
    p1 = phi(s1)

    def integrand(v):
        x = s1 - v * v
        d = p1 - phi(x)
        ratio = 1.0 / math.sqrt(dphi(s1)) if v == 0 or d <= 0 else v / math.sqrt(d)
        return 2.0 * weight(x) * ratio / math.sqrt(p1 + phi(x))

    val, _ = quad(integrand, 0.0, math.sqrt(s1 - s), epsabs=tol, epsrel=tol, limit=200)
    return val


def _height_oracle(phi, dphi, s, s1, tol=1e-13):
    return _singular_quad(phi, dphi, phi, s, s1, tol)


class TestSolveProfile:
    def test_H(self, ex1):
        bp = solve_profile(ex1, math.pi / 6)
        assert bp.H == pytest.approx(2.0, abs=1e-15)

    def test_top_height(self, ex1):
        bp = solve_profile(ex1, math.pi / 6, 2000)
        assert bp.u_max == pytest.approx(math.log(math.sqrt(3)), abs=1e-7)
        oracle = _height_oracle(math.sin, math.cos, 0.0, math.pi / 6)
        assert oracle == pytest.approx(math.log(math.sqrt(3)), abs=1e-12)
        assert abs(bp.u_max - oracle) < 1e-8

    def test_top_height_ex2(self, ex2):
        bp = solve_profile(ex2, 0.3, 1000)
        oracle = _height_oracle(lambda s: s - s**3, lambda s: 1 - 3 * s**2, 0.0, 0.3)
        assert abs(bp.u_max - oracle) < 1e-8

    def test_node_invariants(self, ex1):
        bp = solve_profile(ex1, 1.0, 500)
        assert np.max(np.abs(np.sin(bp.alpha) - bp.H * np.sin(bp.s))) <= 1e-10
        assert np.all(np.diff(bp.u) < 0)
        assert bp.u[-1] == 0.0
        assert np.all(np.diff(bp.s) > 0) and bp.s[0] == 0.0
        assert abs(bp.s[-1] - 1.0) <= 1e-8
        assert np.all(np.diff(bp.t) > 0)

    def test_s1_at_s0(self, ex1):
        with pytest.raises(InvalidInputError, match="logarithmic"):
            solve_profile(ex1, math.pi / 2)

    def test_bad_inputs(self, ex1):
        with pytest.raises(InvalidInputError):
            solve_profile(ex1, -0.1)
        with pytest.raises(InvalidInputError):
            solve_profile(ex1, 0.5, n_nodes=10)

    def test_closed_curve(self, ex1):
        bp = solve_profile(ex1, 0.7, 100)
        xs, ys = bp.closed_curve()
        assert len(xs) == 4 * (bp.n_nodes - 1) + 1
        assert xs[0] == xs[-1] and ys[0] == ys[-1]
        assert np.max(xs) == pytest.approx(0.7) and np.min(xs) == pytest.approx(-0.7)
        assert np.max(ys) == pytest.approx(bp.u_max)

    @given(st.floats(0.02, 1.55))
    def test_first_integral_property(self, s1):
        from bubblelab.profile import WarpedGeometry, make_builtin_profile
        g = WarpedGeometry(make_builtin_profile("ex1"), 1.0)
        bp = solve_profile(g, s1, 128)
        assert np.max(np.abs(np.sin(bp.alpha) - bp.H * np.sin(bp.s))) <= 1e-10
        assert np.all(np.diff(bp.u) < 0)


class TestResidual:
    @pytest.mark.parametrize("which,s1", [("ex1", math.pi / 6), ("ex2", 0.3)])
    def test_order_two(self, which, s1, request):
        g = request.getfixturevalue(which)
        r = [mean_curvature_residual(solve_profile(g, s1, n), g) for n in (1000, 2000, 4000)]
        assert r[1] <= 1e-6
        assert r[0] / r[1] >= 3.5 and r[1] / r[2] >= 3.5


class TestVolumeArea:
    def test_monte_carlo_volume(self, ex1):
        s1 = math.pi / 6
        bp = solve_profile(ex1, s1, 1000)
        # independent height function on a fine grid
        grid = np.linspace(0, s1, 801)
        hgt = np.array([_height_oracle(math.sin, math.cos, x, s1, 1e-10) if x < s1 else 0.0
                        for x in grid])
        rng = np.random.default_rng(12345)
        umax = hgt[0]
        n_total, acc = 10_000_000, 0.0
        for _ in range(10):
            s = rng.uniform(-s1, s1, n_total // 10)
            y = rng.uniform(-umax, umax, n_total // 10)
            inside = np.abs(y) <= np.interp(np.abs(s), grid, hgt)
            acc += np.sum(2 * math.pi * ex1_f(s) * inside)
        mc = acc / n_total * (2 * s1) * (2 * umax)
        assert bp.V == pytest.approx(mc, rel=5e-3)

    def test_area_two_quadratures(self, ex1):
        s1 = math.pi / 6
        bp = solve_profile(ex1, s1, 1000)
        # f sqrt(1 + u'^2) = f phi1 / sqrt(phi1^2 - phi^2)
        p1 = math.sin(s1)
        val = _singular_quad(math.sin, math.cos, lambda x: float(ex1_f(x)) * p1, 0.0, s1)
        assert bp.A_lat == pytest.approx(8 * math.pi * val, rel=1e-6)
        assert lateral_area(bp, ex1) == bp.A_lat
        assert enclosed_volume(bp, ex1) == bp.V

    def test_x0(self, ex1):
        bp = solve_profile(ex1, math.pi / 6)
        assert bp.x0_measure == pytest.approx(4 * math.pi * 2 * math.tan(math.pi / 12), rel=1e-12)

    def test_scaling_with_c(self, ex1):
        a = solve_profile(ex1, 0.8, 300)
        b = solve_profile(ex1.with_c(0.25), 0.8, 300)
        assert b.V == pytest.approx(0.25 * a.V, rel=1e-12)
        assert np.array_equal(a.u, b.u)

    def test_small_limit(self, ex1):
        # thin tube around a circle: V ~ s1^2 and A ~ s1, both tending to 0
        a, b = solve_profile(ex1, 1e-2, 200), solve_profile(ex1, 1e-3, 200)
        assert b.V / a.V == pytest.approx(1e-2, rel=0.05)
        assert b.A_lat / a.A_lat == pytest.approx(1e-1, rel=0.05)

    def test_ineq_dim_1_on_sweep(self, ex1):
        for s1 in np.linspace(0.1, 1.5, 8):
            bp = solve_profile(ex1, s1, 300)
            assert bp.A_lat <= bp.V * bp.H + 2 * bp.x0_measure


class TestVolumeToS1:
    def test_round_trip(self, ex1):
        bp = solve_profile(ex1, 0.9, 400)
        assert volume_to_s1(ex1, bp.V) == pytest.approx(0.9, abs=1e-7)

    def test_monotone(self, ex2):
        a = volume_to_s1(ex2, 0.1)
        b = volume_to_s1(ex2, 0.2)
        assert b > a

    def test_large(self, ex1):
        s1 = volume_to_s1(ex1, 500.0)
        assert abs(s1 - math.pi / 2) < 1e-3

    def test_nonpositive(self, ex1):
        with pytest.raises(InvalidInputError):
            volume_to_s1(ex1, 0.0)


class TestSweep:
    def test_monotone(self, ex1):
        rows = family_sweep(ex1.with_c(0.1), [1.5, 0.1, 0.5, 1.0, 1.3], 300)
        s1 = [r.s1 for r in rows]
        assert s1 == sorted(s1)
        H = [r.H for r in rows]
        V = [r.V for r in rows]
        assert all(np.diff(H) < 0) and all(np.diff(V) > 0)
        assert H[-1] > 1.0
        assert rows[0].beta_margin == pytest.approx(math.sin(0.1) / 0.1 - 2.0, abs=1e-9)

    def test_empty(self, ex1):
        assert family_sweep(ex1, []) == []

    def test_failed_member(self, ex1):
        rows = family_sweep(ex1, [0.5, 2.0], 200)
        assert rows[0].ok and not rows[1].ok
        assert rows[1].error == "invalid-input"

    def test_csv(self, ex1, tmp_path):
        rows = family_sweep(ex1, [0.5, 2.0], 200)
        write_sweep_csv(rows, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert lines[2].startswith("2,nan")
        write_profile_csv(solve_profile(ex1, 0.5, 100), tmp_path / "p.csv")
        data = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
        assert data.shape == (100, 4)
        assert (tmp_path / "p.csv").read_text().startswith("alpha,s,u,t\n")
