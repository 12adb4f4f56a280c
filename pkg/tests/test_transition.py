import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specstab.errors import (
    AtlasMismatch,
    CoverageGap,
    IllConditioned,
    InsufficientPadding,
    OutOfDomain,
    SupportViolation,
    VanishingCondition,
)
from specstab.geometry import (
    ChartStrip,
    Profile,
    constant,
    rectangle_domain,
    sector_domain,
    single_chart_domain,
    tilde_profile,
)
from specstab.transition import (
    DIRICHLET,
    NEUMANN,
    GridFunction,
    PartitionOfUnity,
    apply_T,
    apply_transition,
    common_delta,
    discrete_sobolev_norm,
    domain_grid,
    interpolation_matrix,
    lemma_ext_check,
    lift,
    phi_c,
    reflection_coefficients,
    solve_coefficients,
    transition_coefficients,
    transition_defect,
    vandermonde_residuals,
)

B34 = 3 * math.pi / 4


def flat_strip(g1=0.8, g2=0.6, delta=None):
    return ChartStrip((0.0, 1.0), 0.0, 1.0, 0.5, constant(g1), constant(g2), delta_value=delta)


def wavy_strip(rng):
    b, ph = rng.uniform(0.6, 0.7), rng.uniform(0, 1)
    return ChartStrip((0.0, 1.0), 0.0, 0.9, 0.5,
                      lambda x: b + 0.05 + 0.04 * np.sin(2 * np.pi * x + ph),
                      lambda x: b + 0.02 * np.cos(3 * np.pi * x))


def grid_on(h, y1=1.4):
    x = np.arange(-4, round(1 / h) + 5) * h
    y = np.arange(-4, round(y1 / h) + 5) * h
    return x, y


def sample(f, h=1 / 40, y1=1.4):
    x, y = grid_on(h, y1)
    return GridFunction.sample(lambda p: f(p[:, 0], p[:, 1]), x, y)


class TestCoefficients:
    def test_examples(self):
        assert solve_coefficients(1, [5.0]) == (1.0,)
        np.testing.assert_allclose(solve_coefficients(2, [2, 3]), (3, -2), atol=1e-13)
        np.testing.assert_allclose(solve_coefficients(3, [1, 2, 3]), (3, -3, 1), atol=1e-13)

    @pytest.mark.parametrize("m", range(1, 7))
    @pytest.mark.parametrize("delta", [0.5, 0.1, 0.0125])
    def test_residuals(self, m, delta):
        co = transition_coefficients(m, delta)
        assert co.c[0] == pytest.approx(1 / delta) and len(co.d) == m
        assert np.all(co.residuals() < 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.lists(st.floats(0.5, 3.0), min_size=6, max_size=6), st.floats(1.0, 50.0))
    def test_random_nodes(self, m, gaps, start):
        c = start + np.cumsum(gaps[:m])
        assert np.all(vandermonde_residuals(c, solve_coefficients(m, c)) < 1e-12)

    def test_bad_nodes(self):
        with pytest.raises(ValueError):
            solve_coefficients(2, [3.0, 2.0])
        with pytest.raises(ValueError):
            solve_coefficients(3, [1.0, 2.0])

    def test_overflow(self):
        with pytest.raises(IllConditioned):
            solve_coefficients(25, [1 + k * 1e-14 for k in range(25)])


class TestPhi:
    def test_flat_example(self):
        s = flat_strip()
        assert s.delta == pytest.approx(0.5)
        co = transition_coefficients(1, s.delta)
        out = phi_c(s, co, 1, [[0.3, 0.6]])
        assert out[0, 1] == pytest.approx(0.8, abs=1e-14)
        below = phi_c(s, co, 1, [[0.3, 0.45]])
        assert below[0, 1] == 0.45

    def test_boundary_to_shifted_graph(self):
        s = wavy_strip(np.random.default_rng(2))
        co = transition_coefficients(2, s.delta)
        x = np.linspace(0.01, 0.99, 30)
        pts = np.column_stack([x, s.g2(x)])
        for k in (1, 2):
            np.testing.assert_allclose(phi_c(s, co, k, pts)[:, 1], s.g1c(x, co.c[k - 1]), atol=1e-13)

    def test_out_of_domain(self):
        s = flat_strip()
        with pytest.raises(OutOfDomain):
            phi_c(s, transition_coefficients(1, s.delta), 1, [[0.3, 0.7]])

    def test_lift_vanishes_without_excess(self):
        s = flat_strip(g1=0.55, g2=0.6)
        assert np.all(lift(s, 2, [[0.5, 0.59], [0.2, 0.3]]) == 0)


class TestApplyT:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_constants(self, m):
        s = flat_strip()
        v = sample(lambda x, y: np.full_like(x, 2.5))
        out = apply_T(v, s, transition_coefficients(m, s.delta))
        vals = out.values[np.isfinite(out.values)]
        np.testing.assert_allclose(vals, 2.5, atol=1e-13)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_polynomial_in_normal_variable(self, m):
        # sum d_k (c_k h)^tau = 0 removes every power below m
        s = wavy_strip(np.random.default_rng(m))
        f = lambda x, y: np.cos(2 * x) * sum((k + 1) * y**k for k in range(m))
        v = sample(f, 1 / 80)
        out = apply_T(v, s, transition_coefficients(m, s.delta))
        ok = np.isfinite(out.values)
        np.testing.assert_allclose(out.values[ok], v.values[ok], atol=1e-11)

    def test_identity_on_O3_and_linearity(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            s = wavy_strip(rng)
            co = transition_coefficients(2, s.delta)
            v = sample(lambda x, y: np.sin(3 * x + y) * np.exp(y), 1 / 60)
            w = sample(lambda x, y: np.cos(x * y), 1 / 60)
            tv, tw = apply_T(v, s, co), apply_T(w, s, co)
            o3 = s.in_O3(v.points()).reshape(v.shape)
            assert np.array_equal(tv.values[o3], v.values[o3])
            comb = apply_T(v.with_values(2 * v.values - 3 * w.values), s, co)
            ok = np.isfinite(comb.values)
            np.testing.assert_allclose(comb.values[ok], 2 * tv.values[ok] - 3 * tw.values[ok], atol=1e-11)

    def test_no_excess_is_identity(self):
        s = flat_strip(g1=0.55, g2=0.6)
        v = sample(lambda x, y: x**2 + np.sin(5 * y))
        out = apply_T(v, s, transition_coefficients(2, s.delta))
        ok = np.isfinite(out.values)
        assert ok.any() and np.array_equal(out.values[ok], v.values[ok])

    def test_dirichlet_support(self):
        s = wavy_strip(np.random.default_rng(7))
        co = transition_coefficients(1, s.delta)
        x, y = grid_on(1 / 60)
        o1 = lambda p: s.in_O1(p)
        v = GridFunction.sample(lambda p: np.sin(np.pi * p[:, 0]) * (1 + p[:, 1]), x, y, o1, o1)
        out = apply_T(v, s, co, pad=True)
        pts = v.points()
        above = (pts[:, 0] > 0) & (pts[:, 0] < 1) & (pts[:, 1] > s.g2(pts[:, 0]))
        assert np.all(out.values.ravel()[above] == 0.0)

    def test_coverage_gap(self):
        s = flat_strip()
        x = np.arange(0, 41) / 40
        y = np.arange(0, 27) / 40
        v = GridFunction.sample(lambda p: p[:, 1], x, y)
        with pytest.raises(CoverageGap):
            apply_T(v, s, transition_coefficients(1, s.delta))


class TestGridFunction:
    def test_csv(self, tmp_path):
        g = GridFunction([0.0, 0.5], [1.0, 1.5], [[1.0, 2.0], [3.0, 1 / 3]])
        path = tmp_path / "g.csv"
        g.to_csv(path)
        rows = path.read_text().splitlines()
        assert rows[0] == "x,y,value"
        assert rows[2] == "0,1.5,2"
        assert float(rows[4].split(",")[2]) == 1 / 3

    def test_validation(self):
        with pytest.raises(ValueError):
            GridFunction([0.0, 1.0], [0.0, 0.5], np.zeros((2, 2)))
        with pytest.raises(ValueError):
            GridFunction([0.0, 1.0], [0.0, 1.0], np.zeros((3, 2)))

    def test_interpolation_exact_for_polynomials(self):
        x = np.arange(10) * 0.1
        g = GridFunction.sample(lambda p: p[:, 0] ** 2 * p[:, 1] - p[:, 1] ** 2, x, x)
        tg = np.random.default_rng(0).uniform(0.05, 0.85, (50, 2))
        vals = interpolation_matrix(g, tg, 2) @ g.values.ravel()
        np.testing.assert_allclose(vals, tg[:, 0] ** 2 * tg[:, 1] - tg[:, 1] ** 2, atol=1e-13)
        with pytest.raises(CoverageGap):
            interpolation_matrix(g, [[2.0, 0.5]], 2)


class TestSobolevNorm:
    def test_constant(self):
        x = np.arange(-3, 24) / 20
        g = GridFunction.sample(lambda p: np.full(len(p), 3.0), x, x)
        mask = (g.points() > 0).all(axis=1) & (g.points() < 1).all(axis=1)
        assert discrete_sobolev_norm(g, 2, math.inf, mask) == 3.0

    def test_sine_oracle(self):
        # u = sin(pi x) on the unit square: ||u||_2 = 1/sqrt 2, ||u_x||_2 = pi/sqrt 2
        h = 1 / 400
        x = np.arange(-2, 403) * h
        g = GridFunction.sample(lambda p: np.sin(np.pi * p[:, 0]), x, x)
        P = g.points()
        mask = (P > -h / 2).all(axis=1) & (P < 1 - h / 2).all(axis=1)
        val = discrete_sobolev_norm(g, 1, 2, mask)
        assert val == pytest.approx((1 + np.pi) / math.sqrt(2), rel=2e-3)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), st.sampled_from([2.0, 4.0, math.inf]))
    def test_homogeneity(self, a, p):
        x = np.arange(0, 30) / 20
        g = GridFunction.sample(lambda q: np.cos(q[:, 0]) * q[:, 1], x, x)
        mask = np.zeros(g.shape, dtype=bool)
        mask[5:-5, 5:-5] = True
        ga = g.with_values(a * g.values)
        assert discrete_sobolev_norm(ga, 2, p, mask) == pytest.approx(abs(a) * discrete_sobolev_norm(g, 2, p, mask))

    def test_insufficient_padding(self):
        x = np.arange(0, 10) / 10
        g = GridFunction.sample(lambda q: q[:, 0], x, x)
        with pytest.raises(InsufficientPadding):
            discrete_sobolev_norm(g, 1, 2)


class TestPartition:
    def test_sector_atlas(self):
        d = sector_domain(B34)
        pou = PartitionOfUnity(d.atlas)
        x0, x1, y0, y1 = d.atlas.bbox()
        pts = np.random.default_rng(0).uniform([x0, y0], [x1, y1], (20000, 2))
        cov = d.atlas.covered(pts)
        w = pou.weights(pts)
        np.testing.assert_allclose(w[cov].sum(axis=1), 1.0, atol=1e-12)
        assert np.all((w >= 0) & (w <= 1))
        assert math.isfinite(pou.C3) and pou.C3 > 0

    def test_support(self):
        d = rectangle_domain(1, 1, rho=0.1)
        pou = PartitionOfUnity(d.atlas, 2)
        for j, ch in enumerate(d.atlas.charts):
            a1, b1, aN, bN = ch.box
            loc = np.array([[a1 + 0.07, (aN + bN) / 2], [(a1 + b1) / 2, bN - 0.07]])
            assert np.all(pou.bumps(ch.to_world(loc))[:, j] == 0)


class TestReflection:
    @pytest.mark.parametrize("m, ref", [(1, (1,)), (2, (-3, 4)), (3, (6, -32, 27))])
    def test_values(self, m, ref):
        np.testing.assert_allclose(reflection_coefficients(m), ref, atol=1e-12)

    def test_neumann_constant(self):
        d1 = single_chart_domain(constant(0.8), rho=0.2)
        d2 = single_chart_domain(constant(0.9), rho=0.2)
        h = 1 / 50
        x, y = domain_grid(d1, h)
        u = GridFunction.sample(lambda p: np.ones(len(p)), x, y, region=d1.contains)
        res = apply_transition(u, d1, d2, NEUMANN)
        inside = d2.contains(u.points()).reshape(u.shape)
        np.testing.assert_allclose(res.output.values[inside], 1.0, atol=1e-13)


def bump_pair(amp=-0.05, offset=0.3):
    d1 = single_chart_domain(constant(offset), band=(0.0, 0.5), rho=0.2)
    d2 = d1.with_profile(0, Profile("bump", {"center": 0.5, "width": 0.3, "amplitude": amp, "offset": offset}))
    return d1, d2


class TestApplyTransition:
    def dirichlet_u(self, d, h):
        x, y = domain_grid(d, h)
        return GridFunction.sample(lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1] / 0.3),
                                   x, y, d.contains, d.contains)

    def test_same_domain(self):
        d1, _ = bump_pair()
        u = self.dirichlet_u(d1, 1 / 100)
        res = apply_transition(u, d1, d1)
        assert np.array_equal(res.output.values, u.values)
        assert res.measures["sym_diff"] == 0

    @pytest.mark.parametrize("amp, offset", [(-0.05, 0.3), (0.04, 0.25)])
    def test_identity_and_support(self, amp, offset):
        d1, d2 = bump_pair(amp, offset)
        u = self.dirichlet_u(d1, 1 / 100)
        res = apply_transition(u, d1, d2)
        assert res.identity_defect == 0.0
        assert res.support_defect == 0.0
        assert np.all(res.output.values[~d2.contains(u.points()).reshape(u.shape)] == 0)

    def test_layer_measures(self):
        d1, d2 = bump_pair()
        u = self.dirichlet_u(d1, 1 / 100)
        m = apply_transition(u, d1, d2).measures
        assert m["omega2_minus_omega3"] <= m["omega1_minus_omega3"]
        assert m["grid_omega2_minus_omega3"] == pytest.approx(m["omega2_minus_omega3"], rel=1e-3)

    def test_sector_pair(self):
        d1 = sector_domain(B34)
        d2 = d1.with_profile(0, tilde_profile(B34, 0.2))
        assert common_delta(d1.atlas) < 0.02
        h = 1 / 64
        x, y = domain_grid(d1, h)
        u = GridFunction.sample(lambda p: 1 - np.hypot(p[:, 0], p[:, 1]) ** 2, x, y, d1.contains, d1.contains)
        res = apply_transition(u, d1, d2)
        assert res.identity_defect == 0.0 and res.support_defect == 0.0

    def test_support_violation(self):
        d1, d2 = bump_pair()
        x, y = domain_grid(d1, 1 / 50)
        u = GridFunction.sample(lambda p: np.ones(len(p)), x, y)
        with pytest.raises(SupportViolation):
            apply_transition(u, d1, d2)

    def test_atlas_mismatch(self):
        d1, _ = bump_pair()
        d3 = single_chart_domain(constant(0.3), band=(0.0, 0.5), rho=0.15)
        u = self.dirichlet_u(d1, 1 / 50)
        with pytest.raises(AtlasMismatch):
            apply_transition(u, d1, d3)

    def test_bad_bc(self):
        d1, d2 = bump_pair()
        with pytest.raises(ValueError):
            apply_transition(self.dirichlet_u(d1, 1 / 50), d1, d2, "robin")


class TestCancellationInequality:
    def weights(self, m, r, delta=0.3):
        co = transition_coefficients(m, delta)
        c = np.asarray(co.c)
        return np.asarray(co.d) * c ** (r - 1), c

    def test_polynomial_annihilated(self):
        g, c = self.weights(4, 1)
        rep = lemma_ext_check(g, c, lambda x: 0.1 + 0 * x, lambda x: 1 + x - 2 * x**2, lambda x: 0 * x, 3, 2.0, 0, 1)
        assert rep.rhs_bound == 0 and rep.lhs < 1e-9 and rep.ratio == 0

    def test_monomial_closed_form(self):
        # f = x^s/s!: only the c^{s+1} moment survives
        s, p = 2, 2.0
        g, c = self.weights(3, 1)
        eta = 0.1
        rep = lemma_ext_check(g, c, lambda x: eta + 0 * x, lambda x: x**s / 2, lambda x: 1 + 0 * x, s, p, 0, 1)
        lhs = abs(np.sum(g * c ** (s + 1))) / 2
        C = np.sum(np.abs(g) * c * (c - c[0]) ** s)
        assert rep.lhs == pytest.approx(lhs, rel=1e-8)
        assert rep.rhs_bound == pytest.approx(C * (1 + c[-1] * eta) ** 0.5, rel=1e-10)

    @pytest.mark.parametrize("s", [1, 2, 3])
    @pytest.mark.parametrize("p", [2.0, math.inf])
    def test_random(self, s, p):
        rng = np.random.default_rng(10 * s + (p == 2))
        for _ in range(5):
            g, c = self.weights(s + 1, 1, rng.uniform(0.1, 0.5))
            k, ph, amp = rng.uniform(1, 6), rng.uniform(0, 6), rng.uniform(0.01, 0.2)
            f = lambda x: np.sin(k * x + ph)
            fs = lambda x: k**s * np.sin(k * x + ph + s * np.pi / 2)
            eta = lambda x: amp * (1 + 0.5 * np.sin(x)) ** 2
            assert lemma_ext_check(g, c, eta, f, fs, s, p, 0.0, 1.0).ratio <= 1 + 1e-6

    def test_decreasing_eta(self):
        g, c = self.weights(2, 1)
        with pytest.raises(ValueError):
            lemma_ext_check(g, c, lambda x: 0.1 - 0.05 * x, np.sin, np.cos, 1, 2.0, 0, 1)

    def test_vanishing_condition(self):
        with pytest.raises(VanishingCondition):
            lemma_ext_check([1.0, 1.0], [1.0, 2.0], lambda x: 0.1 + 0 * x, np.sin, np.cos, 1, 2.0, 0, 1)


class TestTransitionDefect:
    def modes(self, d, h):
        x, y = domain_grid(d, h)
        P = GridFunction(x, y, np.zeros((len(x), len(y)))).points()
        out = []
        for k in (1, 2):
            f = np.sin(k * np.pi * P[:, 0]) * np.sin(np.pi * P[:, 1] / 0.3)
            f = np.where(d.contains(P), f, 0.0)
            f /= math.sqrt(h * h * np.sum(f * f))
            out.append(GridFunction(x, y, f.reshape(len(x), len(y)), d.contains))
        return out

    def test_same_domain(self):
        d1, _ = bump_pair()
        D = transition_defect(d1, d1, self.modes(d1, 1 / 60))
        assert np.all(D.form == 0) and np.all(D.l2 == 0)

    def test_not_orthonormal(self):
        d1, d2 = bump_pair()
        m = self.modes(d1, 1 / 60)
        with pytest.raises(ValueError):
            transition_defect(d1, d2, [m[0], m[0]])

    def test_shrinks_with_perturbation(self):
        d1, _ = bump_pair()
        modes = self.modes(d1, 1 / 100)
        l2 = [transition_defect(d1, bump_pair(a)[1], modes).l2[0, 0] for a in (-0.08, -0.04)]
        assert l2[1] < l2[0]
