import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from specstab.errors import AtlasMismatch, InconsistentCharts, InvalidC, InvalidDomain
from specstab.geometry import (
    Atlas,
    Chart,
    ChartStrip,
    PolarSector,
    Profile,
    SubgraphDomain,
    constant,
    coverage_gaps,
    load_domain,
    rectangle_domain,
    sector_domain,
    single_chart_domain,
    strip_measures,
    symmetric_difference_measure,
    tilde_profile,
)

B34 = 3 * math.pi / 4


@pytest.fixture(scope="module")
def sector():
    return sector_domain(B34)


class TestContains:
    def test_unit_square(self):
        sq = single_chart_domain(constant(1.0))
        assert sq.contains([[0.5, 0.5]])[0]
        assert not sq.contains([[0.5, 1.5]])[0]

    def test_sector_point(self, sector):
        assert sector.contains([[0.5, 0.0]])[0]

    def test_sector_matches_polar(self, sector):
        rng = np.random.default_rng(7)
        pts = rng.uniform(-1.1, 1.1, size=(20000, 2))
        ref = PolarSector(B34).contains(pts)
        got = sector.contains(pts)
        # disagreements only within a hair of the boundary
        bad = pts[got != ref]
        r = np.hypot(bad[:, 0], bad[:, 1])
        assert np.all(np.abs(r - 1) < 1e-9) or len(bad) == 0

    def test_no_coverage_gaps(self, sector):
        assert len(coverage_gaps(sector, 250)) == 0

    def test_inconsistent_charts_rejected(self):
        charts = (Chart((0, 1, 0, 2)), Chart((0.5, 1.5, 0, 2)))
        atlas = Atlas(0.1, charts, 2)
        with pytest.raises(InconsistentCharts):
            SubgraphDomain(atlas, (constant(1.0), constant(1.5)))

    def test_band_violation(self):
        with pytest.raises(InvalidDomain):
            single_chart_domain(constant(1.45))

    def test_unknown_kind(self):
        with pytest.raises(InvalidDomain):
            Profile("spline", {})

    def test_rotation_exact(self):
        ch = Chart((0, 1, 0, 1), 90.0)
        np.testing.assert_array_equal(ch.to_local([[1.0, 2.0]]), [[2.0, -1.0]])

    def test_class_warning(self):
        with pytest.warns(RuntimeWarning):
            single_chart_domain(Profile("sinusoid", {"offset": 0.7, "amplitude": 0.2, "wavenumber": 40.0, "phase": 0.0}),
                                smoothness=(1, 1.0))


class TestDescriptor:
    def test_round_trip(self, tmp_path):
        d = rectangle_domain(1.0, 0.8)
        path = tmp_path / "dom.json"
        path.write_text(json.dumps(d.to_descriptor()))
        e = load_domain(path)
        assert e.atlas == d.atlas and e.profiles == d.profiles

    def test_sector_round_trip(self, sector):
        e = load_domain(json.dumps(sector.to_descriptor()))
        assert e.profiles == sector.profiles

    def test_unknown_kind_rejected(self):
        d = rectangle_domain(1.0, 0.8).to_descriptor()
        d["charts"][0]["g"]["kind"] = "wiggle"
        with pytest.raises(InvalidDomain):
            load_domain(d)


class TestSymmetricDifference:
    def test_identical(self, sector):
        assert symmetric_difference_measure(sector, sector).value == 0.0

    def test_constant_graphs(self):
        d1 = single_chart_domain(constant(0.8))
        d2 = single_chart_domain(constant(0.6))
        assert symmetric_difference_measure(d1, d2).value == pytest.approx(0.2, abs=1e-12)

    def test_annular_sector(self):
        est = symmetric_difference_measure(PolarSector(B34), PolarSector(B34, 0.1))
        target = B34 * 0.01
        assert target == pytest.approx(0.0235619, abs=1e-7)
        assert abs(est.value - target) <= est.error

    def test_tilde_kite_area(self, sector):
        for eps in (0.02, 0.1, 0.25):
            t = sector.with_profile(0, tilde_profile(B34, eps))
            est = symmetric_difference_measure(sector, t)
            assert est.method == "quadrature"
            assert est.value == pytest.approx(eps**2 * math.sin(B34), abs=1e-10)

    def test_atlas_mismatch(self):
        d1 = rectangle_domain(1.0, 0.8)
        d2 = rectangle_domain(1.2, 0.8)
        with pytest.raises(AtlasMismatch):
            symmetric_difference_measure(d1, d2)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0.3, 1.1), min_size=9, max_size=9))
    def test_symmetry_and_triangle(self, vals):
        x = np.linspace(0, 1, 3)
        doms = [single_chart_domain(Profile("sampled", {"x": x, "y": vals[3 * i:3 * i + 3]})) for i in range(3)]
        m = lambda a, b: symmetric_difference_measure(a, b).value
        a, b, c = doms
        assert m(a, b) == pytest.approx(m(b, a), abs=1e-12)
        assert m(a, c) <= m(a, b) + m(b, c) + 1e-10


def random_strip(rng, c_factor=None):
    a, D2, D1 = 0.0, 0.5, 1.0
    amp = rng.uniform(0.02, 0.12, size=3)
    k = rng.integers(1, 5, size=3)
    ph = rng.uniform(0, 2 * np.pi, size=3)
    g1 = lambda x: 0.75 + sum(amp[i] * np.sin(k[i] * np.pi * x + ph[i]) for i in range(2)) / 2
    g2 = lambda x: 0.75 + amp[2] * np.abs(np.sin(k[2] * np.pi * x + ph[2])) - 0.05
    return ChartStrip((0.0, 1.0), a, D1, D2, g1, g2)


class TestStrip:
    def test_constant_example(self):
        s = ChartStrip((0, 1), 0.0, 1.0, 0.5, constant(0.8), constant(0.6))
        assert s.delta == 0.5
        m = strip_measures(s, 2.0)
        np.testing.assert_allclose(m, (0.2, 0.1, 0.2), atol=1e-14)

    def test_no_excess(self):
        s = ChartStrip((0, 1), 0.0, 1.0, 0.5, constant(0.6), constant(0.7))
        assert strip_measures(s, 2.0) == (0.0, 0.0, 0.0)

    def test_sinusoid_example(self):
        g1 = Profile("sinusoid", {"offset": 0.7, "amplitude": 0.1, "wavenumber": math.pi, "phase": 0.0})
        s = ChartStrip((0, 1), 0.0, 1.0, 0.5, g1, constant(0.7))
        m12, m23, m1c2 = strip_measures(s, 2.0)
        ref, _ = integrate.quad(lambda x: 0.1 * math.sin(math.pi * x), 0, 1, epsabs=1e-14)
        assert m12 == pytest.approx(ref, abs=1e-12)
        assert abs(2 * 0.5 * m12 - m1c2) < 1e-10
        assert abs(2 * m23 - m1c2) < 1e-10

    def test_invalid_c(self):
        s = ChartStrip((0, 1), 0.0, 1.0, 0.5, constant(0.8), constant(0.6))
        with pytest.raises(InvalidC):
            strip_measures(s, 1.5)

    def test_violated_hypothesis(self):
        with pytest.raises(InvalidDomain):
            ChartStrip((0, 1), 0.0, 1.0, 0.5, constant(1.2), constant(0.6))

    @pytest.mark.parametrize("seed", range(10))
    def test_identity_chain_random(self, seed):
        s = random_strip(np.random.default_rng(seed))
        for c in (s.c_min, 2 * s.c_min, 5 * s.c_min):
            m12, m23, m1c2 = strip_measures(s, c)
            assert abs(c * s.delta * m12 - m1c2) < 1e-10
            assert abs(c * m23 - m1c2) < 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_pointwise_containments(self, seed):
        rng = np.random.default_rng(100 + seed)
        s = random_strip(rng)
        pts = np.column_stack([rng.uniform(0, 1, 10**4), rng.uniform(0, 1, 10**4)])
        for c in (s.c_min, 3 * s.c_min):
            o1, o2, o3, o1c = s.in_O1(pts), s.in_O2(pts), s.in_O3(pts), s.in_O1c(pts, c)
            assert not np.any(o3 & ~o2)
            assert not np.any(o2 & ~o1c)
            assert not np.any(o1 & ~o1c)
