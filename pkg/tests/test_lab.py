import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specstab import lab
from specstab.errors import DegenerateData, NotNested
from specstab.geometry import Profile, constant, single_chart_domain

B34 = 3 * math.pi / 4


def records(xs, ys):
    return [lab.SweepRecord(float(x), float(x), float(y), 0.0) for x, y in zip(xs, ys)]


class TestFit:
    def test_exact_power(self):
        xs = np.logspace(-6, -2, 7)
        fit = lab.fit_exponent(records(xs, 3 * xs**0.7))
        assert fit.exponent == pytest.approx(0.7, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3), abs=1e-10)
        assert fit.window == (0, 7)

    def test_constant(self):
        fit = lab.fit_exponent(records(np.logspace(-4, -1, 5), np.full(5, 2.0)))
        assert fit.exponent == pytest.approx(0.0, abs=1e-12) and fit.r_squared == 1.0

    @pytest.mark.parametrize("xs, ys", [([1, 2, 3, 4, 5], [1, 2, 0, 3, 4]), ([1, 2, 3, 4, 5], [1, 2, np.nan, 3, 4]),
                                        ([0, 2, 3, 4, 5], [1, 2, 3, 4, 5]), ([1, 2, 2, 4, 5], [1, 2, 3, 4, 5])])
    def test_degenerate(self, xs, ys):
        with pytest.raises(DegenerateData):
            lab.fit_exponent(records(xs, ys))

    def test_too_few(self):
        with pytest.raises(DegenerateData):
            lab.fit_exponent(records([1e-3, 1e-2, 1e-1], [1, 2, 3]))

    def test_curved_top_decade_dropped(self):
        xs = np.logspace(-4, 0, 9)
        ys = xs**0.5 * np.exp(3 * xs)
        fit = lab.fit_exponent(records(xs, ys))
        assert fit.window == (0, 7)
        full = np.polyfit(np.log(xs), np.log(ys), 1)[0]
        assert abs(fit.exponent - 0.5) < abs(full - 0.5) / 3

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 3.0), st.floats(-3, 3), st.integers(4, 12))
    def test_power_laws(self, a, logc, n):
        xs = np.logspace(-5, -2, n)
        fit = lab.fit_exponent(records(xs, math.exp(logc) * xs**a))
        assert fit.exponent == pytest.approx(a, abs=1e-9)
        assert 0 <= fit.r_squared <= 1 and fit.window[1] - fit.window[0] >= 4

    def test_record_invariants(self):
        r = lab.SweepRecord(0.1, 0.2, 3.0, 5.0)
        assert r.abs_diff == 2.0
        with pytest.raises(ValueError):
            lab.SweepRecord(0.1, -0.2, 3.0, 5.0)
        assert r.csv_row() == "0.10000000000000001,0.20000000000000001,3,5,2"


class TestSharpness:
    @pytest.mark.parametrize("beta, bc, target", [(B34, "dirichlet", 2 / 3), (B34, "neumann", 2 / 3),
                                                  (2 * math.pi / 3, "dirichlet", 3 / 4)])
    def test_exponent(self, beta, bc, target):
        res = lab.sharpness_sweep(beta, bc)
        assert res.target_exponent == pytest.approx(target)
        assert abs(res.fit.exponent - target) < 0.02 and res.passed
        assert all(r.sym_diff == pytest.approx(beta * r.param**2) for r in res.records)

    def test_parallel_matches_serial(self):
        a = lab.sharpness_sweep(B34, workers=1)
        b = lab.sharpness_sweep(B34, workers=4)
        assert a.csv_text() == b.csv_text()


class TestFDStability:
    def test_square(self):
        res = lab.shrinking_square_sweep(h=1 / 128, steps=(1, 2, 4, 8))
        assert res.extra["violations"] == 0
        assert abs(res.fit.exponent - 1) < 0.1

    def test_not_nested(self):
        d = single_chart_domain(constant(0.8))
        with pytest.raises(NotNested):
            lab.fd_stability_sweep(d, lambda t: d.with_profile(0, constant(0.8 + t)), [0.05, 0.1, 0.15, 0.2],
                                   h=1 / 32)

    def test_monotonicity_small(self):
        rep = lab.monotonicity_check(pairs=10)
        assert rep.violations == 0 and rep.min_margin >= 0

    def test_clamped_roots(self):
        assert lab.clamped_root(1) == pytest.approx(4.730040745, abs=1e-9)
        mu = lab.clamped_root(2)
        assert abs(math.cos(mu) * math.cosh(mu) - 1) < 1e-9 * math.cosh(mu)

    def test_biharmonic(self):
        cal = lab.biharmonic_calibration()
        assert cal.rel_error < 2e-3
        res = lab.biharmonic_sweep(h=2e-3, steps=(1, 2, 4, 8))
        assert abs(res.fit.exponent - 1) < 0.05


def bump_pair(amp):
    d1 = single_chart_domain(constant(0.3), band=(0.0, 0.5), rho=0.2)
    return d1, d1.with_profile(0, Profile("bump", {"offset": 0.3, "amplitude": amp, "center": 0.5, "width": 0.3}))


class TestTransitionCheck:
    def test_trivial(self):
        d1, _ = bump_pair(-0.05)
        rep = lab.transition_check(d1, d1, probes=3)
        assert rep.passed and rep.identity_fraction == 1.0
        assert rep.norm_ratio_max == pytest.approx(1.0, abs=1e-14)

    def test_bump(self):
        rep = lab.transition_check(*bump_pair(-0.05), probes=5)
        assert rep.passed and 0.5 < rep.norm_ratio_max < 2

    def test_identity_fraction_grows(self):
        fr = [lab.transition_check(*bump_pair(a), probes=1).identity_fraction for a in (-0.08, -0.04, -0.02)]
        assert fr[0] < fr[1] < fr[2] < 1


class TestModes:
    def test_orthonormal(self):
        d1, _ = bump_pair(-0.05)
        vals, modes = lab.grid_modes(d1, 1 / 50, 3)
        G = [[1 / 2500 * np.sum(a.values * b.values) for b in modes] for a in modes]
        np.testing.assert_allclose(G, np.eye(3), atol=1e-10)
        assert np.all(np.diff(vals) > 0)


class TestCLI:
    def run(self, tmp_path, cmd, cfg=None, extra=()):
        tmp_path.mkdir(parents=True, exist_ok=True)
        argv = [cmd, "--out", str(tmp_path)]
        if cfg is not None:
            path = tmp_path / "cfg.json"
            path.write_text(json.dumps(cfg))
            argv += ["--config", str(path)]
        return lab.main(argv + list(extra))

    def test_sharpness_outputs(self, tmp_path, capsys):
        assert self.run(tmp_path, "sharpness-sweep", {"beta": B34, "eps_range": [1e-4, 1e-2, 5]}) == 0
        raw = (tmp_path / "sharpness-sweep.csv").read_bytes()
        assert raw.startswith(b"param,sym_diff,lambda_pert,lambda_ref,abs_diff\n") and b"\r" not in raw
        assert len(raw.splitlines()) == 6
        summary = json.loads((tmp_path / "sharpness-sweep.json").read_text())
        assert set(summary) >= {"fit", "target_exponent", "tolerance", "pass", "runtime_s"}
        assert set(summary["fit"]) == {"exponent", "intercept", "r2", "window"}
        assert json.loads(capsys.readouterr().out)["pass"]

    def test_reproducible(self, tmp_path):
        cfg = {"preset": "random_nested", "pairs": 4}
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            self.run(d, "fd-stability", cfg, ["--seed", "0x1234"])
        assert (a / "fd-stability.json").read_bytes() == (b / "fd-stability.json").read_bytes()
        self.run(a, "sharpness-sweep")
        self.run(b, "sharpness-sweep")
        assert (a / "sharpness-sweep.csv").read_bytes() == (b / "sharpness-sweep.csv").read_bytes()

    def test_custom_family(self, tmp_path):
        cfg = {"preset": "custom", "omega1": {"preset": "square"}, "h": 1 / 64, "params": [1 / 64, 2 / 64, 4 / 64, 8 / 64],
               "family": {"chart": 0, "profile": {"kind": "constant"}, "linear": {"value": [1.0, -1.0]}},
               "target": 1.0, "tolerance": 0.2}
        assert self.run(tmp_path, "fd-stability", cfg) == 0
        rows = (tmp_path / "fd-stability.csv").read_text().splitlines()
        assert len(rows) == 5

    def test_sector_spectrum(self, tmp_path):
        self.run(tmp_path, "sector-spectrum", {"beta": math.pi / 4, "n": 3, "k_max": 4})
        out = json.loads((tmp_path / "sector-spectrum.json").read_text())
        assert [r["k"] for r in out["eigenvalues"]] == [1, 2, 1]

    def test_transition_check(self, tmp_path):
        assert self.run(tmp_path, "transition-check", {"probes": 2}) == 0
        assert json.loads((tmp_path / "transition-check.json").read_text())["support_defect"] == 0.0

    def test_bad_seed(self, tmp_path):
        with pytest.raises(SystemExit):
            self.run(tmp_path, "sharpness-sweep", None, ["--seed", "-1"])
