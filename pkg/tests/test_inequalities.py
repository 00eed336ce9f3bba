import csv
import json
import math

import numpy as np
import pytest

from sqglab import inequalities as ineq
from sqglab import spectral as sp
from sqglab.spectral import Grid, SpectralField

G = Grid(32, 2 * np.pi)


def trig(f):
    return SpectralField.from_physical(G, f(G.x1, G.x2))


def constant(c):
    out = G.zeros()
    out.coeffs[0, 0] = c
    return out


COS_X = trig(lambda x, y: np.cos(x))
COS_Y = trig(lambda x, y: np.cos(y))


class TestCommutators:
    def test_kato_ponce_by_hand(self):
        # D^b(cos x cos y) - (D^b cos x) cos y vanishes unless b2 >= 1, where it has norm pi;
        # six such multi-indices have 1 <= |b| <= 3
        assert ineq.kato_ponce_lhs(COS_X, COS_Y) == pytest.approx(6 * np.pi, rel=1e-12)

    def test_leibniz_by_hand(self):
        # D^b(cos x cos y) - cos x D^b cos y vanishes unless b1 >= 1; three such b have |b| = 3
        assert ineq.leibniz_lhs(COS_X, COS_Y) == pytest.approx(3 * np.pi, rel=1e-12)

    def test_constant_f_kills_kato_ponce(self, rng):
        h = sp.random_field(G, rng, (np.abs(G.j1) <= 8) & (np.abs(G.j2) <= 8))
        assert ineq.kato_ponce_lhs(h, constant(1.5)) <= 1e-12 * sp.sobolev_norm(h, 3)

    def test_constant_h_in_kato_ponce_leaves_derivatives_of_f(self, rng):
        f = sp.random_field(G, rng, (np.abs(G.j1) <= 8) & (np.abs(G.j2) <= 8))
        expected = sum(
            1.5 * sp.lebesgue_norm(sp.derivative(f, b)) for k in (1, 2, 3) for b in sp.multi_indices(k)
        )
        assert ineq.kato_ponce_lhs(constant(1.5), f) == pytest.approx(expected, rel=1e-12)

    def test_constant_h_kills_leibniz(self, rng):
        f = sp.random_field(G, rng, (np.abs(G.j1) <= 8) & (np.abs(G.j2) <= 8))
        assert ineq.leibniz_lhs(constant(2.0), f) <= 1e-12 * sp.sobolev_norm(f, 3)

    def test_rejects_fields_outside_dealias_block(self):
        wide = sp.mode(G, (12, 0))
        with pytest.raises(ValueError, match="dealias"):
            ineq.kato_ponce_trial(wide, COS_Y)

    def test_degenerate_rhs(self):
        with pytest.raises(ineq.DegenerateTrialError):
            ineq.kato_ponce_trial(G.zeros(), G.zeros())


class TestInterpolation:
    @pytest.mark.parametrize("alpha", ineq.GN_ALPHAS)
    def test_single_mode_ratios(self, alpha):
        grad, dbeta = ineq.gn_trial(sp.mode(G, (1, 0), 0.3), alpha)
        # single unit-wavenumber mode: every Lambda power is the plain L2 norm
        assert grad.ratio == pytest.approx(math.sqrt(2 / G.area), rel=1e-6)
        assert dbeta.ratio == pytest.approx(1.0, rel=1e-12)

    def test_scaling_with_wavenumber(self):
        grad, dbeta = ineq.gn_trial(sp.mode(G, (3, 0), 0.3), 0.25)
        assert grad.ratio == pytest.approx(math.sqrt(2 / G.area) / 3, rel=1e-6)
        assert dbeta.ratio == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("alpha", [-0.1, 0.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError, match="alpha"):
            ineq.gn_trial(COS_X, alpha)

    def test_zero_field(self):
        with pytest.raises(ineq.DegenerateTrialError):
            ineq.gn_trial(G.zeros(), 0.1)


class TestLab:
    @pytest.mark.parametrize("kind", ineq.KINDS)
    def test_rescale_invariance(self, kind):
        assert ineq.rescale_defect(kind, seed=3) <= 1e-12

    def test_trials_are_seeded(self):
        a = ineq.run_trial("kato_ponce", 5)
        b = ineq.run_trial("kato_ponce", 5)
        assert a == b
        assert a[0].ratio != ineq.run_trial("kato_ponce", 6)[0].ratio

    def test_leibniz_h_lives_on_annulus(self):
        h, _ = ineq.trial_fields("leibniz", 0)
        on = h.coeffs != 0
        assert np.all((h.grid.kmag[on] >= 4 / 3 - 1e-12) & (h.grid.kmag[on] <= 1.5 + 1e-12))

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown"):
            ineq.run_trial("hardy", 0)

    def test_outputs(self, tmp_path):
        trials = ineq.run_lab("gn", range(2), check_rescale=True)
        assert len(trials) == 2 * 2 * len(ineq.GN_ALPHAS)
        ineq.write_csv(tmp_path / "t.csv", trials)
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert tuple(rows[0]) == ineq.CSV_HEADER and len(rows) == len(trials) + 1
        summary = ineq.write_summary(tmp_path / "s.json", trials)
        assert json.loads((tmp_path / "s.json").read_text()) == summary
        assert summary["gn_grad[0.25]"]["count"] == 2
        assert all(v["finite"] for v in summary.values())
        assert ineq.to_dict(trials[0])["ratio"] == trials[0].ratio
