import numpy as np
import pytest

from simo_prelog.jacobian import jacobian_factors
from simo_prelog.model import ChannelConfig, ChannelState, make_random_covariance, noiseless_output
from simo_prelog.recovery import (
    DegenerateSystemError,
    NearZeroSymbolError,
    build_homogeneous_system,
    build_recovery_system,
    recover_least_squares,
    recover_noiseless,
)
from simo_prelog.seeding import complex_normal, substream
from simo_prelog.structure import build_index_plan


def _setup(n, q, m, seed):
    cfg = ChannelConfig(n, q, m)
    factor = make_random_covariance(n, q, seed=seed)
    plan = build_index_plan(cfg)
    rng = substream(seed, "trial")
    s = complex_normal(rng, m * q)
    x_data = complex_normal(rng, n - plan.alpha)
    pilots = np.ones(plan.alpha, dtype=complex)
    x = np.concatenate([pilots, x_data])
    y_full = noiseless_output(factor, ChannelState(s), x)
    return factor, plan, pilots, s, x_data, x, y_full


class TestSystemLayout:
    def test_hand_matrix_3_2_2(self):
        factor, plan, pilots, s, x_data, x, y_full = _setup(3, 2, 2, 0)
        a = factor.a
        y = y_full[plan.selected]
        system = build_recovery_system(factor, plan, pilots, y)
        expected = np.zeros((6, 6), dtype=complex)
        expected[0, 0:2] = a[0]
        expected[1, 0:2] = a[1]
        expected[1, 4] = -y[1]
        expected[2, 0:2] = a[2]
        expected[2, 5] = -y[2]
        expected[3, 2:4] = a[0]
        expected[4, 2:4] = a[1]
        expected[4, 4] = -y[4]
        expected[5, 2:4] = a[2]
        expected[5, 5] = -y[5]
        assert np.array_equal(system.matrix, expected)
        assert np.allclose(system.rhs, [y[0], 0, 0, y[3], 0, 0])

    def test_zero_output_gives_zero_rhs(self):
        factor, plan, pilots, *_ = _setup(3, 2, 2, 0)
        system = build_recovery_system(factor, plan, pilots, np.zeros(6, dtype=complex))
        assert np.all(system.rhs == 0)

    def test_zero_pilot_rejected(self):
        factor, plan, _, _, _, _, y_full = _setup(3, 2, 2, 0)
        with pytest.raises(ValueError, match="pilot"):
            build_recovery_system(factor, plan, np.zeros(1, dtype=complex), y_full[plan.selected])

    def test_determinant_tracks_jacobian(self):
        # system = J2 * diag(I, -diag(x_D)), so the two determinants vanish together
        for seed in range(100):
            factor, plan, pilots, s, x_data, x, y_full = _setup(3, 2, 2, seed)
            system = build_recovery_system(factor, plan, pilots, y_full[plan.selected])
            det_sys = np.linalg.det(system.matrix)
            j2 = jacobian_factors(factor, plan, x, s).j2
            expected = np.linalg.det(j2) * np.prod(-x_data)
            assert abs(det_sys - expected) <= 1e-9 * max(abs(expected), 1e-300)
            assert (abs(det_sys) > 1e-10) == (abs(np.linalg.det(j2)) > 1e-10)


class TestNoiselessRoundTrip:
    @pytest.mark.parametrize("n,q,m", [(3, 2, 2), (4, 2, 3), (2, 1, 2), (5, 3, 2)])
    def test_round_trips(self, n, q, m):
        worst = 0.0
        for seed in range(200):
            factor, plan, pilots, s, x_data, x, y_full = _setup(n, q, m, seed)
            res = recover_noiseless(factor, plan, pilots, y_full[plan.selected])
            err_s = np.linalg.norm(res.s_hat - s) / np.linalg.norm(s)
            err_x = np.linalg.norm(res.x_data_hat - x_data) / np.linalg.norm(x_data)
            worst = max(worst, err_s, err_x)
            assert res.residual <= 1e-8 * np.linalg.norm(y_full[plan.selected])
        assert worst <= 1e-8

    def test_inverse_symbols_reported(self):
        factor, plan, pilots, s, x_data, x, y_full = _setup(3, 2, 2, 1)
        res = recover_noiseless(factor, plan, pilots, y_full[plan.selected])
        assert np.allclose(res.z_data_hat * res.x_data_hat, 1.0)
        assert np.allclose(res.z_data_hat, 1.0 / x_data)

    def test_zero_data_symbol_flagged(self):
        factor, plan, pilots, s, x_data, x, y_full = _setup(3, 2, 2, 2)
        x_bad = x.copy()
        x_bad[1] = 0.0
        y = noiseless_output(factor, ChannelState(s), x_bad)
        with pytest.raises(NearZeroSymbolError):
            recover_noiseless(factor, plan, pilots, y[plan.selected])

    def test_all_zero_output_degenerate(self):
        factor, plan, pilots, *_ = _setup(3, 2, 2, 0)
        with pytest.raises(DegenerateSystemError):
            recover_noiseless(factor, plan, pilots, np.zeros(6, dtype=complex))

    def test_dead_antenna_degenerate(self):
        # one silent antenna decouples its z-rows: rank drops below |I|
        factor, plan, pilots, s, x_data, x, y_full = _setup(3, 2, 2, 3)
        s_bad = s.copy()
        s_bad[:2] = 0.0
        y = noiseless_output(factor, ChannelState(s_bad), x)
        with pytest.raises(DegenerateSystemError):
            recover_noiseless(factor, plan, pilots, y[plan.selected])


class TestLeastSquares:
    def test_matches_square_solve_at_zero_noise(self):
        factor, plan, pilots, s, x_data, x, y_full = _setup(4, 2, 3, 5)
        a = recover_noiseless(factor, plan, pilots, y_full[plan.selected])
        b = recover_least_squares(factor, plan, pilots, y_full)
        assert np.linalg.norm(a.s_hat - b.s_hat) <= 1e-8
        assert np.linalg.norm(a.x_data_hat - b.x_data_hat) <= 1e-8

    def test_noisy_median_error(self):
        errs = []
        rho = 10.0**4
        for seed in range(200):
            factor, plan, pilots, s, x_data, x, y_full = _setup(3, 2, 2, seed)
            w = complex_normal(substream(seed, "noise"), y_full.size)
            y = y_full + w / np.sqrt(rho)
            res = recover_least_squares(factor, plan, pilots, y)
            errs.append(np.linalg.norm(res.x_data_hat - x_data) / np.linalg.norm(x_data))
        assert np.median(errs) <= 0.05

    def test_heavy_noise_robust(self):
        # (4,2,3) keeps 12 rows for 9 unknowns, so noise must show up as residual
        factor, plan, pilots, s, x_data, x, y_full = _setup(4, 2, 3, 7)
        w = complex_normal(substream(7, "noise"), y_full.size)
        y = y_full + 10.0 * w
        try:
            res = recover_least_squares(factor, plan, pilots, y)
            assert res.residual > 1.0
        except (DegenerateSystemError, NearZeroSymbolError):
            pass  # flagged degeneracy is acceptable under heavy noise


class TestPilotNecessity:
    @pytest.mark.parametrize("n,q,m", [(4, 2, 2), (3, 2, 2), (5, 2, 3)])
    def test_no_pilot_system_rank_deficient(self, n, q, m):
        for seed in range(50):
            factor, plan, pilots, s, x_data, x, y_full = _setup(n, q, m, seed)
            mat = build_homogeneous_system(factor, plan.cfg, y_full)
            rows, cols = mat.shape
            assert np.linalg.matrix_rank(mat) < cols
            if rows >= cols:
                sv = np.linalg.svd(mat, compute_uv=False)
                assert sv[-1] <= 1e-10 * sv[0]
            null_vec = np.concatenate([s, 1.0 / x])
            assert np.linalg.norm(mat @ null_vec) <= 1e-9 * np.linalg.norm(mat) * np.linalg.norm(null_vec)
