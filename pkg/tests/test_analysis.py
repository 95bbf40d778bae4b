import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from vlcsim.analysis import (
    ReceiverTemplate,
    bound_curve,
    coverage_percentage,
    dmin_davg,
    ladder_sets,
    pep,
    q_function,
    rate_contours,
    required_snr_db,
    snr_map,
    union_bound_ber,
)
from vlcsim.geometry import ChannelMatrix, NoiseModel, RoomConfig
from vlcsim.mappers import SignalSet, enumerate_signal_set, make_alphabet
from vlcsim.system import SystemConfig, TransmitterConfig

H_QCM = SystemConfig().channel("qcm")


def _system(d_tx=1.0, placement="auto"):
    return SystemConfig(transmitter=TransmitterConfig(d_tx=d_tx, placement=placement))


def union_oracle(s, H, a, sigma):
    total = 0.0
    for i in range(s.size):
        for j in range(s.size):
            if i == j:
                continue
            diff = s.vectors[j] - s.vectors[i]
            dist = math.sqrt(sum(sum(H.entries[r, c] * diff[c] for c in range(s.n_tx)) ** 2 for r in range(H.n_rx)))
            q = 0.5 * math.erfc(a * dist / (2 * sigma) / math.sqrt(2))
            total += q * bin(int(s.labels[i]) ^ int(s.labels[j])).count("1")
    return total / (s.size * s.bits_per_use)


class TestPep:
    def test_identical_vectors(self):
        x = np.array([1.0, 0, 1, 0])
        assert pep(x, x, H_QCM, 1.0, 1e-6) == 0.5

    def test_unit_argument(self):
        H = ChannelMatrix(np.eye(2))
        sigma = 0.3
        x2 = np.array([2 * sigma, 0.0])
        assert pep(np.zeros(2), x2, H, 1.0, sigma) == pytest.approx(0.158655, abs=1e-6)

    def test_vanishing_noise(self):
        assert pep(np.zeros(4), np.ones(4), H_QCM, 1.0, 1e-12) < 1e-300

    def test_q_function_matches_normal_tail(self):
        x = np.linspace(-5, 30, 200)
        np.testing.assert_allclose(q_function(x), norm.sf(x), rtol=1e-12, atol=0)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        x1, x2 = rng.uniform(0, 3, 4), rng.uniform(0, 3, 4)
        assert pep(x1, x2, H_QCM, 1.0, 3e-6) == pep(x2, x1, H_QCM, 1.0, 3e-6)


class TestUnionBound:
    def test_two_point_set(self):
        s = enumerate_signal_set("dcm", make_alphabet("bpsk", 2))
        H = ChannelMatrix(np.array([[0.5, 0.25]]))
        sigma = 0.4
        dist = abs(0.25 * math.pi)
        assert union_bound_ber(s, H, 1.0, sigma) == pytest.approx(float(q_function(dist / (2 * sigma))), rel=1e-14)

    @pytest.mark.parametrize("scheme,m,sigma", [("qcm", 4, 3e-6), ("dcm", 8, 2e-6), ("sm-dcm", 8, 4e-6)])
    def test_matches_double_loop_oracle(self, scheme, m, sigma):
        s = enumerate_signal_set(scheme, make_alphabet("qam", m))
        H = _system().channel(scheme)
        got = union_bound_ber(s, H, 1.0, sigma, clamp=False)
        assert got == pytest.approx(union_oracle(s, H, 1.0, sigma), rel=1e-12)

    def test_clamp_and_raw(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 64))
        raw = union_bound_ber(s, H_QCM, 1.0, 1e-3, clamp=False)
        assert raw > 0.5 and union_bound_ber(s, H_QCM, 1.0, 1e-3) == 0.5

    def test_relabeling_invariance(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 16))
        perm = np.random.default_rng(0).permutation(s.size)
        t = SignalSet(s.scheme, s.alphabet, s.vectors[perm], s.labels[perm], s.bits_per_use)
        assert union_bound_ber(t, H_QCM, 1.0, 5e-6) == pytest.approx(union_bound_ber(s, H_QCM, 1.0, 5e-6), rel=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1e-7, 1e-4), st.floats(1.001, 10))
    def test_strictly_decreasing_as_noise_falls(self, sigma, k):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 16))
        hi = union_bound_ber(s, H_QCM, 1.0, sigma, clamp=False)
        lo = union_bound_ber(s, H_QCM, 1.0, sigma / k, clamp=False)
        assert lo < hi or hi == 0.0

    def test_bound_curve_monotone(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 16))
        _, b = bound_curve(s, H_QCM, np.arange(20, 60, 1.0)).as_arrays()
        assert np.all(np.diff(b) <= 0) and np.all((b >= 0) & (b <= 0.5))

    def test_qcm_bound_levels_near_reported_operating_points(self):
        # 1e-4 reached near 37 / 40 / 42.5 dB for BPSK / 4-QAM / 16-QAM at d_tx = 1.
        for m, expected in ((2, 37.0), (4, 40.0), (16, 42.5)):
            s = enumerate_signal_set("qcm", make_alphabet("qam", m))
            grid = np.arange(25, 60, 0.05)
            _, b = bound_curve(s, H_QCM, grid).as_arrays()
            crossing = grid[np.argmax(b <= 1e-4)]
            assert abs(crossing - expected) <= 2.0


class TestDistances:
    def test_duplicate_vector(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 4))
        dup = SignalSet(s.scheme, s.alphabet, np.vstack([s.vectors, s.vectors[:1]]), np.arange(5), 2)
        assert dmin_davg(dup, H_QCM)[0] == 0.0

    def test_identity_single_pair(self):
        s = SignalSet(None, None, np.array([[1.0, 0.0], [0.0, 1.0]]), np.arange(2), 1)
        assert dmin_davg(s, np.eye(2)) == (2.0, 2.0)

    def test_too_small(self):
        s = SignalSet(None, None, np.array([[1.0, 0.0]]), np.arange(1), 0)
        with pytest.raises(ValueError):
            dmin_davg(s, np.eye(2))

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_average_at_least_minimum(self, seed):
        rng = np.random.default_rng(seed)
        count = int(rng.integers(2, 12))
        s = SignalSet(None, None, rng.uniform(0, 2, (count, 4)), np.arange(count), 1)
        d_min, d_avg = dmin_davg(s, H_QCM)
        assert d_avg >= d_min * (1 - 1e-12)

    @pytest.mark.parametrize(
        "m,placement,d_min,d_avg",
        [
            (8, "p1", 2.0420e-14, 5.0340e-10),
            (8, "p2", 8.5358e-13, 5.0460e-10),
            (32, "p1", 1.8470e-14, 6.2289e-10),
            (32, "p2", 9.2177e-14, 6.2510e-10),
        ],
    )
    def test_placement_table_values(self, m, placement, d_min, d_avg):
        # The published average is the unordered-pair sum over L^2; ours is the
        # mean over unordered pairs, which differs by (L - 1) / (2L).
        s = enumerate_signal_set("sm-dcm", make_alphabet("qam", m))
        got_min, got_avg = dmin_davg(s, _system(1.0, placement).channel("sm-dcm"))
        assert got_min == pytest.approx(d_min, rel=1e-4)
        assert got_avg * (s.size - 1) / (2 * s.size) == pytest.approx(d_avg, rel=1e-4)


@pytest.fixture(scope="module")
def coarse_map():
    system = _system(2.0)
    return snr_map(system.room, system.luminaires("qcm"), ReceiverTemplate(), NoiseModel(), resolution=0.1)


class TestSnrMap:
    def test_grid_dimensions(self):
        system = _system(2.0)
        m = snr_map(system.room, system.luminaires("dcm"), ReceiverTemplate(), NoiseModel())
        assert m.gamma_db.shape == (201, 201)

    def test_center_is_maximum(self, coarse_map):
        iy, ix = np.unravel_index(np.nanargmax(coarse_map.gamma_db), coarse_map.gamma_db.shape)
        assert (coarse_map.x[ix], coarse_map.y[iy]) == pytest.approx((2.5, 2.5))

    def test_mirror_symmetry(self, coarse_map):
        g = coarse_map.gamma_db
        v = coarse_map.valid
        np.testing.assert_allclose(g[v], g[:, ::-1][v], rtol=1e-9)
        np.testing.assert_allclose(g[v], g[::-1, :][v], rtol=1e-9)

    def test_corner_much_weaker_than_center(self, coarse_map):
        g = coarse_map.gamma_db
        center = g[25, 25]
        corner = g[1, 1]
        assert center - corner > 3.0

    def test_edge_cells_are_no_data(self, coarse_map):
        assert not coarse_map.valid[0, :].any() and not coarse_map.valid[:, 0].any()
        assert coarse_map.valid[1:-1, 1:-1].all()


class TestRates:
    def test_infinite_noise_gives_zero_rate(self, coarse_map):
        noisy = replace(coarse_map, sigma2=coarse_map.sigma2 * 1e12)
        r = rate_contours(noisy, "qcm")
        assert np.all(r.rate[r.valid] == 0)

    def test_coverage_limits(self, coarse_map):
        r = rate_contours(coarse_map, "qcm")
        assert coverage_percentage(r, 0) == 100.0
        assert coverage_percentage(r, 7) == 0.0

    def test_rate_monotone_in_snr(self, coarse_map):
        rates = []
        for k in (1e2, 1.0, 1e-2, 1e-4):
            r = rate_contours(replace(coarse_map, sigma2=coarse_map.sigma2 * k), "qcm").rate
            rates.append(r[coarse_map.valid])
        for lo, hi in zip(rates, rates[1:]):
            assert np.all(hi >= lo)

    def test_coverage_non_increasing(self, coarse_map):
        r = rate_contours(replace(coarse_map, sigma2=coarse_map.sigma2 * 1e-3), "sm-dcm")
        cov = [coverage_percentage(r, e) for e in range(8)]
        assert all(b <= a for a, b in zip(cov, cov[1:]))

    def test_rates_stay_on_ladder(self):
        system = _system(2.0)
        for scheme in ("qcm", "dcm", "sm-dcm"):
            m = snr_map(system.room, system.luminaires(scheme), ReceiverTemplate(), NoiseModel(), resolution=0.25)
            m = replace(m, sigma2=m.sigma2 * 1e-3)
            for method in ("local", "reference"):
                r = rate_contours(m, scheme, method=method).rate
                assert set(np.unique(r[m.valid])) <= {0, 1, 2, 3, 4, 5, 6}

    def test_scheme_must_match_map(self, coarse_map):
        with pytest.raises(ValueError, match="luminaires"):
            rate_contours(coarse_map, "dcm")

    def test_reference_threshold_matches_bound(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 4))
        need = required_snr_db(s, H_QCM, 1.0, 1e-5)
        # At gamma = need the bound equals the target; Eb/N0 = gamma / eta.
        _, b = bound_curve(s, H_QCM, [need - 10 * math.log10(2)]).as_arrays()
        assert b[0] == pytest.approx(1e-5, rel=1e-4)

    def test_ladder_caps_index_modulation(self):
        assert [s.bits_per_use for s in ladder_sets("sm-dcm")] == [2, 3, 4, 5, 6]
        assert [s.bits_per_use for s in ladder_sets("dcm")] == [1, 2, 3, 4, 5, 6]

    def test_unknown_method(self, coarse_map):
        with pytest.raises(ValueError):
            rate_contours(coarse_map, "qcm", method="magic")
