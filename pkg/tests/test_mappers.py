import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlcsim.mappers import (
    Scheme,
    dcm_map,
    demap,
    enumerate_signal_set,
    index_bits,
    make_alphabet,
    parse_modulation,
    popcount,
    qcm_map,
    qcm_pr_map,
    smdcm_map,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def _hamming(a, b):
    return bin(a ^ b).count("1")


class TestAlphabets:
    def test_sixteen_qam_points(self):
        pts = set(make_alphabet("qam", 16).points.tolist())
        assert pts == {complex(i, q) for i in (-3, -1, 1, 3) for q in (-3, -1, 1, 3)}

    def test_bpsk(self):
        a = make_alphabet("bpsk", 2)
        assert a.points.tolist() == [1, -1]
        assert a.bit_labels == ["0", "1"]

    def test_eight_qam_levels(self):
        a = make_alphabet("qam", 8)
        assert a.size == 8
        levels = set(np.round(qcm_map(a.points).ravel(), 12).tolist())
        assert levels == {0.0, 1.0, 3.0}
        assert len(levels) == math.isqrt(8 // 2) + 1

    def test_thirty_two_cross(self):
        pts = make_alphabet("qam", 32).points
        grid = {complex(i, q) for i in range(-5, 6, 2) for q in range(-5, 6, 2)}
        corners = {complex(i, q) for i in (-5, 5) for q in (-5, 5)}
        assert set(pts.tolist()) == grid - corners

    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_square_qam_neighbours_differ_in_one_bit(self, m):
        pts = make_alphabet("qam", m).points
        for i, p in enumerate(pts):
            for j, q in enumerate(pts):
                if abs(abs(p - q) - 2) < 1e-12:
                    assert _hamming(i, j) == 1

    def test_eight_qam_neighbours_differ_in_one_bit(self):
        pts = make_alphabet("qam", 8).points
        for i, p in enumerate(pts):
            for j, q in enumerate(pts):
                if abs(abs(p - q) - 2) < 1e-12:
                    assert _hamming(i, j) == 1

    def test_cross_labels_are_near_gray(self):
        pts = make_alphabet("qam", 32).points
        costs = [
            _hamming(i, j) for i in range(32) for j in range(i + 1, 32) if abs(abs(pts[i] - pts[j]) - 2) < 1e-12
        ]
        assert len(costs) == 52
        assert sum(costs) == 60

    @pytest.mark.parametrize("m", [4, 8, 16])
    def test_psk_gray_around_circle(self, m):
        a = make_alphabet("psk", m)
        assert np.allclose(np.abs(a.points), 1.0)
        order = np.argsort(np.mod(np.angle(a.points), 2 * np.pi))
        for k in range(m):
            assert _hamming(int(order[k]), int(order[(k + 1) % m])) == 1

    @pytest.mark.parametrize("name,m", [("qam", 128), ("qam", 6), ("psk", 3), ("foo", 4), ("qam", 1)])
    def test_unsupported(self, name, m):
        with pytest.raises(ValueError):
            make_alphabet(name, m)

    def test_parse_modulation(self):
        assert parse_modulation("QAM-16").size == 16
        assert parse_modulation("psk8").size == 8
        assert parse_modulation("bpsk").name == "BPSK"
        with pytest.raises(ValueError):
            parse_modulation("ask-4")

    def test_labels_are_a_bijection(self):
        for m in (2, 4, 8, 16, 32, 64):
            labels = make_alphabet("qam", m).bit_labels
            assert len(set(labels)) == m and all(len(l) == int(math.log2(m)) for l in labels)

    def test_slice_ties_go_to_lowest_index(self):
        a = make_alphabet("qam", 4)
        assert a.slice(0.0) == 0


class TestQcm:
    def test_examples(self):
        np.testing.assert_array_equal(qcm_map(-3 + 1j), [0, 3, 1, 0])
        np.testing.assert_array_equal(qcm_map(1 - 3j), [1, 0, 0, 3])
        np.testing.assert_array_equal(qcm_map(1 + 1j), [1, 0, 1, 0])

    def test_zero_uses_nonnegative_branch(self):
        np.testing.assert_array_equal(qcm_map(0j), [0, 0, 0, 0])

    def test_rotation_to_single_led(self):
        x = qcm_pr_map(1 + 1j, math.pi / 4)
        np.testing.assert_allclose(x, [0, 0, math.sqrt(2), 0], atol=0)
        assert np.count_nonzero(x) == 1

    def test_zero_rotation_is_plain_mapping(self):
        s = np.array([1 + 3j, -3 - 1j, 1 - 1j])
        np.testing.assert_array_equal(qcm_pr_map(s, 0.0), qcm_map(s))

    def test_rotated_four_qam_is_space_shift_keying(self):
        v = enumerate_signal_set(Scheme.QCM_PR, make_alphabet("qam", 4), math.pi / 4).vectors
        assert v.shape == (4, 4)
        assert all(np.count_nonzero(row) == 1 for row in v)
        np.testing.assert_allclose(v.max(axis=1), math.sqrt(2), rtol=1e-15)
        assert sorted(np.argmax(v, axis=1)) == [0, 1, 2, 3]


class TestDcm:
    def test_examples(self):
        np.testing.assert_allclose(dcm_map(3 + 3j), [3 * math.sqrt(2), math.pi / 4])
        np.testing.assert_allclose(dcm_map(1 + 0j), [1, 0])
        np.testing.assert_allclose(dcm_map(-1 + 0j), [1, math.pi])

    def test_phase_range(self):
        x = dcm_map(np.array([1 - 1e-300j, -1 - 0j, 1e-20 - 1j]))
        assert np.all((x[:, 1] >= 0) & (x[:, 1] < 2 * math.pi))

    def test_smdcm_examples(self):
        r = 3 * math.sqrt(2)
        np.testing.assert_allclose(smdcm_map(3 + 3j, 0), [r, math.pi / 4, 0, 0])
        np.testing.assert_allclose(smdcm_map(3 + 3j, 1), [0, 0, r, math.pi / 4])
        np.testing.assert_allclose(smdcm_map(1 + 0j, 0), [1, 0, 0, 0])


class TestSignalSets:
    def test_qcm_four_qam(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 4))
        assert s.size == 4
        for row in s.vectors:
            assert sorted(row.tolist()) == [0, 0, 1, 1]
            assert (row[0] == 0) != (row[1] == 0) and (row[2] == 0) != (row[3] == 0)

    def test_smdcm_eight_qam(self):
        s = enumerate_signal_set("sm-dcm", make_alphabet("qam", 8))
        assert s.size == 16 and s.bits_per_use == 4

    def test_dcm_psk_constant_magnitude(self):
        s = enumerate_signal_set("dcm", make_alphabet("psk", 8))
        np.testing.assert_allclose(s.vectors[:, 0], 1.0, rtol=1e-15)

    @pytest.mark.parametrize("scheme", ["qcm", "qcm-pr", "dcm", "sm-dcm"])
    @pytest.mark.parametrize("m", [2, 4, 8, 16, 32, 64])
    def test_size_and_distinct_labels(self, scheme, m):
        s = enumerate_signal_set(scheme, make_alphabet("qam", m), 0.3)
        assert s.size == 2**s.bits_per_use
        assert len({s[i].bits for i in range(s.size)}) == s.size
        assert np.all(s.vectors >= 0)

    def test_demap_round_trip(self):
        a = make_alphabet("qam", 16)
        s = enumerate_signal_set("qcm", a)
        for k, p in enumerate(a.points):
            idx = int(np.nonzero(np.all(s.vectors == qcm_map(p), axis=1))[0][0])
            assert "".join(map(str, demap(idx, s))) == a.bit_labels[k]

    def test_smdcm_leading_bit_is_block(self):
        s = enumerate_signal_set("sm-dcm", make_alphabet("qam", 4))
        for i in range(s.size):
            block = 0 if np.any(s.vectors[i, :2]) else 1
            assert demap(i, s)[0] == block

    def test_gray_along_in_phase_axis(self):
        a = make_alphabet("qam", 16)
        s = enumerate_signal_set("qcm", a)
        for i, p in enumerate(a.points):
            for j, q in enumerate(a.points):
                if q - p == 2:
                    assert int(np.sum(demap(i, s) != demap(j, s))) == 1

    def test_demap_bad_index(self):
        s = enumerate_signal_set("qcm", make_alphabet("qam", 4))
        with pytest.raises(IndexError):
            demap(4, s)

    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_quarter_turn_gives_same_vector_set(self, m):
        a = make_alphabet("qam", m)
        for theta in (0.1, 0.37, 1.0):
            v1 = enumerate_signal_set("qcm-pr", a, theta).vectors
            v2 = enumerate_signal_set("qcm-pr", a, theta + math.pi / 2).vectors
            key = lambda v: sorted(map(tuple, np.round(v, 9)))
            assert key(v1) == key(v2)


def test_index_bits_and_popcount():
    np.testing.assert_array_equal(index_bits(5, 4), [0, 1, 0, 1])
    np.testing.assert_array_equal(popcount(np.array([0, 7, 8, 255])), [0, 3, 1, 8])


@settings(max_examples=2000, deadline=None)
@given(finite, finite)
def test_qcm_sign_magnitude_identity(re_, im):
    x = qcm_map(complex(re_, im))
    assert complex(x[0] - x[1], x[2] - x[3]) == complex(re_, im)
    assert np.count_nonzero(x[:2]) <= 1 and np.count_nonzero(x[2:]) <= 1


@settings(max_examples=2000, deadline=None)
@given(finite, finite)
def test_dcm_polar_identity(re_, im):
    s = complex(re_, im)
    r, phi = dcm_map(s)
    assert 0 <= phi < 2 * math.pi
    assert abs(r * cmath.exp(1j * phi) - s) <= 1e-12 * max(1.0, abs(s))
