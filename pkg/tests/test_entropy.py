import math

import numpy as np
import pytest

from ndsthermo import entropy as ent
from ndsthermo.errors import ParameterError
from ndsthermo.systems import GOLDEN_MEAN, doubling, golden_mean_shift, identity_system, kolyada_snoha

LOG2 = math.log(2)
LOG_PHI = math.log((1 + math.sqrt(5)) / 2)


def _series(values, start=1):
    ns = list(range(start, start + len(values)))
    return ent.CountSeries(ns, values, 0.1, "separated", 1)


def test_growth_rate_of_powers_of_two():
    assert ent.growth_rate(_series([2.0 ** n for n in range(1, 13)])) == pytest.approx(LOG2, abs=1e-12)


def test_growth_rate_of_constant():
    assert ent.growth_rate(_series([7] * 10)) == pytest.approx(0.0, abs=1e-12)


def test_growth_rate_of_fibonacci():
    fib = [1, 1]
    while len(fib) < 40:
        fib.append(fib[-1] + fib[-2])
    # F(n+2) for n = 10..30, window is the whole range
    s = ent.CountSeries(list(range(10, 31)), [fib[n + 1] for n in range(10, 31)], 0.1, "separated", 1)
    assert ent.growth_rate(s, window=s.ns) == pytest.approx(LOG_PHI, abs=1e-3)


def test_growth_fit_needs_three_positive_points():
    with pytest.raises(ParameterError):
        ent.growth_rate(_series([1, 2]), window=[1, 2])
    with pytest.raises(ParameterError):
        ent.growth_rate(_series([1, 0, 2, 4]), window=[1, 2, 3])


def test_default_window_is_upper_half():
    assert ent.default_window(range(4, 15)) == list(range(9, 15))


def test_series_requires_increasing_n():
    with pytest.raises(ParameterError):
        ent.CountSeries([1, 3, 2], [1, 2, 3], 0.1, "separated", 1)


def test_doubling_counts_within_factor_two_of_geometric():
    s = ent.count_series(doubling(), 1, 1 / 8, range(1, 9))
    c = s.values[-1] / 2 ** s.ns[-1]
    assert all(0.5 * c * 2 ** n <= v <= 2 * c * 2 ** n for n, v in s.pairs())


def test_identity_counts_constant():
    s = ent.count_series(identity_system(), 1, 0.1, range(1, 6))
    assert len(set(s.values)) == 1


def test_golden_mean_counts_are_word_counts():
    s = ent.count_series(golden_mean_shift(32), 1, 2.0 ** -4, range(1, 11))
    # grid words agree on n + 3 letters when 2^-4-close, so the count equals words of length n + 3
    assert [v for _, v in s.pairs()] == [ent.sft_word_count(GOLDEN_MEAN, n + 3) for n in s.ns]


def test_count_series_mode_validation():
    with pytest.raises(ParameterError):
        ent.count_series(doubling(), 1, 0.1, range(1, 4), mode="volume")


def test_doubling_entropy():
    r = ent.entropy_estimate(doubling(), 1, 1 / 16, range(4, 12))
    assert r.estimate == pytest.approx(LOG2, abs=0.05)
    assert r.cross_check == pytest.approx(LOG2, abs=0.05)
    assert r.limsup_proxy >= r.estimate - 0.5


def test_golden_mean_entropy():
    r = ent.entropy_estimate(golden_mean_shift(48), 1, 2.0 ** -4, range(4, 20))
    assert r.estimate == pytest.approx(LOG_PHI, abs=0.02)


@pytest.mark.parametrize("k", [1, 3])
def test_zero_entropy_example(k):
    r = ent.entropy_estimate(kolyada_snoha(), k, 1 / 32, range(4, 12))
    assert r.estimate <= 0.02


def test_asymptotic_doubling_is_chaotic():
    a = ent.asymptotic_entropy_estimate(doubling(), 1 / 16, [1, 2, 3], range(4, 11))
    assert a.chaotic
    assert all(abs(p - LOG2) <= 0.05 for p in a.profile)


def test_asymptotic_identity_is_zero():
    a = ent.asymptotic_entropy_estimate(identity_system(), 0.1, [1, 2], range(1, 7))
    assert a.profile == [0.0, 0.0] and not a.chaotic


def test_asymptotic_zero_entropy_example():
    a = ent.asymptotic_entropy_estimate(kolyada_snoha(), 1 / 32, [1, 3], range(4, 11))
    assert max(a.profile) <= 0.02 and not a.chaotic


def test_entropy_point_full_radius_matches_global():
    local, glob = ent.entropy_point_probe(doubling(), 0.2, 0.5, 1 / 16, range(3, 9))
    assert local.series.values == glob.series.values
    assert local.estimate == glob.estimate


def test_entropy_point_of_doubling():
    local, glob = ent.entropy_point_probe(doubling(), 0.5, 0.05, 1 / 16, range(4, 11))
    assert abs(local.estimate - glob.estimate) <= 0.05


def test_zero_entropy_example_local_probe():
    local, _ = ent.entropy_point_probe(kolyada_snoha(), 0.1, 0.01, 1 / 32, range(4, 11))
    assert local.estimate <= 0.02


@pytest.mark.parametrize("L,count", [(1, 2), (2, 3), (3, 5)])
def test_sft_word_count_small(L, count):
    assert ent.sft_word_count(GOLDEN_MEAN, L) == count


def test_sft_word_count_matches_enumeration():
    import itertools

    A = ((1, 1, 0), (0, 1, 1), (1, 0, 1))
    for L in range(1, 8):
        brute = sum(all(A[a][b] for a, b in zip(w, w[1:])) for w in itertools.product(range(3), repeat=L))
        assert ent.sft_word_count(A, L) == brute


def test_sft_word_count_is_exact_integer():
    c = ent.sft_word_count(GOLDEN_MEAN, 200)
    assert isinstance(c, int)
    a, b = 1, 1
    for _ in range(201):
        a, b = b, a + b
    assert c == a


def test_spectral_radius_against_eigvals():
    rng = np.random.default_rng(3)
    for _ in range(5):
        M = rng.integers(0, 2, (4, 4)) + np.eye(4, dtype=int)
        assert ent.spectral_radius(M) == pytest.approx(max(abs(np.linalg.eigvals(M))), rel=1e-9)
    assert ent.spectral_radius(GOLDEN_MEAN) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-12)


def test_spectral_radius_periodic_matrix():
    assert ent.spectral_radius([[0, 1], [1, 0]]) == pytest.approx(1.0, abs=1e-12)


def test_spectral_radius_rejects_negative():
    with pytest.raises(ParameterError):
        ent.spectral_radius([[1, -1], [0, 1]])


def test_report_serialises():
    r = ent.entropy_estimate(doubling(), 1, 0.125, range(1, 7))
    d = r.to_dict()
    assert d["series"]["n"] == list(range(1, 7)) and d["window"] == [4, 5, 6]
