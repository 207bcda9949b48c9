import itertools
import json

import numpy as np
import pytest

from ndsthermo.errors import ParameterError
from ndsthermo.metrics import (
    CandidateGrid,
    bowen_distance,
    closeness,
    default_grid,
    dynamical_ball_membership,
    greedy_maximal_separated,
    greedy_spanning,
    reports_to_csv,
    symbolic_letters_needed,
    validate_separated,
    validate_spanning,
)
from ndsthermo.systems import Space, distance, doubling, golden_mean_shift, identity_system, torus_linear


def test_bowen_distance_doubling():
    assert bowen_distance(doubling(), 1, 3, 0.0, 0.01) == pytest.approx(0.08)


def test_bowen_distance_zero_steps_is_metric():
    spec = torus_linear()
    x, y = (0.1, 0.2), (0.7, 0.25)
    assert bowen_distance(spec, 4, 0, x, y) == distance(spec.space, x, y)


def test_bowen_distance_symbolic_shifts_the_difference():
    spec = golden_mean_shift(16)
    x = (0, 0, 0, 0, 1, 0, 1, 0)
    y = (0, 0, 1, 0, 1, 0, 1, 0)  # first difference at the third letter
    assert bowen_distance(spec, 1, 2, x, y) == 0.5


def test_ball_membership_center_and_boundary():
    spec = doubling()
    assert dynamical_ball_membership(spec, 0.3, 1, 5, 0.01, 0.3)
    assert not dynamical_ball_membership(spec, 0.0, 1, 3, 0.08, 0.01)
    assert dynamical_ball_membership(spec, 0.0, 1, 3, 0.1, 0.01)


def _circle_grid(h=0.01):
    return CandidateGrid.uniform(Space.circle(), h)


def test_circle_separated_three_points():
    grid = _circle_grid()
    rep = greedy_maximal_separated(identity_system(), 1, 0, 0.3, grid)
    # four points would need gaps summing to more than 4 * 0.3 > 1
    assert rep.cardinality == 3
    assert validate_separated(identity_system(), rep)


def test_circle_spanning_two_points():
    spec = identity_system()
    grid = _circle_grid()
    rep = greedy_spanning(spec, 1, 0, 0.3, grid)
    assert rep.cardinality == 2
    assert validate_spanning(spec, rep, grid)
    # no single closed 0.3-ball covers the grid
    X = grid.points[:, 0]
    assert all((np.minimum(abs(X - c), 1 - abs(X - c)) > 0.3).any() for c in X)


def test_brute_force_maximum_packing_matches_on_coarse_grid():
    spec = identity_system()
    grid = CandidateGrid.uniform(spec.space, 1 / 20)
    pts = grid.points[:, 0].tolist()
    best = 0
    for r in range(1, 5):
        for sub in itertools.combinations(pts, r):
            if all(distance(spec.space, a, b) > 0.3 for a, b in itertools.combinations(sub, 2)):
                best = r
    assert greedy_maximal_separated(spec, 1, 0, 0.3, grid).cardinality == best == 3


def test_eps_beyond_diameter_gives_one_point():
    spec = doubling()
    grid = _circle_grid(0.02)
    assert greedy_maximal_separated(spec, 1, 0, 0.6, grid).cardinality == 1
    assert greedy_spanning(spec, 1, 0, 0.6, grid).cardinality == 1


def test_doubling_count_ratio_tends_to_two():
    spec = doubling()
    eps = 1 / 8
    counts = [greedy_maximal_separated(spec, 1, n, eps, default_grid(spec, 1, n, eps)).cardinality
              for n in range(4, 11)]
    ratios = [b / a for a, b in zip(counts, counts[1:])]
    assert all(abs(r - 2) < 0.01 for r in ratios[-3:])


def test_doubling_counts_below_exact_oracle():
    # maximal (n, 2^-5)-separated sets on the circle have exactly 2^(n+5) - 1 points
    spec = doubling()
    eps = 2.0 ** -5
    for n in range(2, 8):
        c = greedy_maximal_separated(spec, 1, n, eps, default_grid(spec, 1, n, eps)).cardinality
        assert 0.75 * (2 ** (n + 5) - 1) <= c <= 2 ** (n + 5) - 1


def test_spanning_not_larger_than_separated():
    spec = doubling()
    for n in range(0, 6):
        grid = default_grid(spec, 1, n, 0.1)
        close = closeness(spec, 1, n, 0.1, grid)
        s = greedy_maximal_separated(spec, 1, n, 0.1, grid, close)
        r = greedy_spanning(spec, 1, n, 0.1, grid, close)
        assert r.cardinality <= s.cardinality
        assert validate_spanning(spec, s, grid)


def test_golden_mean_separated_counts_are_fibonacci():
    spec = golden_mean_shift(32)
    eps = 2.0 ** -4
    fib = [1, 2]
    while len(fib) < 20:
        fib.append(fib[-1] + fib[-2])
    for n in range(1, 8):
        c = greedy_maximal_separated(spec, 1, n, eps, default_grid(spec, 1, n, eps)).cardinality
        # words agreeing on n + 3 letters are within 2^-4; count(L) = F(L + 2)
        assert c == fib[n + 3]


def test_symbolic_letters_needed():
    assert symbolic_letters_needed(0.5) == 0
    assert symbolic_letters_needed(0.25) == 1
    assert symbolic_letters_needed(2.0 ** -4) == 3
    assert symbolic_letters_needed(0.1) == 3


def test_torus_validation_round_trip():
    spec = torus_linear()
    grid = CandidateGrid.uniform(spec.space, 1 / 40)
    rep = greedy_maximal_separated(spec, 1, 2, 0.1, grid)
    assert validate_separated(spec, rep)
    span = greedy_spanning(spec, 1, 2, 0.1, grid)
    assert validate_spanning(spec, span, grid)


def test_validation_detects_a_bad_set():
    spec = doubling()
    grid = _circle_grid(0.05)
    rep = greedy_maximal_separated(spec, 1, 1, 0.2, grid)
    rep.points = np.vstack([rep.points, rep.points[:1] + 1e-3])
    rep.indices = np.arange(len(rep.points))
    assert not validate_separated(spec, rep)


def test_restrict_keeps_closed_ball():
    grid = _circle_grid(0.05).restrict(0.0, 0.1)
    assert sorted(np.round(grid.points[:, 0], 12).tolist()) == [0.0, 0.05, 0.1, 0.9, 0.95]
    with pytest.raises(ParameterError):
        CandidateGrid.explicit(Space.circle(), [0.5]).restrict(0.0, 0.1)


def test_word_grid_is_lexicographic_and_admissible():
    g = CandidateGrid.words(Space.symbolic(((1, 1), (1, 0))), 5)
    rows = [tuple(r) for r in g.points.tolist()]
    assert rows == sorted(rows) and len(rows) == 13
    assert all(not (a == 1 and b == 1) for r in rows for a, b in zip(r, r[1:]))


def test_report_serialisation():
    spec = doubling()
    grid = _circle_grid(0.05)
    rep = greedy_maximal_separated(spec, 1, 1, 0.2, grid)
    d = json.loads(rep.to_json())
    assert d["cardinality"] == rep.cardinality and d["grid"]["kind"] == "uniform"
    lines = reports_to_csv([rep]).strip().splitlines()
    assert lines[0].startswith("k,n,epsilon,mode,cardinality") and len(lines) == 2


def test_invalid_arguments():
    with pytest.raises(ParameterError):
        CandidateGrid.uniform(Space.circle(), 0)
    with pytest.raises(ParameterError):
        greedy_maximal_separated(doubling(), 1, 1, -0.1, _circle_grid())
