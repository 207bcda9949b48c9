import numpy as np
import pytest

from ndsthermo.errors import DepthExhausted, ParameterError
from ndsthermo.systems import (
    GOLDEN_MEAN,
    wrap_unit,
    CircleAffine,
    Identity,
    KolyadaSnoha,
    NdsSpec,
    Schedule,
    Space,
    apply_segment,
    certified_constants,
    circle_affine_schedule,
    distance,
    doubling,
    enumerate_preimages,
    golden_mean_shift,
    identity_system,
    is_admissible,
    kolyada_snoha,
    orbit,
    pomeau_manneville_schedule,
    spec_from_dict,
    torus_linear,
    total_shift,
)


def test_doubling_two_steps():
    assert apply_segment(doubling(), 1, 2, 0.3) == pytest.approx(0.2, abs=1e-12)


@pytest.mark.parametrize("spec,x", [(doubling(), 0.37), (torus_linear(), (0.1, 0.9)),
                                    (golden_mean_shift(16), (0, 1, 0, 0, 1, 0, 1, 0))])
def test_zero_steps_is_identity(spec, x):
    assert apply_segment(spec, 3, 0, x) == spec.space.point(x)


def test_torus_diag_one_step():
    out = apply_segment(torus_linear(), 1, 1, (0.5, 0.5))
    assert out == pytest.approx((0.0, 0.5), abs=1e-12)


def test_doubling_preimages():
    assert sorted(enumerate_preimages(doubling(), 1, 0.5)) == pytest.approx([0.25, 0.75])


def test_torus_preimages_of_origin():
    pre = enumerate_preimages(torus_linear(), 1, (0.0, 0.0))
    expect = {(a, b) for a in (0.0, 0.5) for b in (0.0, 1 / 3, 2 / 3)}
    assert len(pre) == 6
    got = {(round(a, 12), round(b, 12)) for a, b in pre}
    assert got == {(round(a, 12), round(b, 12)) for a, b in expect}


def test_golden_mean_preimage_of_word_starting_with_second_letter():
    # 0-based letters: the forbidden transition is 1 -> 1
    spec = golden_mean_shift(8)
    y = (1, 0, 1, 0, 0, 1, 0)
    assert enumerate_preimages(spec, 1, y) == [(0,) + y]


def test_golden_mean_preimages_of_word_starting_with_first_letter():
    spec = golden_mean_shift(8)
    y = (0, 1, 0, 0)
    assert sorted(enumerate_preimages(spec, 1, y)) == [(0,) + y, (1,) + y]


def test_circle_distance_wraps():
    assert distance(Space.circle(), 0.1, 0.9) == pytest.approx(0.2)


def test_symbolic_distance_first_difference():
    sp = Space.symbolic(((1, 1), (1, 1)), 16)
    # words are indexed from 1; the third letter is position 2 here
    x = (0, 1, 0, 0, 1)
    y = (0, 1, 1, 0, 1)
    assert distance(sp, x, y) == 0.125


def test_torus_distance_max_coordinate():
    assert distance(Space.torus(2), (0.0, 0.0), (0.5, 0.1)) == pytest.approx(0.5)


def test_diameters():
    assert Space.circle().diameter == 0.5
    assert Space.interval().diameter == 1.0
    assert Space.torus(3).diameter == 0.5


def test_point_membership_enforced():
    with pytest.raises(ParameterError):
        Space.circle().point(1.0)
    with pytest.raises(ParameterError):
        Space.torus(2).point((0.2,))
    with pytest.raises(ParameterError):
        Space.symbolic(GOLDEN_MEAN).point((1, 1, 0))
    assert Space.interval().point(1.0) == 1.0


def test_symbolic_shift_runs_out_of_letters():
    spec = golden_mean_shift(8)
    with pytest.raises(DepthExhausted):
        apply_segment(spec, 1, 5, (0, 1, 0, 1))


def test_admissibility():
    assert is_admissible(GOLDEN_MEAN, (0, 1, 0, 0, 1))
    assert not is_admissible(GOLDEN_MEAN, (0, 1, 1))


def test_certified_constants():
    assert certified_constants(doubling()) == (2.0, 0.25)
    sig, rho = certified_constants(torus_linear())
    assert sig == 2.0 and rho > 0
    assert circle_affine_schedule([2, 3]).sigma == 2.0


def test_non_expanding_specs_have_no_constants():
    with pytest.raises(ParameterError):
        certified_constants(identity_system())
    with pytest.raises(ParameterError):
        certified_constants(pomeau_manneville_schedule())


def test_declaring_half_the_constants_is_rejected():
    with pytest.raises(ParameterError):
        NdsSpec(Space.circle(), Schedule.constant(CircleAffine(2)), 2.0, None)


def test_descriptor_must_match_space():
    with pytest.raises(ParameterError):
        NdsSpec(Space.torus(2), Schedule.constant(CircleAffine(2)))


def test_kolyada_snoha_default_intervals():
    spec = kolyada_snoha()
    for n in range(1, 6):
        d = spec.map_at(n)
        assert isinstance(d, KolyadaSnoha)
        assert d.a == pytest.approx(1 - 2.0 ** (1 - n))
        assert d.b == pytest.approx(1 - 2.0 ** -n)


def test_total_shift_of_power_schedule():
    from ndsthermo.systems import shift_system

    spec = shift_system(GOLDEN_MEAN, (1, 2), 32)
    assert total_shift(spec, 1, 4) == 1 + 2 + 1 + 2


def test_spec_round_trip_through_dict():
    for spec in (doubling(3), torus_linear(), golden_mean_shift(20), pomeau_manneville_schedule(), kolyada_snoha()):
        assert spec_from_dict(spec.to_dict()) == spec


def test_spec_from_dict_rejects_unknown_fields():
    d = doubling().to_dict()
    d["colour"] = "red"
    with pytest.raises(ParameterError):
        spec_from_dict(d)


def test_orbit_length_and_start():
    o = orbit(doubling(), 1, 4, 0.1)
    assert len(o) == 5 and o[0] == 0.1
    assert o[-1] == pytest.approx(0.6, abs=1e-12)


def test_identity_orbit_is_constant():
    o = orbit(identity_system(), 1, 5, 0.42)
    assert all(p == 0.42 for p in o)
    assert Identity().apply(Space.circle(), np.array([[0.3]]))[0, 0] == 0.3


def test_pomeau_manneville_preimages_map_forward():
    spec = pomeau_manneville_schedule()
    for y in (0.0, 0.123, 0.5, 0.9):
        for n in (1, 2, 3):
            for z in enumerate_preimages(spec, n, y):
                fz = spec.map_at(n).apply(spec.space, np.array([[z]]))[0, 0] % 1.0
                assert distance(spec.space, fz, y) <= 1e-12


def test_wrap_unit_never_returns_one():
    assert (-1e-38) % 1.0 == 1.0
    assert wrap_unit(-1e-38) == 0.0
    assert wrap_unit(1.25) == 0.25
    assert list(wrap_unit(np.array([-1e-38, 0.5, 2.0]))) == [0.0, 0.5, 0.0]


def test_torus_image_of_tiny_coordinate_stays_on_torus():
    # the -1 entry sends the tiny second coordinate to -1e-30 before reduction
    spec = torus_linear(((3, -1), (0, 3)))
    y = apply_segment(spec, 1, 1, (0.0, 1e-30))
    assert spec.space.point(y) == y and all(0.0 <= c < 1.0 for c in y)
