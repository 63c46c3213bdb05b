import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from steinhaus_lab.geometry import annulus_index
from steinhaus_lab.rng import generator, stream_id, uniform_angles, uniform_words
from steinhaus_lab.sequences import (
    ProfileError,
    RadiusProfile,
    SequenceSample,
    blaschke_sum,
    driver_terms,
    dyadic_counts,
    make_radii,
    parse_counts,
    parse_profile,
    sample_sequence,
    tail_sum,
)

# --- streams -------------------------------------------------------------------


def test_stream_prefix_consistency():
    a = uniform_words(3, 100, "angles")
    b = uniform_words(3, 1000, "angles")
    assert np.array_equal(a, b[:100])


def test_streams_differ_by_label_and_seed():
    assert stream_id("angles", 0) != stream_id("angles", 1)
    assert not np.array_equal(uniform_angles(1, 10), uniform_angles(2, 10))
    assert not np.array_equal(generator(1, "x").random(5), generator(1, "y").random(5))


def test_angles_in_range():
    t = uniform_angles(9, 10_000)
    assert t.min() >= 0.0 and t.max() < 2 * math.pi


def test_seed_range_checked():
    with pytest.raises(ValueError):
        uniform_angles(-1, 3)
    with pytest.raises(ValueError):
        uniform_angles(2**64, 3)
    uniform_angles(2**64 - 1, 3)


# --- profiles ------------------------------------------------------------------


def test_geometric_radii():
    assert list(make_radii(RadiusProfile.geometric(0.5, 3))) == [0.5, 0.75, 0.875]


def test_power_radii():
    r = make_radii(RadiusProfile.power(1.0, 3))
    assert r == pytest.approx([0.0, 0.5, 2 / 3], abs=2e-16)


def test_power_clamps_at_origin():
    r = make_radii(RadiusProfile.power(2.0, 4, c=5.0))
    assert list(r[:2]) == [0.0, 0.0]
    assert r[2] == pytest.approx(1 - 5 / 9)


def test_dyadic_midpoints():
    r = make_radii(RadiusProfile.dyadic("n", 6))
    assert list(r) == [0.625, 0.8125, 0.8125, 0.90625, 0.90625, 0.90625]


def test_dyadic_explicit_list_and_constant_rule():
    r = make_radii(RadiusProfile.dyadic("1;0;2", 10))
    assert list(r) == [0.25, 0.8125, 0.8125]  # the list runs out after three points
    assert parse_counts("3")(17) == 3
    assert parse_counts("n^2")(4) == 16


def test_radii_sorted_and_in_range():
    for prof in (RadiusProfile.geometric(0.3, 50), RadiusProfile.power(1.5, 50), RadiusProfile.dyadic("n", 50)):
        r = make_radii(prof)
        assert np.all(np.diff(r) >= 0) and np.all((r >= 0) & (r <= 1))


@pytest.mark.parametrize(
    "bad",
    ["power:beta=0,N=10", "power:beta=-1,N=10", "geometric:q=1,N=5", "geometric:q=0.5", "geometric:q=0.5,N=5,x=1",
     "spiral:N=4", "dyadic:counts=zz,N=4", "geometric:q=abc,N=3"],
)
def test_profile_grammar_rejects(bad):
    with pytest.raises(ProfileError):
        parse_profile(bad)


def test_profile_grammar_round_trip(tmp_path):
    for spec in ("geometric:q=0.5,N=200", "power:c=1.0,beta=2.0,N=500", "dyadic:counts=n,N=140"):
        prof = parse_profile(spec)
        assert parse_profile(prof.spec_string()) == prof
    f = tmp_path / "radii.csv"
    f.write_text("0.9\n0.5\n0.99\n")
    prof = parse_profile(f"explicit:file={f}")
    assert list(make_radii(prof)) == [0.5, 0.9, 0.99]
    f.write_text("0.5\n1.0\n")
    with pytest.raises(ProfileError):
        parse_profile(f"explicit:file={f}")


# --- Blaschke accounting -----------------------------------------------------------


def test_blaschke_sum_geometric_partial_sums():
    for N in (1, 5, 30):
        s = blaschke_sum(RadiusProfile.geometric(0.5, N))
        assert s.value == 1 - 2.0**-N and s.tail_convergent


def test_blaschke_flags():
    assert not blaschke_sum(RadiusProfile.power(1.0, 10)).tail_convergent
    assert blaschke_sum(RadiusProfile.power(1.5, 10)).tail_convergent
    assert not RadiusProfile.dyadic("2^n", 10).tail_convergent
    assert RadiusProfile.dyadic("n", 10).tail_convergent


def test_power_two_partial_sums_increase_to_zeta2():
    prev = 0.0
    for N in (10, 100, 1000, 10000):
        v = blaschke_sum(RadiusProfile.power(2.0, N)).value
        assert prev < v < math.pi**2 / 6
        prev = v
    assert v + tail_sum(RadiusProfile.power(2.0, 10000), 10000) == pytest.approx(math.pi**2 / 6, rel=1e-13)


def test_tail_sum_geometric_exact():
    assert tail_sum(RadiusProfile.geometric(0.5, 10), 3) == Fraction(1, 8)
    assert math.isinf(tail_sum(RadiusProfile.power(1.0, 10), 3))


def test_tail_sum_dyadic_matches_long_truncation():
    prof = RadiusProfile.dyadic("n", 10)
    long = RadiusProfile.dyadic("n", 5000)
    gap, _ = long.gaps()
    assert tail_sum(prof, 7) == pytest.approx(math.fsum(gap[7:]), rel=1e-12)


def test_driver_terms_geometric_exact():
    d, t = driver_terms(RadiusProfile.geometric(0.5, 40), 30)
    assert d == Fraction(29, 2**30) and t == Fraction(1, 2**30)


# --- samples ------------------------------------------------------------------


def test_sample_determinism_and_prefix():
    prof = parse_profile("geometric:q=0.5,N=200")
    a, b = sample_sequence(prof, 1), sample_sequence(prof, 1)
    assert np.array_equal(a.theta, b.theta) and np.array_equal(a.gap, b.gap)
    long = sample_sequence(prof.with_count(400), 1)
    assert np.array_equal(long.theta[:200], a.theta)
    assert len(a) == prof.count


def test_empty_sample():
    s = sample_sequence(RadiusProfile.geometric(0.5, 0), 3)
    assert len(s) == 0 and dyadic_counts(s).total == 0


def test_samples_are_read_only():
    s = sample_sequence(RadiusProfile.geometric(0.5, 5), 3)
    with pytest.raises(ValueError):
        s.theta[0] = 1.0


def test_angles_uniform_ks():
    s = sample_sequence(RadiusProfile.geometric(0.999, 10_000), 4)
    assert stats.kstest(s.theta / (2 * math.pi), "uniform").pvalue > 1e-3


def test_first_angle_uniform_across_seeds():
    first = np.array([uniform_angles(seed, 1)[0] for seed in range(1000)])
    assert stats.kstest(first / (2 * math.pi), "uniform").pvalue > 1e-3


def test_deep_points_keep_exact_log_gap():
    s = sample_sequence(RadiusProfile.geometric(0.5, 2000), 0)
    assert s.log_gap[-1] == pytest.approx(-2000 * math.log(2), rel=1e-15)
    assert s.gap[-1] == 0.0  # underflowed, but log_gap carries it


# --- dyadic counts --------------------------------------------------------------


def test_geometric_one_point_per_annulus():
    dc = dyadic_counts(sample_sequence(RadiusProfile.geometric(0.5, 40), 0))
    assert dc.counts == {n: 1 for n in range(1, 41)}


@given(st.sampled_from(["geometric:q=0.7,N=60", "power:c=1,beta=1.3,N=80", "dyadic:counts=n,N=90"]),
       st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_dyadic_comparability(spec, seed):
    s = sample_sequence(parse_profile(spec), seed)
    dc = dyadic_counts(s)
    assert dc.total == len(s)
    assert dc.comparable


def test_annulus_of_dyadic_points():
    s = sample_sequence(RadiusProfile.dyadic("n", 10), 0)
    assert [annulus_index(r) for r in s.radii] == [1, 2, 2, 3, 3, 3, 4, 4, 4, 4]


def test_from_points_and_polar():
    s = SequenceSample.from_points([0, 0.5j])
    assert list(s.radii) == [0.0, 0.5]
    with pytest.raises(ProfileError):
        SequenceSample.from_polar([1.0], [0.0])
