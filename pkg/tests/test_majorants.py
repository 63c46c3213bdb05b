import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from steinhaus_lab.blaschke import criterion_sum, phi_lambda
from steinhaus_lab.geometry import BoundaryArc, harmonic_measure
from steinhaus_lab.majorants import (
    DiscreteMeasure,
    StepFunction,
    alpha_lambda_battery,
    alpha_lambda_check,
    balayage,
    balayage_lq_norm,
    build_psi,
    certify_majorant,
    lq_band_product,
    normalize_measure,
    poisson_extension_step,
    poisson_kernel,
    poisson_lq_norm,
)
from steinhaus_lab.sequences import SequenceSample, parse_profile, sample_sequence


def quad_circle(f, points=()):
    """(1/2pi) * integral over [0, 2pi] with scipy as an independent oracle."""
    pts = sorted({p % (2 * math.pi) for p in points} - {0.0})
    val, _ = integrate.quad(f, 0.0, 2 * math.pi, points=pts or None, limit=1000, epsabs=1e-13, epsrel=1e-12)
    return val / (2 * math.pi)


# --- Poisson kernel ---------------------------------------------------------------


def test_poisson_kernel_examples():
    assert poisson_kernel(0, 1.234) == 1.0
    r = 0.7
    assert poisson_kernel(r, 0.0) == pytest.approx((1 + r) / (1 - r), rel=1e-14)


def test_poisson_kernel_normalized():
    t = 2 * math.pi * np.arange(4096) / 4096
    for z in (0.0, 0.5j, cmath.rect(0.9, 2.0)):
        assert np.mean(poisson_kernel(z, t)) == pytest.approx(1.0, abs=1e-10)


def test_lq_norm_q1_and_parseval():
    assert poisson_lq_norm(0.99, 1.0).value == 1.0
    for r in (0.5, 0.9, 0.99, 0.999, 0.9999):
        res = poisson_lq_norm(r, 2.0)
        exact = (1 + r * r) / (1 - r * r)
        assert res.converged
        assert res.value == pytest.approx(exact, rel=1e-8)


def test_lq_norm_against_scipy():
    for r, q in [(0.6, 1.5), (0.9, 3.0), (0.95, 2.5)]:
        oracle = quad_circle(lambda t: poisson_kernel(r, t) ** q, points=[0.0])
        assert poisson_lq_norm(r, q).value == pytest.approx(oracle, rel=1e-9)


def test_lq_norm_is_rotation_invariant():
    a = poisson_lq_norm(0.99, 1.5).value
    b = poisson_lq_norm(cmath.rect(0.99, 2.5), 1.5).value
    assert a == b


def test_lq_norm_band():
    for q in (1.5, 2.0, 3.0):
        bands = [lq_band_product(1 - 10.0**-k, q) for k in range(1, 5)]
        assert max(bands) / min(bands) <= 4.0


def test_lq_norm_rejects_small_q():
    with pytest.raises(ValueError):
        poisson_lq_norm(0.5, 0.5)


# --- balayage -------------------------------------------------------------------


def test_balayage_examples():
    assert balayage(DiscreteMeasure((0,), (1.0,)), 0.7) == pytest.approx(1.0)
    mu = DiscreteMeasure((0.5, -0.5), (1.0, 1.0))
    assert balayage(mu, 0.0) == pytest.approx(3 + 1 / 3, rel=1e-14)
    t = 2 * math.pi * np.arange(8192) / 8192
    mu = DiscreteMeasure((0.3j, cmath.rect(0.8, 1.0)), (2.0, 0.5))
    assert np.mean(balayage(mu, t)) == pytest.approx(mu.mass, rel=1e-10)


def test_balayage_norm_against_scipy():
    mu = DiscreteMeasure((0.9, 0.5j, cmath.rect(0.97, -2.0)), (1.0, 2.0, 0.3))
    oracle = quad_circle(lambda t: balayage(mu, t) ** 1.5, points=[0.0, math.pi / 2, -2.0]) ** (1 / 1.5)
    assert balayage_lq_norm(mu, 1.5).value == pytest.approx(oracle, rel=1e-8)


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure((0.5,), (0.0,))
    with pytest.raises(ValueError):
        DiscreteMeasure((0.5,), (1.0, 2.0))


# --- alpha-lambda -------------------------------------------------------------------


def test_alpha_lambda_empty():
    rep = alpha_lambda_check(DiscreteMeasure(), 2.0)
    assert rep.s == 0.0


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("r", [0.5, 0.9, 0.999])
def test_single_atom_reproduces_band(q, r):
    mu = normalize_measure(DiscreteMeasure((r,), (1.0,)), q)
    rep = alpha_lambda_check(mu, q, norm_slack=1e-7)
    assert rep.norm == pytest.approx(1.0, rel=1e-8)
    # S * band = 1 exactly for a single atom
    assert rep.s * lq_band_product(r, q) == pytest.approx(1.0, rel=1e-7)
    assert rep.within_bound


def test_unnormalizable_measure_has_no_s():
    rep = alpha_lambda_check(DiscreteMeasure((0.9,), (5.0,)), 2.0)
    assert rep.norm > 1 and rep.s is None and not rep.within_bound


def test_small_battery():
    bat = alpha_lambda_battery(2.0, count=8, seed=3)
    assert all(r.within_bound for r in bat.reports)
    assert math.isfinite(bat.empirical_c)


# --- step functions ------------------------------------------------------------------


@st.composite
def step_functions(draw):
    n = draw(st.integers(1, 6))
    terms = []
    for _ in range(n):
        c = draw(st.floats(-7, 7))
        h = draw(st.floats(1e-3, math.pi))
        w = draw(st.floats(0.0, 5.0))
        terms.append((BoundaryArc(c, h), w))
    return StepFunction.from_terms(terms)


@given(step_functions(), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
@settings(max_examples=40, deadline=None)
def test_lp_power_against_scipy(psi, p):
    edges = [c + s * h for c, h in zip(psi.center, psi.half) for s in (-1, 1)]
    oracle = quad_circle(lambda t: psi(t) ** p, points=edges)
    assert psi.lp_power(p) == pytest.approx(oracle, rel=1e-8, abs=1e-12)


@given(step_functions())
@settings(max_examples=40, deadline=None)
def test_l1_by_linearity(psi):
    assert psi.l1_norm() == pytest.approx(psi.lp_power(1.0), rel=1e-12, abs=1e-15)


def test_lp_lower_bound_from_disjoint_arcs():
    psi = StepFunction.from_terms([(BoundaryArc(0.0, 0.1), 2.0), (BoundaryArc(1.0, 0.2), 1.0),
                                   (BoundaryArc(0.05, 0.3), 0.5)])
    disjoint = 2.0**3 * 0.1 / math.pi + 1.0**3 * 0.2 / math.pi
    assert psi.lp_power(3.0) >= disjoint


def test_tiny_arcs_keep_their_length():
    # arcs far narrower than the spacing of floats near their centre angle
    psi = StepFunction.from_terms([(BoundaryArc(3.0, 1e-300), 1.0)])
    assert psi.lp_power(2.0) == pytest.approx(1e-300 / math.pi, rel=1e-12)


def test_poisson_extension_examples():
    psi = StepFunction.from_terms([(BoundaryArc(0.5, 0.3), 2.0), (BoundaryArc(-2.0, 1.0), 0.7)])
    assert poisson_extension_step(psi, 0) == pytest.approx(psi.l1_norm(), rel=1e-14)
    full = StepFunction.from_terms([(BoundaryArc(0.0, math.pi), 3.0)])
    assert poisson_extension_step(full, cmath.rect(0.99, 1.0)) == pytest.approx(3.0)


def test_poisson_extension_against_quadrature():
    rng = np.random.default_rng(2)
    for _ in range(20):
        terms = [(BoundaryArc(rng.uniform(-4, 4), rng.uniform(0.01, 3)), rng.uniform(0, 3)) for _ in range(4)]
        psi = StepFunction.from_terms(terms)
        z = cmath.rect(rng.uniform(0, 0.95), rng.uniform(-4, 4))
        r, phi = abs(z), cmath.phase(z)
        edges = [c + s * h for c, h in zip(psi.center, psi.half) for s in (-1, 1)] + [phi]
        oracle = quad_circle(lambda t: psi(t) * poisson_kernel(z, t), points=edges)
        assert poisson_extension_step(psi, z) == pytest.approx(oracle, abs=1e-9)


# --- psi and its certificate -------------------------------------------------------


def test_build_psi_empty_and_pair():
    empty = build_psi(phi_lambda(SequenceSample.empty()))
    assert len(empty) == 0 and empty.l1_norm() == 0.0
    t = phi_lambda(SequenceSample.from_points([0, 0.5]))
    psi = build_psi(t)
    w = dict(zip(np.round(psi.half, 12), psi.weight))
    assert w[round(math.pi, 12)] == pytest.approx(math.log(2))
    om = harmonic_measure(0.5, BoundaryArc(0.0, 0.5))
    assert w[0.5] == pytest.approx(math.log(2) / om, rel=1e-14)


def test_k_is_bounded():
    rs = np.concatenate([np.linspace(0.001, 0.99, 300), 1 - np.logspace(-2, -4, 50)])
    ks = [1 / harmonic_measure(r, BoundaryArc(0.0, 1 - r)) for r in rs]
    assert max(ks) < 8


def test_single_point_margin_zero():
    cert = certify_majorant(phi_lambda(SequenceSample.from_points([0.4j])))
    assert list(cert.margins) == [0.0] and cert.valid


def test_antipodal_pair_positive_margins():
    cert = certify_majorant(phi_lambda(SequenceSample.from_points([0.9, -0.9])))
    assert np.all(cert.margins > 0)


def test_geometric_end_to_end():
    table = phi_lambda(sample_sequence(parse_profile("geometric:q=0.5,N=200"), 1))
    cert = certify_majorant(table)
    assert len(cert.margins) == 200 and np.all(cert.margins >= 0) and cert.valid
    assert cert.l1_bound_holds
    assert cert.psi_l1 <= cert.sup_K * criterion_sum(table, 1) / math.pi * (1 + 1e-12)


def test_margins_match_direct_poisson_extension():
    table = phi_lambda(sample_sequence(parse_profile("power:c=1,beta=2,N=60"), 4))
    psi = build_psi(table)
    cert = certify_majorant(table, psi)
    for i in range(0, 60, 7):
        z = (1 - table.gap[i]) * cmath.exp(1j * table.theta[i])
        direct = poisson_extension_step(psi, z) - table.value[i]
        assert cert.margins[i] == pytest.approx(direct, abs=1e-12)


def test_harnack_bound_on_radial_grid():
    table = phi_lambda(sample_sequence(parse_profile("dyadic:counts=n,N=300"), 2))
    psi = build_psi(table)
    h0 = poisson_extension_step(psi, 0)
    for ang in (0.0, 1.0, 4.0):
        for r in np.linspace(0.0, 0.999, 40):
            h = poisson_extension_step(psi, cmath.rect(r, ang))
            assert h / h0 <= (1 + r) / (1 - r) * (1 + 1e-12)


def test_certificate_json_fields():
    cert = certify_majorant(phi_lambda(SequenceSample.from_points([0.2, 0.7j])))
    d = json.loads(cert.to_json())
    assert set(d) == {"margins", "psi_l1", "psi_lp", "p", "sup_K", "valid"}
    assert d["valid"] is True


def test_duplicates_rejected():
    with pytest.raises(ValueError):
        build_psi(phi_lambda(SequenceSample.from_points([0.5, 0.5])))
