import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoflow import regularity as reg
from geoflow.catalog import make_surface
from geoflow.errors import DomainTooSmall
from geoflow.flow import TangentVector
from geoflow.jacobi import JacobiState
from geoflow.surface import GraphSurface, Regularity, g_norm_batch

from conftest import random_chart_points


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def _affine_surface():
    def h(X):
        return (0.3 + 0.5 * X[..., 0] - 0.2 * X[..., 1])[..., None]

    def grad(X):
        out = np.zeros(X.shape[:-1] + (2, 1))
        out[..., 0, 0] = 0.5
        out[..., 1, 0] = -0.2
        return out

    def hess(X):
        return np.zeros(X.shape[:-1] + (2, 2, 1))

    return GraphSurface(
        "affine", 2, 1, [-0.8, -0.8], [0.8, 0.8], h, grad, hess,
        regularity=Regularity("smooth"),
    )


def test_kernel_unit_mass():
    w = reg._bump_weights(16, 2)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.all(w >= 0.0)
    np.testing.assert_allclose(w, w[::-1, :], atol=0)  # symmetric
    np.testing.assert_allclose(w, w[:, ::-1], atol=0)


def test_mollify_zero(flat):
    s = reg.mollify(flat, 0.1)
    pts = s.sample_grid(30)
    assert np.max(np.abs(s.height(pts))) <= 1e-14
    assert np.max(np.abs(s.hessian(pts))) <= 1e-12


def test_mollify_affine_exact():
    s = reg.mollify(_affine_surface(), 0.1)
    pts = s.sample_grid(40)
    expected = 0.3 + 0.5 * pts[:, 0] - 0.2 * pts[:, 1]
    np.testing.assert_allclose(s.height(pts)[:, 0], expected, atol=1e-12)
    np.testing.assert_allclose(s.gradient(pts)[:, 0, 0], 0.5, atol=1e-12)
    np.testing.assert_allclose(s.gradient(pts)[:, 1, 0], -0.2, atol=1e-12)


def test_mollify_vee_second_derivative(vee):
    # smoothing of the sign-valued second derivative: positivity of the
    # kernel keeps the stored values inside [-2, 2] exactly, and away from
    # the crease the smoothed field sits at +-2
    for eps in (0.04, 0.02):
        s = reg.mollify(vee, eps)
        assert s.grid_abs_max["hess"] <= 2.0 + 1e-12
        x = np.array([[2.5 * eps, 0.1], [-2.5 * eps, -0.2], [0.5, 0.3]])
        h11 = s.hessian(x)[:, 0, 0, 0]
        np.testing.assert_allclose(h11, [2.0, -2.0, 2.0], atol=1e-6)
    # the splined field between nodes may ring above the data bound by its
    # interpolation error only
    s = reg.mollify(vee, 0.05)
    pts = s.sample_grid(100)
    assert np.max(np.abs(s.hessian(pts)[..., 0, 0, 0])) <= 2.0 + 5e-3


def test_mollify_pointwise_limit(vee):
    # at a fixed point off the crease the smoothed value approaches 2 sign(x1)
    x = np.array([0.05, 0.0])
    errs = []
    for eps in (0.04, 0.02, 0.01):
        s = reg.mollify(vee, eps)
        errs.append(abs(float(s.hessian(x)[0, 0, 0]) - 2.0))
    assert errs[-1] <= 1e-6
    assert errs[0] >= errs[-1]


def test_mollify_renormalizes_origin(c21_cubic):
    s = reg.mollify(c21_cubic, 0.05)
    np.testing.assert_allclose(
        s.height(np.zeros(2)), c21_cubic.height(np.zeros(2)), atol=1e-12
    )


def test_mollify_errors(hemisphere, vee):
    with pytest.raises(DomainTooSmall):
        reg.mollify(vee, 0.9)  # eps beyond half the chart width
    with pytest.raises(DomainTooSmall):
        reg.mollify(hemisphere, 0.05)  # membership tighter than the box


# ---------------------------------------------------------------------------
# approximation sequences
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def c2alpha_sequence():
    surf = make_surface("c2alpha")
    return reg.approximation_sequence(surf, [0.1, 0.05, 0.025, 0.0125])


def test_sequence_monotone_convergence(c2alpha_sequence):
    seq = c2alpha_sequence
    assert all(s.regularity.tag == "smooth" for s in seq.smoothed)
    assert np.all(np.diff(seq.h_c1_dist) < 0)
    assert np.all(np.diff(seq.metric_c1_dist) < 0)
    assert np.all(np.diff(seq.pi_c0_dist) < 0)


def test_sequence_matches_base_at_origin(c2alpha_sequence):
    seq = c2alpha_sequence
    h0 = seq.base.height(np.zeros(2))
    for s in seq.smoothed:
        np.testing.assert_allclose(s.height(np.zeros(2)), h0, atol=1e-12)


def test_sequence_rejects_nondecreasing_scales(vee):
    with pytest.raises(ValueError):
        reg.approximation_sequence(vee, [0.05, 0.05])


def test_flow_convergence_flat(flat):
    seq = reg.approximation_sequence(flat, [0.1, 0.05])
    rng = np.random.default_rng(1)
    probes = reg.convergence_probes(seq, 5, rng)
    rep = reg.flow_convergence_report(seq, probes)
    assert max(rep.flow_c0) <= 1e-9
    assert max(rep.dflow_c0) <= 1e-8


def test_vee_uniform_pi_bound(vee):
    seq = reg.approximation_sequence(vee, [0.08, 0.04, 0.02])
    assert max(seq.pi_sup) <= 2.0 * vee.bounds.inflation


def test_flow_convergence_prunes_escaping_probes(c21_cubic):
    seq = reg.approximation_sequence(c21_cubic, [0.1, 0.05])
    rng = np.random.default_rng(8)
    probes = reg.convergence_probes(seq, 4, rng)
    # this one exits the level charts long before t
    probes.append((5.0, TangentVector([0.0, 0.0], [1.0, 0.0])))
    rep = reg.flow_convergence_report(seq, probes)
    assert rep.pruned_probes == [4]
    assert len(rep.flow_c0) == 1


# ---------------------------------------------------------------------------
# exponential a-priori bound
# ---------------------------------------------------------------------------


def test_gronwall_bound_values():
    assert reg.gronwall_bound(0.0, 3.0, 5.0) == 3.0
    assert reg.gronwall_bound(1.0, 1.0, 1.0) == pytest.approx(math.e, rel=1e-15)


def test_gronwall_dominance_hemisphere(hemisphere):
    rng = np.random.default_rng(12)
    for _ in range(50):
        x = random_chart_points(hemisphere, 1, rng, shrink=0.4)[0]
        y = rng.normal(size=2)
        y /= g_norm_batch(hemisphere, x, y)
        j0 = JacobiState(rng.normal(size=2), rng.normal(size=2))
        rep = reg.measure_gronwall_margin(hemisphere, TangentVector(x, y), j0, 0.35)
        assert rep["dominated"]


# ---------------------------------------------------------------------------
# modulus machinery
# ---------------------------------------------------------------------------


def test_osgood_gamma_formula():
    gamma = reg.osgood_gamma(reg.Modulus("Linear", coeff=1.0), 1.0, 1.0, 1.0)
    assert gamma(0.1) == pytest.approx(0.1 * math.e, rel=1e-15)


def test_osgood_gamma_zero_modulus():
    gamma = reg.osgood_gamma(reg.Modulus("Linear", coeff=0.0), 2.0, 3.0, 1.0)
    assert gamma(0.5) == 0.0


def test_osgood_gamma_power_form():
    gamma = reg.osgood_gamma(reg.Modulus("Power", coeff=2.0, alpha=0.5), 1.0, 0.0, 1.0)
    for d in (0.01, 0.04):
        assert gamma(d) == pytest.approx(2.0 * math.sqrt(d), rel=1e-14)


def test_osgood_integral_zero_l():
    holds, margin = reg.osgood_integral_check(
        np.linspace(0, 1, 5), np.zeros(5), 0.0, reg.Modulus("Linear", coeff=1.0)
    )
    assert holds


def test_osgood_integral_equality_case():
    # L(t) = a e^{C (t - t0)}, mu(s) = C s makes the inequality an identity
    c, a = 2.0, 0.1
    times = np.linspace(0.0, 1.0, 9)
    l_values = a * np.exp(c * times)
    holds, margin = reg.osgood_integral_check(
        times, l_values, a, reg.Modulus("Linear", coeff=c)
    )
    assert holds
    assert abs(margin) <= 1e-6


def test_osgood_integral_measured_chain(c21_cubic):
    # deviations of the joint state between two nearby base points stay
    # below the exponential envelope certified by the integral inequality
    gaps, coeff_dev, state_dev, c_tilde, c_bar = reg._modulus_probes(
        c21_cubic, 0.3, 4, [1e-3, 1e-2], seed=3
    )
    a_vals = c_tilde * 0.3 * coeff_dev
    for a, dev in zip(a_vals, state_dev):
        holds, margin = reg.osgood_integral_check(
            [0.0, 0.3], [0.0, dev], float(a), reg.Modulus("Linear", coeff=c_bar)
        )
        assert holds, (a, dev, margin)


def test_empirical_modulus_constant_map():
    mu = reg.empirical_modulus([(d, 0.0) for d in np.linspace(1e-4, 1, 20)])
    assert mu(0.5) == 0.0


def test_osgood_integral_with_empirical_modulus():
    gaps = np.logspace(-4, 0, 150)
    mu = reg.empirical_modulus(zip(gaps, 2.0 * gaps))
    times = np.linspace(0.0, 0.5, 4)
    l_values = 0.05 * np.exp(0.5 * times)  # well below the mu-envelope
    holds, margin = reg.osgood_integral_check(times, l_values, 0.05, mu)
    assert holds and margin >= 0.0


def test_empirical_modulus_identity_map():
    gaps = np.logspace(-5, 0, 200)
    mu = reg.empirical_modulus(zip(gaps, gaps))
    edges, values = mu.populated_bins()
    assert np.all(values <= edges + 1e-12)
    assert np.all(values >= np.concatenate([[0], edges[:-1]]) - 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=40))
def test_empirical_modulus_nondecreasing(gaps):
    rng = np.random.default_rng(0)
    samples = [(g, abs(math.sin(7 * g))) for g in gaps]
    mu = reg.empirical_modulus(samples)
    deltas = np.linspace(0, 1.2, 50)
    vals = mu(deltas)
    assert np.all(np.diff(vals) >= -1e-15)
    assert mu(0.0) == 0.0


def test_injradius_values():
    assert reg.injradius_lower_bound(1.0, 2 * math.pi) == pytest.approx(math.pi)
    assert reg.injradius_lower_bound(2.0, 10.0) == pytest.approx(math.pi / 2)
    assert reg.injradius_lower_bound(0.1, 1.0) == pytest.approx(0.5)


def test_holder_check_linear_map():
    gaps = np.logspace(-4, 0, 100)
    samples = list(zip(gaps, 3.0 * gaps))
    holds, _ = reg.holder_modulus_check(samples, 1.0, 3.5)
    assert holds
    holds, _ = reg.holder_modulus_check(samples, 1.0, 2.0)
    assert not holds


def test_holder_check_constant_map():
    samples = [(d, 0.0) for d in np.logspace(-3, 0, 30)]
    holds, _ = reg.holder_modulus_check(samples, 0.5, 0.0)
    assert holds


def test_modulus_dump_rows():
    mu = reg.empirical_modulus([(0.1, 0.2), (0.5, 0.3)])
    rows = mu.dump_rows()
    assert rows.shape[1] == 2
    assert np.all(np.diff(rows[:, 1]) >= 0)


def test_modulus_csv(tmp_path):
    from geoflow.serialize import write_modulus_csv

    mu = reg.Modulus("Power", coeff=2.0, alpha=0.5)
    path = tmp_path / "mu.csv"
    write_modulus_csv(path, mu)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "delta,mu"
    d, m = map(float, lines[-1].split(","))
    assert m == pytest.approx(2.0 * math.sqrt(d), rel=1e-12)


# ---------------------------------------------------------------------------
# dominance drivers (small desk-scale versions of the acceptance runs)
# ---------------------------------------------------------------------------


def test_lipschitz_flow_vee(vee):
    rep = reg.lipschitz_flow_report(vee, t_end=0.25, n_pairs=40, seed=5)
    assert rep["bounded"]
    assert rep["c_bar"] <= 2.2


def test_osgood_dominance_small(c21_cubic):
    rep = reg.osgood_dominance_report(c21_cubic, t1=0.25, n_centers=4, seed=9)
    assert rep["dominated"]
    assert np.all(rep["values"] <= rep["limits"] + 1e-12)


def test_holder_dominance_small(c2alpha):
    rep = reg.holder_dominance_report(c2alpha, 0.5, t1=0.25, n_centers=4, seed=13)
    assert rep["holds"]
