"""Estimator tests.

Quadrature oracles are written first and guarded by frozen literals; the
Monte Carlo estimators are then checked against them at fixed seeds, so every
assertion here is deterministic.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from sqwlab import (
    ArcSet,
    DecayFit,
    DisorderSpec,
    MCEstimate,
    ZGrid,
    build_graph,
    check_fmec_bound,
    check_geometric_resolvent,
    decay_experiment,
    dynloc_experiment,
    gap_probability,
    make_family,
    mc_fractional_moment,
    mc_spectral_average,
    resolvent_smallness_check,
    sample_disorder,
)

TWO_PI = 2.0 * math.pi
UNIFORM = DisorderSpec("uniform")


def fracmom_pair_oracle(z, s):
    """E|<01|R(z)|10>|^s on the 2-vertex walk by scalar quadrature.

    The element is -e^{i om_0}/(z^2 - e^{i(om_0+om_1)}) and the phase sum is
    itself uniform, so the moment is the circle average of |z^2 - e^{ia}|^{-s}.
    """
    val, err = quad(lambda a: abs(z * z - np.exp(1j * a)) ** (-s), 0.0, TWO_PI, limit=400)
    assert err < 1e-6
    return val / TWO_PI


def gap_pair_oracle(r, eta):
    """P(dist(r, spectrum) <= eta) for a single localized pair.

    The two eigenangles together sweep the circle with flat density 1/pi, so
    the probability is the arc length of {|r - e^{i angle}| <= eta} over pi.
    """
    c = (r * r + 1.0 - eta * eta) / (2.0 * r)
    if c > 1.0:
        return 0.0
    return 2.0 * math.acos(max(-1.0, c)) / math.pi


def test_oracle_values_are_frozen():
    assert abs(fracmom_pair_oracle(0.5, 0.2) - 1.000637192466) < 1e-9
    assert abs(fracmom_pair_oracle(0.9, 0.2) - 1.008590694529) < 1e-7
    assert abs(fracmom_pair_oracle(1.1, 0.2) - 0.971344751907) < 1e-7
    assert abs(fracmom_pair_oracle(0.5, 0.5) - 1.004005115088) < 1e-9
    assert abs(fracmom_pair_oracle(0.9, 0.5) - 1.058737341431) < 1e-7
    assert abs(fracmom_pair_oracle(1.1, 0.5) - 0.965965744320) < 1e-7


# ------------------------------------------------------------------ building blocks

def test_zgrid_default_covers_annulus():
    grid = ZGrid()
    pts = grid.points()
    assert pts.size == 8 * 64
    assert np.isclose(np.abs(pts), np.repeat(ZGrid().radii, 64)).all()
    assert (np.abs(grid.disk_points()) < 1.0).all()
    assert grid.disk_points().size == 4 * 64


def test_zgrid_rejects_guard_band_and_junk():
    with pytest.raises(ValueError, match="guard band"):
        ZGrid(radii=(0.5, 1.0 + 5e-7))
    with pytest.raises(ValueError, match="positive"):
        ZGrid(radii=(0.5, -1.0))
    with pytest.raises(ValueError, match="angle"):
        ZGrid(angle_count=0)
    with pytest.raises(ValueError, match="radius"):
        ZGrid(radii=())


def test_mc_estimate_from_samples():
    est = MCEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert est.mean == 2.5
    assert est.n_samples == 4
    assert abs(est.std_error - np.std([1, 2, 3, 4], ddof=1) / 2.0) < 1e-15
    with pytest.raises(ValueError, match="2 samples"):
        MCEstimate.from_samples([1.0])


def test_decay_fit_recovers_exact_exponential():
    d = np.arange(1, 9)
    fit = DecayFit.fit(d, 0.7 * np.exp(-0.55 * d))
    assert abs(fit.rate - 0.55) < 1e-10
    assert abs(fit.prefactor - 0.7) < 1e-10
    assert abs(fit.r_squared - 1.0) < 1e-12
    assert fit.n_points == 8


def test_decay_fit_constant_data_has_zero_rate():
    fit = DecayFit.fit([1, 2, 3, 4], [0.3, 0.3, 0.3, 0.3])
    assert fit.rate == 0.0
    assert fit.r_squared == 1.0


def test_decay_fit_drops_noise_floor_points():
    d = np.arange(1, 7)
    means = 0.7 * np.exp(-0.55 * d)
    ses = np.zeros(6)
    means[5] = 1e-9
    ses[5] = 1e-9        # mean < 5 se: dropped
    fit = DecayFit.fit(d, means, ses)
    assert fit.n_points == 5
    assert fit.distance_max == 5
    assert abs(fit.rate - 0.55) < 1e-10


def test_decay_fit_rejects_degenerate_input():
    with pytest.raises(ValueError, match="nonnegative"):
        DecayFit.fit([1, 2], [0.5, -0.1])
    with pytest.raises(ValueError, match="usable points"):
        DecayFit.fit([1, 2], [0.0, 0.0])
    with pytest.raises(ValueError, match="distinct distances"):
        DecayFit.fit([2, 2], [0.5, 0.4])


# ------------------------------------------------------------------ fractional moments

def test_fracmom_matches_pair_quadrature():
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    for s in (0.2, 0.5):
        for z in (0.5, 0.9, 1.1):
            rep = mc_fractional_moment(g, fam, UNIFORM, (0, 1), (1, 0), s,
                                       [complex(z)], 10000, seed=7)
            est = rep.estimates[0]
            assert abs(est.mean - fracmom_pair_oracle(z, s)) < 3.0 * est.std_error


def test_fracmom_obeys_trivial_bound_off_circle():
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    rep = mc_fractional_moment(g, fam, UNIFORM, (0, 1), (1, 0), 0.2, [2.0], 4000, seed=3)
    # |<e|R f>| <= 1/(|z|-1), so the moment at z=2 stays below 1
    assert rep.estimates[0].mean <= 1.0
    assert abs(rep.estimates[0].mean - fracmom_pair_oracle(2.0, 0.2)) < 3.0 * rep.estimates[0].std_error


def test_fracmom_tiny_exponent_sits_near_one():
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    rep = mc_fractional_moment(g, fam, UNIFORM, (0, 1), (1, 0), 1e-6, [0.5], 2000, seed=5)
    assert abs(rep.estimates[0].mean - 1.0) < 1e-3


def test_fracmom_grid_sup_is_max_of_means():
    g = build_graph("cycle", size=8)
    fam = make_family(g, "haar", seed=2)
    grid = ZGrid(radii=(0.5, 1.5), angle_count=8)
    rep = mc_fractional_moment(g, fam, UNIFORM, (0, 1), (2, 1), 0.2, grid, 50, seed=9)
    means = np.array([est.mean for est in rep.estimates])
    assert rep.grid_sup == means.max()
    assert rep.grid_sup_z == rep.zs[int(np.argmax(means))]


def test_fracmom_validates_exponent_and_guard_band():
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        mc_fractional_moment(g, fam, UNIFORM, (0, 1), (1, 0), 1.2, [0.5], 10, seed=1)
    with pytest.raises(ValueError, match="guard band"):
        mc_fractional_moment(g, fam, UNIFORM, (0, 1), (1, 0), 0.2, [1.0 + 1e-8], 10, seed=1)


def test_fracmom_deterministic_and_schedule_independent():
    g = build_graph("cycle", size=8)
    fam = make_family(g, "haar", seed=2)
    reps = [mc_fractional_moment(g, fam, UNIFORM, (0, 1), (2, 1), 0.2, [0.5, 1.1],
                                 200, seed=11, threads=t) for t in (1, 1, 3)]
    for rep in reps[1:]:
        for a, b in zip(reps[0].estimates, rep.estimates):
            assert a.mean == b.mean and a.std_error == b.std_error


# ------------------------------------------------------------------ spectral averaging

def test_specavg_center_is_exactly_one():
    g = build_graph("cycle", size=8)
    fam = make_family(g, "haar", seed=4)
    rep = mc_spectral_average(g, fam, UNIFORM, (0, 1), 0.0, 20, seed=2)
    assert rep.estimate.mean == 1.0
    assert rep.estimate.std_error == 0.0


def test_specavg_pair_is_poisson_exact():
    # on the 2-vertex walk the single-phase average is a Poisson integral:
    # exactly 1 for every |z| < 1, whatever the other phase does.  The
    # quadrature error scales like |z|^(2 nodes), hence the node count.
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    for z in (0.3, 0.9, 0.5j, -0.99):
        rep = mc_spectral_average(g, fam, UNIFORM, (0, 1), z, 40, seed=8, quad_nodes=2048)
        assert abs(rep.estimate.mean - 1.0) < 1e-11
        assert rep.estimate.std_error < 1e-12


def test_specavg_integrand_stays_nonnegative():
    g = build_graph("cycle", size=8)
    fam = make_family(g, "haar", seed=4)
    rep = mc_spectral_average(g, fam, UNIFORM, (3, 2), 0.7j, 60, seed=6)
    assert rep.min_integrand >= -1e-12
    assert rep.estimate.mean > 0.0


def test_specavg_table_density_rounds_nodes_up():
    v = np.array([1.5, 0.5, 1.5, 0.5])
    v = v / (v.sum() * TWO_PI / 4)
    mu = DisorderSpec("table", values=v)
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    rep = mc_spectral_average(g, fam, mu, (0, 1), 0.0, 10, seed=1, quad_nodes=66)
    assert rep.quad_nodes == 68        # next multiple of 4
    assert abs(rep.estimate.mean - 1.0) < 1e-12


def test_specavg_rejects_bad_input():
    g = build_graph("path", size=2)
    fam = make_family(g, "identity")
    with pytest.raises(ValueError, match=r"\|z\| < 1"):
        mc_spectral_average(g, fam, UNIFORM, (0, 1), 1.2, 10, seed=1)
    with pytest.raises(ValueError, match="bounded phase density"):
        mc_spectral_average(g, fam, DisorderSpec("point-mass", theta0=0.3), (0, 1), 0.5, 10, seed=1)
    with pytest.raises(ValueError, match="64"):
        mc_spectral_average(g, fam, UNIFORM, (0, 1), 0.5, 10, seed=1, quad_nodes=16)


def test_specavg_deterministic_and_schedule_independent():
    g = build_graph("cycle", size=8)
    fam = make_family(g, "haar", seed=4)
    reps = [mc_spectral_average(g, fam, UNIFORM, (0, 1), 0.6, 40, seed=13, threads=t)
            for t in (1, 1, 2)]
    assert reps[0].estimate == reps[1].estimate == reps[2].estimate


# ------------------------------------------------------------------ gap probabilities

def test_gap_single_pair_matches_arc_oracle():
    g = build_graph("path", size=2)
    rep = gap_probability(g, UNIFORM, 0, 1, complex(1.01), 0.03, 10000, seed=21)
    oracle = gap_pair_oracle(1.01, 0.03)
    assert rep.pair_count == 1
    assert abs(rep.estimate.mean - oracle) < 3.5 * max(rep.estimate.std_error, 1e-4)


def test_gap_far_point_never_trips():
    g = build_graph("cycle", size=16)
    rep = gap_probability(g, UNIFORM, 0, 4, complex(0.5), 0.003, 2000, seed=2)
    assert rep.estimate.mean == 0.0


def test_gap_bound_arithmetic_and_ball():
    g = build_graph("cycle", size=16)
    rep = gap_probability(g, UNIFORM, 0, 4, complex(0.99), 0.01, 100, seed=1)
    assert rep.ball_size == 9
    # uniform density: 4 pi^2 tau^2 = 1, leaving degree * ball * eta
    assert abs(rep.bound - 2 * 9 * 0.01) < 1e-12
    assert rep.bound_applicable
    v = np.array([1.5, 0.5, 1.5, 0.5])
    v = v / (v.sum() * TWO_PI / 4)
    mu = DisorderSpec("table", values=v)
    rep = gap_probability(g, mu, 0, 4, complex(0.99), 0.01, 100, seed=1)
    assert abs(rep.bound - 4 * math.pi ** 2 * v.max() ** 2 * 2 * 9 * 0.01) < 1e-12


def test_gap_estimate_respects_bound_on_grid():
    for kind, params, radius in (("cycle", {"size": 16}, 4), ("tree", {"branching": 2, "depth": 4}, 2)):
        g = build_graph(kind, **params)
        for eta in (0.003, 0.01, 0.03):
            for z in (complex(0.99), complex(1.01), 1.01j):
                rep = gap_probability(g, UNIFORM, 0, radius, z, eta, 2000, seed=5)
                assert rep.estimate.mean <= rep.bound + 3.0 * rep.estimate.std_error


def test_gap_point_mass_bound_not_applicable():
    g = build_graph("path", size=2)
    mu = DisorderSpec("point-mass", theta0=1.0)
    rep = gap_probability(g, mu, 0, 1, complex(1.01), 0.03, 100, seed=3)
    assert math.isinf(rep.bound)
    assert not rep.bound_applicable


def test_gap_eta_at_least_one_flagged():
    g = build_graph("path", size=2)
    # every pair has an eigenvalue within sqrt(1.5^2 + 1) < 2 of z = 1.5
    rep = gap_probability(g, UNIFORM, 0, 1, complex(1.5), 2.0, 100, seed=3)
    assert rep.estimate.mean == 1.0
    assert not rep.bound_applicable


def test_gap_validates_input():
    g = build_graph("path", size=2)
    with pytest.raises(ValueError, match="eta"):
        gap_probability(g, UNIFORM, 0, 1, complex(1.01), 0.0, 100, seed=3)
    with pytest.raises(ValueError, match="guard band"):
        gap_probability(g, UNIFORM, 0, 1, complex(1.0 + 1e-8), 0.01, 100, seed=3)


def test_gap_deterministic_and_schedule_independent():
    g = build_graph("cycle", size=16)
    reps = [gap_probability(g, UNIFORM, 0, 4, complex(0.99), 0.03, 5000, seed=17, threads=t)
            for t in (1, 1, 4)]
    assert reps[0].estimate == reps[1].estimate == reps[2].estimate


# ------------------------------------------------------------------ geometric identity

def test_geometric_identity_haar_cycle():
    g = build_graph("cycle", size=24)
    fam = make_family(g, "haar", seed=5)
    om = sample_disorder(g, UNIFORM, 1, (90, 0))
    rep = check_geometric_resolvent(g, fam, om, complex(1.01), 4)
    assert rep.residual < 1e-9
    assert rep.invariance_leak == 0.0
    assert rep.screened_leak == 0.0
    assert rep.spectral_distance > 1e-3


def test_geometric_identity_torus():
    g = build_graph("torus_grid", rows=5, cols=5)
    fam = make_family(g, "haar", seed=8)
    om = sample_disorder(g, UNIFORM, 2, (91, 0))
    rep = check_geometric_resolvent(g, fam, om, complex(0.9), 2)
    assert rep.residual < 1e-9
    assert rep.invariance_leak == 0.0
    assert rep.screened_leak == 0.0


def test_geometric_identity_trivial_for_identity_family():
    g = build_graph("cycle", size=24)
    fam = make_family(g, "identity")
    om = sample_disorder(g, UNIFORM, 1, (92, 0))
    rep = check_geometric_resolvent(g, fam, om, complex(1.1), 4)
    # reflection changes nothing, every boundary term is literally zero
    assert rep.residual == 0.0
    assert rep.invariance_leak == 0.0


def test_geometric_identity_guard_band():
    g = build_graph("cycle", size=24)
    fam = make_family(g, "haar", seed=5)
    om = np.zeros(24)
    with pytest.raises(ValueError, match="guard band"):
        check_geometric_resolvent(g, fam, om, complex(1.0 + 1e-8), 4)


# ------------------------------------------------------------------ correlator vs moments

def test_fmec_bound_holds_on_haar_cycle():
    g = build_graph("cycle", size=16)
    fam = make_family(g, "haar", seed=3)
    arcs = ArcSet([(0.2, 1.5)])
    rep = check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (1, 0), arcs,
                           s=0.3, beta=0.2, n_samples=120, seed=12, proxy_samples=8)
    assert not rep.violation
    assert rep.lhs.mean <= rep.rhs + 3.0 * math.hypot(rep.lhs.std_error, rep.rhs_stderr)
    assert rep.cw_proxy > 0.0
    assert rep.coupling_total > 0.0


def test_fmec_identity_family_has_both_sides_zero():
    g = build_graph("cycle", size=16)
    fam = make_family(g, "identity")
    arcs = ArcSet([(0.2, 1.5)])
    rep = check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (1, 0), arcs,
                           s=0.3, beta=0.2, n_samples=12, seed=12, proxy_samples=3)
    assert rep.lhs.mean == 0.0
    assert rep.rhs == 0.0
    assert not rep.violation


def test_fmec_validates_exponents_and_geometry():
    g = build_graph("cycle", size=16)
    fam = make_family(g, "haar", seed=3)
    arcs = ArcSet([(0.2, 1.5)])
    kw = dict(n_samples=8, seed=1, proxy_samples=2)
    with pytest.raises(ValueError, match=r"\(0, s\)"):
        check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (1, 0), arcs, 0.3, 0.4, **kw)
    with pytest.raises(ValueError, match="beta"):
        check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (1, 0), arcs, 0.5, 0.4, **kw)
    with pytest.raises(ValueError, match="inside the ball"):
        check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (8, 7), arcs, 0.3, 0.2, **kw)
    with pytest.raises(ValueError, match="outside the ball"):
        check_fmec_bound(g, fam, UNIFORM, 0, 2, (1, 2), (1, 0), arcs, 0.3, 0.2, **kw)
    with pytest.raises(ValueError, match="source of e"):
        check_fmec_bound(g, fam, UNIFORM, 0, 2, (2, 3), (1, 0), arcs, 0.3, 0.2, **kw)
    with pytest.raises(ValueError, match="delta grid"):
        check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (1, 0), arcs, 0.3, 0.2,
                         delta_grid=(0.9, 1.2), **kw)
    with pytest.raises(ValueError, match="bounded phase density"):
        check_fmec_bound(g, fam, DisorderSpec("point-mass", theta0=0.2), 0, 2,
                         (8, 7), (1, 0), arcs, 0.3, 0.2, **kw)


def test_fmec_deterministic():
    g = build_graph("cycle", size=16)
    fam = make_family(g, "haar", seed=3)
    arcs = ArcSet([(0.2, 1.5)])
    reps = [check_fmec_bound(g, fam, UNIFORM, 0, 2, (8, 7), (1, 0), arcs,
                             0.3, 0.2, n_samples=30, seed=12, proxy_samples=3, threads=t)
            for t in (1, 2)]
    assert reps[0].lhs == reps[1].lhs
    assert reps[0].rhs == reps[1].rhs
    assert reps[0].cw_proxy == reps[1].cw_proxy


# ------------------------------------------------------------------ decay experiments

def test_decay_rates_positive_and_monotone_in_strength():
    g = build_graph("cycle", size=24)
    rep = decay_experiment(g, UNIFORM, (0, 23), 0.2, complex(1.01), [0.2, 0.1],
                           200, seed=4, family_seed=9)
    g_by_phi = {c.strength: c.fit for c in rep.curves}
    assert g_by_phi[0.2].rate > 0.0
    assert g_by_phi[0.1].rate > 0.0
    assert g_by_phi[0.2].r_squared > 0.9
    # weaker deviation localizes harder
    assert g_by_phi[0.1].rate >= g_by_phi[0.2].rate - math.hypot(
        g_by_phi[0.1].g_stderr, g_by_phi[0.2].g_stderr)


def test_decay_validates_exponent_range():
    g = build_graph("cycle", size=24)
    with pytest.raises(ValueError, match="s must be < 1/3"):
        decay_experiment(g, UNIFORM, (0, 23), 0.5, complex(1.01), [0.2], 10, seed=1, family_seed=1)


def test_decay_needs_enough_distances():
    g = build_graph("path", size=4)
    with pytest.raises(ValueError, match="4 distinct distances"):
        decay_experiment(g, UNIFORM, (1, 0), 0.2, complex(1.01), [0.2], 10, seed=1, family_seed=1)


def test_decay_guard_band():
    g = build_graph("cycle", size=24)
    with pytest.raises(ValueError, match="guard band"):
        decay_experiment(g, UNIFORM, (0, 23), 0.2, complex(1.0), [0.2], 10, seed=1, family_seed=1)


def test_decay_deterministic_and_schedule_independent():
    g = build_graph("cycle", size=12)
    reps = [decay_experiment(g, UNIFORM, (0, 11), 0.2, complex(1.1), [0.2], 60,
                             seed=3, family_seed=9, threads=t) for t in (1, 2)]
    for a, b in zip(reps[0].curves[0].estimates, reps[1].curves[0].estimates):
        assert a == b
    assert reps[0].curves[0].fit == reps[1].curves[0].fit


# ------------------------------------------------------------------ dynamical localization

def test_dynloc_probe_decays_under_envelope():
    g = build_graph("cycle", size=24)
    rep = dynloc_experiment(g, UNIFORM, (0, 23), ArcSet.full(), 200, [0.2], 120,
                            seed=4, family_seed=9)
    c = rep.curves[0]
    assert c.envelope_margin <= 1e-10
    assert c.fit is not None and c.fit.rate > 0.0
    for probe, ec in zip(c.probe_estimates, c.ec_estimates):
        assert probe.mean <= ec.mean + 1e-10


def test_dynloc_identity_blocks_are_silent():
    g = build_graph("cycle", size=8)
    rep = dynloc_experiment(g, UNIFORM, (0, 7), ArcSet.full(), 50, [0.0], 10,
                            seed=2, family_seed=1)
    c = rep.curves[0]
    for dist, probe in zip(c.distances, c.probe_estimates):
        if dist >= 2:
            assert probe.mean == 0.0
    assert c.fit is None
    assert c.envelope_margin <= 1e-10


def test_dynloc_validates_horizon():
    g = build_graph("cycle", size=8)
    with pytest.raises(ValueError, match="horizon"):
        dynloc_experiment(g, UNIFORM, (0, 7), ArcSet.full(), 0, [0.1], 10, seed=1, family_seed=1)


def test_dynloc_deterministic():
    g = build_graph("cycle", size=12)
    reps = [dynloc_experiment(g, UNIFORM, (0, 11), ArcSet.full(), 100, [0.2], 30,
                              seed=6, family_seed=2, threads=t) for t in (1, 2)]
    for a, b in zip(reps[0].curves[0].probe_estimates, reps[1].curves[0].probe_estimates):
        assert a == b


# ------------------------------------------------------------------ smallness scaling

def _smallness(g, fam, radius, calibration=None, n=300):
    return resolvent_smallness_check(g, fam, UNIFORM, 0, radius, (0, 1), (2, 1),
                                     0.2, 3.0, complex(0.9), n, seed=6,
                                     calibration=calibration)


def test_smallness_scaling_across_radius_and_strength():
    g = build_graph("cycle", size=24)
    phi = 4e-4
    fam = make_family(g, "near-identity", strength=phi, seed=2)
    half = make_family(g, "near-identity", strength=phi / 2, seed=2)
    cal = _smallness(g, fam, 3)
    assert cal.calibrated_here
    assert cal.cap == cal.estimate.mean
    # same constant must survive a bigger ball and a halved deviation
    bigger = _smallness(g, fam, 5, calibration=cal.calibration)
    smaller = _smallness(g, half, 5, calibration=cal.calibration)
    assert bigger.estimate.mean <= bigger.cap + 3.0 * bigger.estimate.std_error
    # halving the deviation contracts the moment by at least the predicted rate over 1.5
    ratio = bigger.estimate.mean / smaller.estimate.mean
    assert ratio >= 2.0 ** cal.exponent / 1.5


def test_smallness_identity_family_is_exactly_zero():
    g = build_graph("cycle", size=24)
    rep = _smallness(g, make_family(g, "identity"), 3, n=20)
    assert rep.strength == 0.0
    assert rep.estimate.mean == 0.0


def test_smallness_enforces_hypotheses():
    g = build_graph("cycle", size=24)
    fat = make_family(g, "near-identity", strength=0.05, seed=2)
    with pytest.raises(ValueError, match="smallness threshold"):
        _smallness(g, fat, 3, n=10)
    fam = make_family(g, "near-identity", strength=4e-4, seed=2)
    with pytest.raises(ValueError, match="neither equal nor reversed"):
        resolvent_smallness_check(g, fam, UNIFORM, 0, 3, (0, 1), (1, 0), 0.2, 3.0,
                                  complex(0.9), 10, seed=1)
    with pytest.raises(ValueError, match=r"p > 1/\(1-s\)"):
        resolvent_smallness_check(g, fam, UNIFORM, 0, 3, (0, 1), (2, 1), 0.2, 1.0,
                                  complex(0.9), 10, seed=1)
    with pytest.raises(ValueError, match="inside the ball"):
        resolvent_smallness_check(g, fam, UNIFORM, 0, 2, (0, 1), (5, 4), 0.2, 3.0,
                                  complex(0.9), 10, seed=1)


def test_smallness_cap_violation_raises():
    g = build_graph("cycle", size=24)
    fam = make_family(g, "near-identity", strength=4e-4, seed=2)
    with pytest.raises(RuntimeError, match="smallness cap"):
        _smallness(g, fam, 3, calibration=1e-12, n=20)
