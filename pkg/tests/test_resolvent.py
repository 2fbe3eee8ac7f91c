import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ultraspec import oracle as O
from ultraspec import resolvent as R
from ultraspec.errors import (DivergenceError, EigenvalueHitError, PoleProximityError,
                              ValidationError)
from ultraspec.model_core import HierModel

from conftest import cached_eigs

# rank-one spectrum of L - 0.3 delta_0 for p = 2, alpha = 1 (checked below
# against the K = 10 truncation and frozen here)
RANK_ONE_ROOTS = [0.88470196, 0.42904186, 0.20805803, 0.10040352, 0.04811552, 0.02290186]
RANK_ONE_NEG = -0.01405594


def _correction(model, spec, lam):
    """Difference between the series and the truncated kernel, equal for all pairs in X_K."""
    mu = O.constant_mode(model, spec)
    r = np.arange(spec.K + 1, spec.K + 400, dtype=float)
    return -model.p ** -spec.K / (mu - lam) + np.sum(model.jump(r) / (model.lam(r) - lam))


def test_zero_diag_closed_form(lat05):
    v = R.diagonal_resolvent(lat05, 0, 0.0)
    assert abs(v - 1 / (2 - math.sqrt(2))) < 1e-12
    assert abs(R.resolvent_zero_diag(lat05) - 1 / (2 - math.sqrt(2))) < 1e-12
    assert abs(v - 1.7071067811865475) < 1e-12


def test_divergence_detected(lat1, field05):
    with pytest.raises(DivergenceError):
        R.diagonal_resolvent(lat1, 0, 0.0)
    with pytest.raises(DivergenceError):
        R.resolvent_zero_diag(lat1)
    with pytest.raises(DivergenceError):
        R.diagonal_resolvent(field05, 0, -1.0)


def test_pole_proximity(lat1):
    with pytest.raises(PoleProximityError):
        R.diagonal_resolvent(lat1, 0, 0.25)
    with pytest.raises(PoleProximityError):
        R.diagonal_resolvent(lat1, 0, 2.0 ** -30 * (1 + 1e-14))
    R.diagonal_resolvent(lat1, 0, 2.0 ** -30 * (1 + 1e-9))


def test_monotone_in_gap(lat1):
    vals = [R.diagonal_resolvent(lat1, 0, lam) for lam in (0.30, 0.35, 0.40)]
    assert vals[0] < vals[1] < vals[2]


def test_pole_series_matches_explicit_sum(lat05):
    s = R.pole_series(lat05, 1, 40)
    k = np.arange(1, 4000, dtype=float)
    for lam in (-1.0, 0.3, 0.77):
        assert math.isclose(s(lam), np.sum(lat05.jump(k) / (lat05.lam(k) - lam)), rel_tol=1e-13)


def test_offdiag_symmetry_and_decay(lat1, rng):
    for _ in range(30):
        a, b = (int(v) for v in rng.choice(5000, 2, replace=False))
        lam = float(rng.uniform(0.26, 0.49))
        assert R.resolvent_kernel(lat1, a, b, lam) == R.resolvent_kernel(lat1, b, a, lam)
    vals = [abs(R.offdiag_resolvent(lat1, 0, 2 ** j, 0.3)) for j in range(3, 20)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-4 * vals[0]


def test_site_matrix_matches_pairwise(lat1):
    cfg = R.SiteConfig(((0, 0.3), (37, 0.7), (200, 1.1)))
    for lam in (0.3, 0.07, -0.5):
        M = R.site_resolvent_matrix(lat1, cfg, lam)
        for i, a in enumerate(cfg.points):
            for j, b in enumerate(cfg.points):
                # off-diagonal entries are a difference of head and tail, so a few ulps of the larger term
                assert math.isclose(M[i, j], R.resolvent_kernel(lat1, a, b, lam), rel_tol=1e-12)


@pytest.mark.parametrize("lam", [0.3, 0.7, -0.2, 0.06])
def test_resolvent_against_truncation(lat1, lam):
    spec = O.TruncationSpec(8, "compression")
    G = O.truncated_resolvent(lat1, spec, lam)
    c = _correction(lat1, spec, lam)
    for x, y in ((0, 0), (0, 3), (5, 200), (17, 17)):
        a = R.resolvent_kernel(lat1, x, y, lam)
        assert abs(G[x, y] + c - a) < 1e-6 * abs(a)


def test_krein_identities(lat1):
    for lam in (0.3, 0.7, -0.2):
        r = R.diagonal_resolvent(lat1, 0, lam)
        rv = R.krein_resolvent(lat1, 0.3, 0, lam, 0, 0)
        assert abs(rv * (1 - 0.3 * r) - r) < 1e-12 * abs(r)
        assert R.krein_resolvent(lat1, 0.0, 0, lam, 3, 9) == R.resolvent_kernel(lat1, 3, 9, lam)
    root = R.secular_root_in_gap(lat1, 0.3, 2)
    assert abs(R.krein_resolvent(lat1, 0.3, 0, root, 0, 0)) > 1e8
    with pytest.raises(EigenvalueHitError):
        R._secular(0.5, 2.0)


@pytest.mark.parametrize("lam", [0.3, -0.2])
def test_krein_against_truncation(lat1, lam):
    """Perturbed dense solve = Krein on the truncation; Krein on corrected entries = series."""
    sigma, a = 0.3, 0
    spec = O.TruncationSpec(8, "compression")
    cfg = R.SiteConfig(((a, sigma),))
    G = O.truncated_resolvent(lat1, spec, lam)
    GV = O.truncated_resolvent(lat1, spec, lam, cfg)
    w = lat1.measure(0)
    krein_trunc = G + sigma * w * np.outer(G[:, a], G[a, :]) / (1 - sigma * w * G[a, a])
    assert np.allclose(GV, krein_trunc, rtol=1e-10, atol=1e-13)
    c = _correction(lat1, spec, lam)
    Gc = G + c
    for x, y in ((0, 0), (3, 100), (9, 9)):
        formula = Gc[x, y] + sigma * Gc[x, a] * Gc[a, y] / (1 - sigma * Gc[a, a])
        assert math.isclose(formula, R.krein_resolvent(lat1, sigma, a, lam, x, y), rel_tol=1e-11)


def test_rank_one_frozen(lat1):
    rep = R.rank_one_spectrum(lat1, 0.3, 0, 6)
    roots = [q.value for q in rep.select("gap-root")]
    assert np.allclose(roots, RANK_ONE_ROOTS, atol=1e-8)
    neg = rep.select("Xi-")
    assert len(neg) == 1 and abs(neg[0].value - RANK_ONE_NEG) < 1e-8
    assert not rep.meta["transient"]
    for k, r in enumerate(roots, start=1):
        assert lat1.lam(k + 1) < r < lat1.lam(k)
        assert abs(1 - 0.3 * R.diagonal_resolvent(lat1, 0, r)) < 1e-9


def test_rank_one_threshold(lat05):
    assert R.negative_root(lat05, 0.5) is None
    neg = R.negative_root(lat05, 0.7)
    assert neg is not None and neg < 0
    rep = R.rank_one_spectrum(lat05, 0.7, 0, 3)
    assert abs(rep.meta["sigma_threshold"] - (2 - math.sqrt(2))) < 1e-12
    eigs = cached_eigs(lat05, O.TruncationSpec(8, "compression"), R.SiteConfig(((0, 0.7),)))
    assert O.count_negative(eigs, 1e-8) == 1
    # the transient tail decays like (p kappa)^-K, so K = 8 is good to a few 1e-3
    assert abs(eigs[0] - neg) < 1e-2 * abs(neg)


def test_repulsive_site_root_above_top(lat1):
    rep = R.rank_one_spectrum(lat1, -0.5, 0, 3)
    top = [q for q in rep.select("gap-root") if q.gap == 0]
    assert len(top) == 1 and top[0].value > lat1.lam(1)
    assert not rep.select("Xi-")


def test_eigenfunction_nonvanishing(lat1):
    lam = R.secular_root_in_gap(lat1, 0.3, 3)
    vals = R.eigenfunction_values(lat1, lam, 0, [0, 1, 2, 5, 11, 100, 1000, 12345])
    assert np.all(np.abs(vals) > 0)


def test_finite_rank_one_site_reduces(lat1):
    cfg = R.SiteConfig(((0, 0.3),))
    for k in range(1, 7):
        r = R.finite_rank_gap_eigenvalues(lat1, cfg, k)
        assert len(r) == 1 and abs(r[0] - RANK_ONE_ROOTS[k - 1]) < 1e-8
    assert np.allclose(R.finite_rank_negative_eigenvalues(lat1, cfg), [RANK_ONE_NEG], atol=1e-8)


def test_finite_rank_two_distant_sites(lat1):
    cfg = R.SiteConfig(((0, 1.0), (1024, 2.0)))
    g = R.gershgorin_separation(lat1, cfg, 1)
    assert g.k_delta is not None and g.k_delta >= 5
    for k in range(1, g.k_delta + 1):
        assert len(R.finite_rank_gap_eigenvalues(lat1, cfg, k)) == 2


def test_inertia_and_scan_agree(lat1):
    cfg = R.SiteConfig(((0, 0.3), (37, 0.7), (200, 1.1)))
    for k in range(1, 7):
        a = R.finite_rank_gap_eigenvalues(lat1, cfg, k, method="inertia")
        b = R.finite_rank_gap_eigenvalues(lat1, cfg, k, method="scan")
        assert len(a) == len(b) and np.allclose(a, b, atol=1e-11)


def test_three_sites_against_K10(lat1):
    cfg = R.SiteConfig(((0, 0.3), (37, 0.7), (200, 1.1)))
    eigs = cached_eigs(lat1, O.TruncationSpec(10, "compression"), cfg)
    gaps = range(1, 7)
    analytic = [r for k in gaps for r in R.finite_rank_gap_eigenvalues(lat1, cfg, k)]
    analytic += R.finite_rank_negative_eigenvalues(lat1, cfg)
    rep = O.compare_spectra(analytic, eigs, O.gap_intervals(lat1, gaps), tol=1e-6,
                            neg_threshold=1e-10)
    assert rep.passed, rep.to_dict()


def test_gershgorin(lat1):
    same = R.SiteConfig(((0, 1.0), (1024, 1.0)))
    assert not R.gershgorin_separation(lat1, same, 1).disjoint
    eps = [R.gershgorin_separation(lat1, R.SiteConfig(((0, 1.0), (2 ** j, 2.0))), 1).epsilon
           for j in range(4, 15)]
    finite = [e for e in eps if math.isfinite(e)]
    assert all(b < a for a, b in zip(finite, finite[1:]))
    assert len(finite) >= 8


def test_site_config_validation(lat1):
    with pytest.raises(ValidationError):
        R.SiteConfig(((0, 1.0), (0, 2.0)))
    with pytest.raises(ValidationError):
        R.SiteConfig(((0, -1.0),))
    with pytest.raises(ValidationError):
        R.SiteConfig(())
    with pytest.raises(ValidationError):
        R.finite_rank_gap_eigenvalues(lat1, R.SiteConfig(((0, 1.0),)), 1, method="nope")


@given(st.lists(st.tuples(st.integers(0, 255), st.floats(0.1, 2.0)), min_size=1, max_size=4,
                unique_by=lambda t: t[0]),
       st.integers(1, 5))
def test_gap_roots_bounded_by_rank(sites, k):
    m = HierModel.lattice(2, 1.0)
    cfg = R.SiteConfig(tuple(sites))
    roots = R.finite_rank_gap_eigenvalues(m, cfg, k)
    assert len(roots) <= cfg.n
    for r in roots:
        assert m.lam(k + 1) < r < m.lam(k)
        # a zero eigenvalue of the secular matrix sits at every root
        ev = np.linalg.eigvalsh(R.secular_matrix(m, cfg, r))
        assert np.min(np.abs(ev)) < 1e-6 * np.max(1.0 / cfg.sigmas)


@given(st.floats(0.05, 3.0), st.floats(0.2, 0.95))
def test_secular_root_property(sigma, alpha):
    m = HierModel.lattice(2, alpha)
    for k in (1, 2, 4):
        r = R.secular_root_in_gap(m, sigma, k)
        assert m.lam(k + 1) < r < m.lam(k)
        assert abs(1 - sigma * R.diagonal_resolvent(m, 0, r)) < 1e-7
    neg = R.negative_root(m, sigma)
    assert (neg is not None) == (sigma * R.resolvent_zero_diag(m) > 1)
