import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from ultraspec import kernels as Kr
from ultraspec import neg_counter as N
from ultraspec import oracle as O
from ultraspec.errors import DivergenceError, ValidationError
from ultraspec.model_core import BallRef, HierModel


def test_k_star_examples(field05):
    assert N.k_star(field05, 4.0) == 3
    assert N.k_star(HierModel.padic(2, 1.0), 2.0) == 0
    assert N.k_star(field05, 1.0) is None  # below lambda(Z_p) = sqrt 2


def test_exact_count_examples(field05):
    B0 = BallRef(field05, 0, 0)
    assert N.neg_count_Lminus_exact(field05, B0, 4.0) == 7
    assert N.neg_count_Lminus_exact(field05, B0, 1.0) == 0
    levels = N.lminus_levels(field05, B0, 4.0)
    assert [m for _, m, _ in levels] == [1, 2, 4]
    prod = N.forward_degree_product(field05, B0, 4.0)
    assert prod == 8 and 0.5 * prod < 7 < 1.5 * prod


def test_exact_count_against_block(field05):
    """Eigenvalues of the zero-mean block of B0 in the truncation, counted below 0."""
    for sigma in (2.0, 3.0, 4.0, 6.0):
        pot = N.single_well(field05, 0, sigma)
        r = O.padic_resolution_for(field05, sigma, 0)
        spec = O.TruncationSpec(r + 8, "compression", r)
        H = O.build_H(field05, spec, pot)
        idx = O.ball_indices(field05, spec, BallRef(field05, 0, 0))
        block = O.restricted_block(H, O.zero_mean_basis(idx, H.shape[0]))
        ev = np.linalg.eigvalsh(block)
        exact = N.neg_count_Lminus_exact(field05, BallRef(field05, 0, 0), sigma)
        assert O.count_negative(ev, 1e-10) == exact
        # levels are exactly lambda(r) - sigma
        for rank, mult, val in N.lminus_levels(field05, BallRef(field05, 0, 0), sigma):
            assert np.sum(np.abs(ev - val) < 1e-9) == mult


def test_omega_regions():
    r = N.omega_region(2, 0.5, 0.5)
    assert r["region"] == "Omega1" and r["neg"] == 0
    r = N.omega_region(2, 0.5, 1.0)
    assert r["region"] == "Omega2" and r["neg"] == 1
    r = N.omega_region(2, 0.5, 4.0)
    assert r["region"] == "Omega3" and r["neg"] == [4, 24]
    edge = N.omega_region(2, 0.5, math.sqrt(2))
    assert edge["boundary"] and edge["region"] is None
    assert edge["verbatim_region"] == "Omega2" and edge["verbatim_neg"] == 1
    edge = N.omega_region(2, 0.5, 2 - math.sqrt(2))
    assert edge["boundary"] and edge["verbatim_region"] == "Omega1"
    with pytest.raises(ValidationError):
        N.omega_region(2, 0.5, -1.0)


def test_molchanov_vainberg_constant():
    assert abs(N.molchanov_vainberg_c(0.0) - 1.0) < 1e-10
    grid = np.linspace(0.0, 10.0, 41)
    c = np.array([N.molchanov_vainberg_c(s) for s in grid])
    assert np.all(np.diff(c) < 0)
    # closed form e^{-s} - s E_1(s)
    for s in grid[1:]:
        assert math.isclose(N.molchanov_vainberg_c(s), math.exp(-s) - s * special.exp1(s),
                            rel_tol=1e-9)


def test_time_integrated_diag(lat05):
    for tau in (0.1, 1.0, 7.0):
        ref, _ = integrate.quad(lambda t: Kr.heat_kernel_diag(lat05, t), tau, np.inf,
                                limit=400, epsrel=1e-10)
        assert math.isclose(N.time_integrated_diag(lat05, tau), ref, rel_tol=1e-6)
    with pytest.raises(DivergenceError):
        N.time_integrated_diag(HierModel.lattice(2, 1.0), 1.0)


def test_bounds_single_ball_match_omega(field05):
    b = N.neg_bounds_general(field05, N.single_well(field05, 0, 4.0))
    assert b["lower"] == 4.0 and b["upper"] == 24.0
    assert b["clr"] >= 8
    assert N.neg_bounds_general(field05, N.BallPotential(())) == {"lower": 0.0, "upper": 0.0,
                                                                 "clr": 0.0}


def test_two_wells_bracket_oracle(field05):
    pot = N.BallPotential(((BallRef(field05, 0, 0), 4.0), (BallRef(field05, 5, 0), 3.0)))
    r = O.padic_resolution_for(field05, 4.0, 0)
    spec = O.TruncationSpec(r + 9, "compression", r)
    eigs = np.linalg.eigvalsh(O.build_H(field05, spec, pot))
    n = O.count_negative(eigs, 1e-10)
    b = N.neg_bounds_general(field05, pot)
    assert b["lower"] <= n <= b["upper"] and n <= b["clr"]
    exact = sum(N.neg_count_Lminus_exact(field05, bb, s) for bb, s in pot.balls)
    assert exact <= n <= exact + 2


def test_ball_potential_validation(field05):
    with pytest.raises(ValidationError):
        N.BallPotential(((BallRef(field05, 0, 1), 1.0), (BallRef(field05, 1, 0), 1.0)))
    with pytest.raises(ValidationError):
        N.BallPotential(((BallRef(field05, 0, 0), -1.0),))


@given(st.floats(0.2, 1.8), st.floats(0.05, 50.0), st.integers(-3, 3), st.integers(2, 4))
def test_count_vs_degree_product(alpha, sigma, rank, p):
    m = HierModel.padic(p, alpha)
    B0 = BallRef(m, 0, rank)
    n = N.neg_count_Lminus_exact(m, B0, sigma)
    assert n + 1 == N.forward_degree_product(m, B0, sigma)
    ks = N.k_star(m, sigma, rank)
    if ks is None:
        assert n == 0
    else:
        # levels with lambda(r) < sigma are those of k_star, minus a tie
        tie = math.isclose(m.lam(rank - ks), sigma, rel_tol=1e-12)
        assert n == p ** (ks + (0 if tie else 1)) - 1


@given(st.floats(0.1, 0.95), st.floats(0.01, 20.0))
def test_omega_partition(alpha, sigma):
    t1, t2 = N.omega_thresholds(2, alpha)
    r = N.omega_region(2, alpha, sigma)
    if r["boundary"]:
        return
    expect = "Omega1" if sigma <= t1 else "Omega2" if sigma <= t2 else "Omega3"
    assert r["region"] == expect
    if expect == "Omega3":
        lo, hi = r["neg"]
        assert lo <= hi
