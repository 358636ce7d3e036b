import math

import numpy as np
import pytest

from ssblab.lattice import Lattice, Region
from ssblab.algebra import (
    PAULI_X, PAULI_Z, ID2, GlobalOperator, LocalOperator,
    single_site, total_spin, op_norm, identity,
)
from ssblab.generators import (
    heat_bath_ising, ising_hamiltonian, heisenberg_hamiltonian,
    davies_generator, restrict, apply_heisenberg, Liouvillian,
    LocalLindbladTerm,
)
from ssblab.states import (
    gibbs, tilted_pair, spin_order_parameters, raising_operator,
    fluctuation_ratio, StateFunctional,
)
from ssblab.defects import (
    leibniz_defect, metastability_defect, reversibility_defect,
    kt_reversibility_defect, koma_lemma_check, DefectSeries, fit_exponent,
)


def test_leibniz_defect_identity_argument():
    lat = Lattice(1, 4)
    liouv = heat_bath_ising(lat, beta=1.0)
    rng = np.random.default_rng(0)
    X = GlobalOperator(lat, rng.normal(size=(16, 16)))
    assert op_norm(leibniz_defect(liouv, identity(lat), X)) < 1e-12


def test_leibniz_defect_hamiltonian_generator_vanishes():
    lat = Lattice(1, 3)
    term = LocalLindbladTerm(center=0, support=Region(lat, [0]),
                             hamiltonian=LocalOperator(Region(lat, [0]),
                                                       PAULI_X))
    liouv = Liouvillian(lat, [term], range_=0)
    rng = np.random.default_rng(1)
    X = GlobalOperator(lat, rng.normal(size=(8, 8)))
    Y = GlobalOperator(lat, rng.normal(size=(8, 8)))
    assert op_norm(leibniz_defect(liouv, X, Y)) < 1e-12


def test_leibniz_restriction_identity():
    lat = Lattice(1, 6)
    liouv = heat_bath_ising(lat, beta=1.0)
    A = single_site(lat, 0, PAULI_X)
    sub = restrict(liouv, Region(lat, [0]).enlarge(1))
    rng = np.random.default_rng(2)
    X = GlobalOperator(lat, rng.normal(size=(64, 64)))
    d = leibniz_defect(liouv, X, A) - leibniz_defect(sub, X, A)
    assert op_norm(d) < 1e-12


def test_leibniz_additive_in_generator():
    lat = Lattice(1, 4)
    liouv = heat_bath_ising(lat, beta=1.0)
    first = Liouvillian(lat, liouv.terms[:2], range_=1)
    second = Liouvillian(lat, liouv.terms[2:], range_=1)
    rng = np.random.default_rng(3)
    X = GlobalOperator(lat, rng.normal(size=(16, 16)))
    Y = GlobalOperator(lat, rng.normal(size=(16, 16)))
    total = leibniz_defect(liouv, X, Y)
    split = leibniz_defect(first, X, Y) + leibniz_defect(second, X, Y)
    assert op_norm(total - split) < 1e-12


def test_charge_sandwich_identity():
    lat = Lattice(1, 4)
    w = gibbs(ising_hamiltonian(lat), 1.0)
    sz = total_spin(lat, "z")
    rng = np.random.default_rng(4)
    A = single_site(lat, 0, rng.normal(size=(2, 2)))
    from ssblab.algebra import commutator
    lhs = w.expect(sz @ A @ sz)
    rhs = w.expect(sz @ commutator(A, sz)) + w.expect(sz @ sz @ A)
    assert abs(lhs - rhs) < 1e-12


def test_metastability_steady_state():
    lat = Lattice(1, 4)
    liouv = heat_bath_ising(lat, beta=1.0)
    w = gibbs(ising_hamiltonian(lat), 1.0)
    for site, m in ((0, PAULI_X), (1, PAULI_Z)):
        assert metastability_defect(w, liouv, single_site(lat, site, m)) \
            <= 1e-10


def test_metastability_polarized_state_not_metastable():
    # all-up under the infinite-temperature bath decays at rate 1 per site
    for L in (4, 6):
        lat = Lattice(1, L)
        liouv = heat_bath_ising(lat, beta=0.0)
        d = np.zeros(2**L)
        d[0] = 1.0
        allup = StateFunctional(lat, diagonal=d)
        defect = metastability_defect(allup, liouv,
                                      single_site(lat, 0, PAULI_Z))
        assert defect > 0.1
        assert np.isclose(defect, 1.0)


def test_reversibility_reduces_to_metastability_for_identity_probe():
    lat = Lattice(1, 4)
    liouv = heat_bath_ising(lat, beta=math.inf)
    plus, _ = tilted_pair(gibbs(ising_hamiltonian(lat), math.inf),
                          total_spin(lat, "z"))
    A = single_site(lat, 0, PAULI_X)
    r = reversibility_defect(plus, liouv, A, identity(lat))
    m = metastability_defect(plus, liouv, A)
    assert np.isclose(r, m, atol=1e-12)


def test_reversibility_of_gibbs():
    lat = Lattice(1, 4)
    liouv = heat_bath_ising(lat, beta=0.5)
    w = gibbs(ising_hamiltonian(lat), 0.5)
    A = single_site(lat, 0, PAULI_X)
    B = single_site(lat, 1, PAULI_Z)
    assert reversibility_defect(w, liouv, A, B) <= 1e-10


def test_kt_reversibility_m0_reduces_to_plain_defect():
    lat = Lattice(1, 4)
    H = heisenberg_hamiltonian(lat)
    coup = [single_site(lat, x, PAULI_X) for x in lat.sites()]
    liouv = davies_generator(H, coup, 2.0)
    w = gibbs(H, 2.0)
    Op = raising_operator(spin_order_parameters(lat))
    A = single_site(lat, 0, (ID2 + PAULI_Z) / 2)
    B = single_site(lat, 1, (ID2 + PAULI_X) / 2)
    d0 = kt_reversibility_defect(w, liouv, Op, 0, 0, A, B)
    plain = reversibility_defect(w, liouv, A, B, normalize=False)
    assert np.isclose(d0, plain, atol=1e-12)


def test_kt_reversibility_identity_probes_vanish():
    lat = Lattice(1, 4)
    H = heisenberg_hamiltonian(lat)
    coup = [single_site(lat, x, PAULI_X) for x in lat.sites()]
    liouv = davies_generator(H, coup, math.inf)
    w = gibbs(H, math.inf)
    Op = raising_operator(spin_order_parameters(lat))
    one = identity(lat)
    assert kt_reversibility_defect(w, liouv, Op, 1, 1, one, one) < 1e-12


def test_koma_lemma_n8():
    lat = Lattice(1, 8)
    w = gibbs(heisenberg_hamiltonian(lat), math.inf)
    pair = spin_order_parameters(lat)
    Op = raising_operator(pair)
    mu = fluctuation_ratio(w, pair.O1)
    probe = single_site(lat, 0, (ID2 + PAULI_Z) / 2)
    rep = koma_lemma_check(w, Op, Region(lat, [0]), M=1, mu=mu, o=0.5,
                           probe=probe)
    assert rep.all_inequalities_hold()
    assert all(a > 0 for a in rep.a_values)


def test_koma_lemma_k0_ratio_trivial():
    lat = Lattice(1, 6)
    w = gibbs(heisenberg_hamiltonian(lat), math.inf)
    pair = spin_order_parameters(lat)
    Op = raising_operator(pair)
    mu = fluctuation_ratio(w, pair.O1)
    rep = koma_lemma_check(w, Op, Region(lat, [0]), M=0, mu=mu, o=0.5)
    assert rep.r_ok


def test_koma_a1_lower_bound_chain():
    # a_1 >= 2 o^2 mu^2 N^2 (1 - (1+|A|)/(mu^2 N))
    lat = Lattice(1, 8)
    w = gibbs(heisenberg_hamiltonian(lat), math.inf)
    pair = spin_order_parameters(lat)
    Op = raising_operator(pair)
    mu = fluctuation_ratio(w, pair.O1)
    rep = koma_lemma_check(w, Op, Region(lat, [0]), M=1, mu=mu, o=0.5)
    n = 8
    bound = 2 * 0.25 * mu**2 * n**2 * (1 - (1 + 1) / (mu**2 * n))
    assert rep.a_values[1] >= bound - 1e-10


def test_fit_exponent_synthetic():
    s1 = DefectSeries("one-over-n")
    s2 = DefectSeries("one-over-n-squared")
    for n in (4, 6, 8, 10, 12):
        s1.add(n, n, 7.0 / n)
        s2.add(n, n, 3.0 / n**2)
    slope1, err1, _ = fit_exponent(s1)
    slope2, _, _ = fit_exponent(s2)
    assert abs(slope1 + 1.0) < 0.01 and err1 < 0.01
    assert abs(slope2 + 2.0) < 0.01


def test_fit_exponent_needs_three_positive_entries():
    s = DefectSeries("degenerate")
    s.add(4, 4, 0.0)
    s.add(6, 6, 0.0)
    s.add(8, 8, 1e-3)
    with pytest.raises(ValueError):
        fit_exponent(s)


def test_fit_exponent_drops_nonpositive_entries():
    s = DefectSeries("mixed")
    for n in (4, 6, 8, 10):
        s.add(n, n, 2.0 / n)
    s.add(12, 12, 0.0)
    slope, _, _ = fit_exponent(s)
    assert abs(slope + 1.0) < 0.01
