import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm, null_space

from bloch_currents.errors import InvalidQuantumNumbers, OutOfBand
from bloch_currents.spin_algebra import (
    SpinIrrep,
    angular_momentum,
    basis_state,
    clebsch_gordan,
    clebsch_gordan_exact,
    coherent_state,
    random_density_matrix,
    random_hermitian,
    tensor_operator,
    tensor_operators,
)

spins = st.integers(min_value=0, max_value=100).map(lambda n: n / 2)


def test_irrep_fields():
    ir = SpinIrrep.from_spin(3.5)
    assert ir.dim == 8
    assert ir.eps == 1 / 8
    assert list(ir.m_values) == [3.5 - k for k in range(8)]


@pytest.mark.parametrize("bad", [0.3, -1, 1.25])
def test_irrep_rejects_non_half_integers(bad):
    with pytest.raises(InvalidQuantumNumbers):
        SpinIrrep.from_spin(bad)


def test_spin_half_sz():
    Sz = angular_momentum(0.5)[2]
    assert np.allclose(Sz, np.diag([0.5, -0.5]), atol=0)


def test_spin_one_casimir():
    Sx, Sy, Sz, _, _ = angular_momentum(1)
    assert np.abs(Sx @ Sx + Sy @ Sy + Sz @ Sz - 2 * np.eye(3)).max() < 1e-14


def test_ladder_elements():
    S = 3
    _, _, _, Sp, Sm = angular_momentum(S)
    for i, m in enumerate(SpinIrrep.from_spin(S).m_values):
        if m < S:
            assert Sp[i - 1, i] == pytest.approx(math.sqrt(S * (S + 1) - m * (m + 1)), abs=1e-14)
        if m > -S:
            assert Sm[i + 1, i] == pytest.approx(math.sqrt(S * (S + 1) - m * (m - 1)), abs=1e-14)


@given(spins)
def test_commutators_and_casimir(S):
    Sx, Sy, Sz, _, _ = angular_momentum(S)
    for A, B, C in ((Sx, Sy, Sz), (Sy, Sz, Sx), (Sz, Sx, Sy)):
        assert np.abs(A @ B - B @ A - 1j * C).max() <= 1e-12 * max(1, S)
    cas = Sx @ Sx + Sy @ Sy + Sz @ Sz
    assert np.abs(cas - S * (S + 1) * np.eye(len(Sz))).max() <= 1e-11 * max(1, S * S)


@given(spins)
def test_cg_coupling_to_scalar_is_one(S):
    assert clebsch_gordan(S, S, 0, 0, S, S) == pytest.approx(1.0, abs=1e-15)


@given(st.integers(0, 12), st.integers(0, 12), st.data())
def test_cg_orthonormal_columns(t1, t2, data):
    j1, j2 = t1 / 2, t2 / 2
    tJ = data.draw(st.sampled_from(range(abs(t1 - t2), t1 + t2 + 1, 2)))
    J = tJ / 2
    M = data.draw(st.sampled_from([J - k for k in range(tJ + 1)]))
    total = 0.0
    for k in range(t1 + 1):
        m1 = j1 - k
        m2 = M - m1
        if abs(m2) <= j2:
            total += clebsch_gordan(j1, m1, j2, m2, J, M) ** 2
    assert total == pytest.approx(1.0, abs=1e-13)


@given(st.integers(0, 10), st.integers(0, 10), st.data())
def test_cg_mirror_symmetry(t1, t2, data):
    j1, j2 = t1 / 2, t2 / 2
    J = data.draw(st.sampled_from(range(abs(t1 - t2), t1 + t2 + 1, 2))) / 2
    m1 = j1 - data.draw(st.integers(0, t1))
    m2 = j2 - data.draw(st.integers(0, t2))
    M = m1 + m2
    if abs(M) > J:
        return
    lhs = clebsch_gordan(j1, -m1, j2, -m2, J, -M)
    rhs = (-1) ** round(j1 + j2 - J) * clebsch_gordan(j1, m1, j2, m2, J, M)
    assert lhs == pytest.approx(rhs, abs=1e-14)


def _coupled_basis(j1, j2, J):
    """Brute-force |J, M> vectors in the product basis, highest M first.

    The top state is the null vector of J+ inside the M = J subspace;
    the rest follow by lowering. Phase fixed by <j1 j1; j2 J-j1|J J> > 0.
    """
    a = angular_momentum(j1)
    b = angular_momentum(j2)
    d1, d2 = len(a[0]), len(b[0])
    tot = [np.kron(a[k], np.eye(d2)) + np.kron(np.eye(d1), b[k]) for k in range(5)]
    Jz, Jp, Jm = tot[2], tot[3], tot[4]
    sub = np.flatnonzero(np.isclose(np.diag(Jz).real, J))
    top = null_space(Jp[:, sub])
    assert top.shape[1] == 1
    v = np.zeros(d1 * d2, dtype=complex)
    v[sub] = top[:, 0]
    lead = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
    v *= np.conj(lead) / abs(lead)
    out = [v]
    for _ in range(int(round(2 * J))):
        w = Jm @ out[-1]
        out.append(w / np.linalg.norm(w))
    return out


@pytest.mark.parametrize("K", range(5))
def test_cg_highest_weight_against_coupled_basis(K):
    S = 2
    vecs = _coupled_basis(S, K, S)
    v = vecs[0]  # M = S
    d2 = 2 * K + 1
    # component <S m1; K m2 | S S> with m1 = S, m2 = 0
    m1_index = 0
    m2_index = K
    oracle = v[m1_index * d2 + m2_index].real
    assert clebsch_gordan(S, S, K, 0, S, S) == pytest.approx(oracle, abs=1e-12)


def test_cg_full_table_against_coupled_basis():
    j1, j2 = 1.5, 1
    for tJ in (1, 3, 5):
        J = tJ / 2
        vecs = _coupled_basis(j1, j2, J)
        for iM, v in enumerate(vecs):
            M = J - iM
            for a in range(4):
                for b in range(3):
                    m1, m2 = j1 - a, j2 - b
                    expect = v[a * 3 + b].real if m1 + m2 == M else 0.0
                    assert clebsch_gordan(j1, m1, j2, m2, J, M) == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("args", [(25, 3, 25, -2, 50, 1), (50, 50, 50, -50, 50, 0), (50, 7, 49.5, -3.5, 20.5, 3.5)])
def test_cg_large_j_matches_exact_series(args):
    fast = clebsch_gordan(*args)
    exact = clebsch_gordan_exact(*args)
    assert fast == pytest.approx(exact, rel=1e-13, abs=1e-300)


def test_cg_selection_rules_give_zero():
    assert clebsch_gordan(1, 1, 1, 1, 1, 1) == 0.0
    assert clebsch_gordan(1, 0, 1, 0, 1, 0) == 0.0  # parity
    assert clebsch_gordan(1, 1, 1, 0, 3, 1) == 0.0  # triangle


@pytest.mark.parametrize("args", [(0.5, 1.5, 1, 0, 1.5, 1.5), (1, 0.5, 1, 0, 1, 0.5), (0.3, 0.3, 1, 0, 1, 0.3)])
def test_cg_invalid_quantum_numbers(args):
    with pytest.raises(InvalidQuantumNumbers):
        clebsch_gordan(*args)


def test_tensor_scalar_is_scaled_identity():
    ir = SpinIrrep.from_spin(3)
    assert np.abs(tensor_operator(ir, 0, 0) - np.eye(7) / math.sqrt(7)).max() < 1e-14


def test_tensor_family_orthonormal():
    ir = SpinIrrep.from_spin(3)
    T = tensor_operators(ir).reshape(-1, 7, 7)
    nz = [i for i in range(len(T)) if np.abs(T[i]).max() > 0]
    T = T[nz].astype(complex)
    gram = np.einsum("iab,jab->ij", T.conj(), T)  # Tr(T_i^dagger T_j) for real T
    assert np.abs(gram - np.eye(len(T))).max() < 1e-13
    assert len(T) == 49


def test_rank_one_tensor_is_proportional_to_sz():
    ir = SpinIrrep.from_spin(4)
    T = tensor_operator(ir, 1, 0)
    Sz = angular_momentum(ir)[2]
    d = np.diag(Sz).real
    ratio = np.diag(T).real[d != 0] / d[d != 0]
    assert np.ptp(ratio) < 1e-14
    assert np.abs(T - np.diag(np.diag(T))).max() == 0


def test_tensor_out_of_band():
    with pytest.raises(OutOfBand):
        tensor_operator(2, 5, 0)
    with pytest.raises(OutOfBand):
        tensor_operator(2, 1, 2)


@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_tensor_completeness(two_s, seed):
    ir = SpinIrrep(two_s)
    A = random_hermitian(ir.dim, seed) + 1j * random_hermitian(ir.dim, seed + 1)
    T = tensor_operators(ir).astype(complex)
    coef = np.einsum("kqab,ab->kq", T.conj(), A)  # Tr(A T^dagger) for real T
    back = np.einsum("kq,kqab->ab", coef, T)
    assert np.abs(back - A).max() < 1e-10 * max(1, np.abs(A).max())


@pytest.mark.parametrize("phi", [0.0, 1.0, 4.0])
def test_coherent_state_at_north_pole(phi):
    ir = SpinIrrep.from_spin(4)
    assert np.abs(coherent_state(ir, 0.0, phi) - basis_state(ir, 4)).max() < 1e-15


def test_coherent_state_mean_sz():
    ir = SpinIrrep.from_spin(10)
    psi = coherent_state(ir, math.pi / 3, 1.2)
    Sz = angular_momentum(ir)[2]
    assert np.vdot(psi, Sz @ psi).real == pytest.approx(5.0, abs=1e-10)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_coherent_state_mean_spin_direction(theta, phi):
    ir = SpinIrrep.from_spin(3)
    psi = coherent_state(ir, theta, phi)
    Sx, Sy, Sz, _, _ = angular_momentum(ir)
    mean = [np.vdot(psi, A @ psi).real for A in (Sx, Sy, Sz)]
    n = [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    assert np.allclose(mean, 3 * np.array(n), atol=1e-11)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


def test_coherent_state_equals_rotated_highest_weight():
    ir = SpinIrrep.from_spin(2.5)
    _, Sy, Sz, _, _ = angular_momentum(ir)
    theta, phi = 0.7, 2.2
    rot = expm(-1j * phi * Sz) @ expm(-1j * theta * Sy) @ basis_state(ir, 2.5)
    psi = coherent_state(ir, theta, phi)
    assert abs(abs(np.vdot(rot, psi)) - 1) < 1e-12


def test_coherent_overlap_closed_form(rng):
    ir = SpinIrrep.from_spin(5)
    t1, p1, t2, p2 = rng.uniform(0, math.pi), rng.uniform(0, 6), rng.uniform(0, math.pi), rng.uniform(0, 6)
    n1 = np.array([math.sin(t1) * math.cos(p1), math.sin(t1) * math.sin(p1), math.cos(t1)])
    n2 = np.array([math.sin(t2) * math.cos(p2), math.sin(t2) * math.sin(p2), math.cos(t2)])
    big = math.acos(np.clip(n1 @ n2, -1, 1))
    value = abs(np.vdot(coherent_state(ir, t1, p1), coherent_state(ir, t2, p2))) ** 2
    assert value == pytest.approx(math.cos(big / 2) ** 20, abs=1e-12)


def test_random_density_matrix_is_a_state():
    rho = random_density_matrix(6, rank=2, rng=1)
    assert np.trace(rho).real == pytest.approx(1.0)
    ev = np.linalg.eigvalsh(rho)
    assert ev.min() > -1e-14
    assert np.sum(ev > 1e-12) == 2
