import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from bloch_currents.errors import BandOverflow, OrderingMismatch, OrderingUndefined
from bloch_currents.phasespace_map import coherent_symbol, default_grid, kernel, overlap, reconstruct, symbol
from bloch_currents.sphere import SphereGrid, SymbolField
from bloch_currents.spin_algebra import (
    SpinIrrep,
    angular_momentum,
    basis_state,
    coherent_state,
    random_density_matrix,
    random_hermitian,
)

ORDERINGS = (-1, 0, 1)


def test_default_grid_band():
    g = default_grid(SpinIrrep.from_spin(10))
    assert g.k_max == 28 and g.n_theta == 29 and g.n_phi == 58


@pytest.mark.parametrize("s", ORDERINGS)
def test_identity_symbol_is_one(s):
    ir = SpinIrrep.from_spin(3)
    W = symbol(np.eye(ir.dim), ir, s)
    assert np.abs(W.values - 1).max() < 1e-12


def test_sz_wigner_symbol():
    S = 4
    ir = SpinIrrep.from_spin(S)
    W = symbol(angular_momentum(ir)[2], ir, 0)
    th, _ = W.grid.mesh()
    assert np.abs(W.values - math.sqrt(S * (S + 1)) * np.cos(th)).max() < 1e-12


@pytest.mark.parametrize("s, factor", [(-1, lambda S: S), (1, lambda S: S + 1)])
def test_sz_q_and_p_symbols(s, factor):
    S = 3.5
    ir = SpinIrrep.from_spin(S)
    W = symbol(angular_momentum(ir)[2], ir, s)
    th, _ = W.grid.mesh()
    assert np.abs(W.values - factor(S) * np.cos(th)).max() < 1e-12


def test_sz_squared_anticommutator_wigner_symbol():
    S = 10
    ir = SpinIrrep.from_spin(S)
    Sz = angular_momentum(ir)[2]
    W = symbol(2 * Sz @ Sz, ir, 0)
    th, _ = W.grid.mesh()
    C = math.sqrt(190 * 253)  # S(2S-1)(2S+3)(S+1) at S = 10
    expect = C * np.cos(th) ** 2 + (220 - C) / 3
    assert np.abs(W.values - expect).max() < 1e-10


def test_q_function_is_coherent_expectation(rng):
    ir = SpinIrrep.from_spin(5)
    rho = random_density_matrix(ir.dim, rng=rng)
    W = symbol(rho, ir, -1)
    th, ph = W.grid.mesh()
    for i, j in [(0, 0), (3, 7), (10, 20), (5, 1)]:
        psi = coherent_state(ir, th[i, j], ph[i, j])
        assert W.values[i, j] == pytest.approx(np.vdot(psi, rho @ psi).real, abs=1e-12)


@pytest.mark.parametrize("s", ORDERINGS)
def test_kernel_trace_and_hermiticity(s, rng):
    ir = SpinIrrep.from_spin(7)
    for _ in range(3):
        w = kernel(ir, s, rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        assert np.trace(w).real == pytest.approx(1.0, abs=1e-12)
        assert np.abs(w - w.conj().T).max() < 1e-12


@pytest.mark.parametrize("s", ORDERINGS)
def test_kernel_integrates_to_identity(s):
    ir = SpinIrrep.from_spin(3)
    g = default_grid(ir)
    th, ph = g.mesh()
    total = np.zeros((ir.dim, ir.dim), dtype=complex)
    for i in range(g.n_theta):
        for j in range(g.n_phi):
            total += g.weights[i] * (2 * math.pi / g.n_phi) * kernel(ir, s, th[i, j], ph[i, j])
    assert np.abs(total * ir.dim / (4 * math.pi) - np.eye(ir.dim)).max() < 1e-10


def test_q_kernel_is_coherent_projector(rng):
    ir = SpinIrrep.from_spin(5)
    th, ph = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
    psi = coherent_state(ir, th, ph)
    assert np.abs(kernel(ir, -1, th, ph) - np.outer(psi, psi.conj())).max() < 1e-10


@pytest.mark.parametrize("s", ORDERINGS)
def test_kernel_matches_symbol(s, rng):
    ir = SpinIrrep.from_spin(2)
    A = random_hermitian(ir.dim, rng)
    W = symbol(A, ir, s)
    th, ph = W.grid.mesh()
    i, j = 4, 3
    assert np.trace(A @ kernel(ir, s, th[i, j], ph[i, j])).real == pytest.approx(W.values[i, j].real, abs=1e-11)


def test_ordering_undefined():
    with pytest.raises(OrderingUndefined):
        symbol(np.eye(2), 0.5, 2)


@pytest.mark.parametrize("s", ORDERINGS)
def test_reconstruct_round_trip(s, rng):
    ir = SpinIrrep.from_spin(6)
    A = random_hermitian(ir.dim, rng)
    assert np.abs(reconstruct(symbol(A, ir, s)) - A).max() < 1e-9


def test_reconstruct_constant_one():
    ir = SpinIrrep.from_spin(2)
    g = default_grid(ir)
    W = SymbolField(g, values=np.ones(g.shape), s=1, irrep=ir)
    assert np.abs(reconstruct(W) - np.eye(ir.dim)).max() < 1e-12


def test_p_function_of_coherent_state_reconstructs_projector():
    ir = SpinIrrep.from_spin(4)
    psi = coherent_state(ir, 1.1, 0.4)
    proj = np.outer(psi, psi.conj())
    rho = reconstruct(symbol(proj, ir, 1))
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-8)
    assert np.abs(rho - proj).max() < 1e-10


def test_reconstruct_band_overflow():
    ir = SpinIrrep.from_spin(1)
    g = default_grid(ir)
    th, _ = g.mesh()
    W = SymbolField(g, values=np.cos(th) ** 5, s=0, irrep=ir)
    with pytest.raises(BandOverflow):
        reconstruct(W)


@pytest.mark.parametrize("s", ORDERINGS)
def test_overlap_basis_state_purity(s):
    ir = SpinIrrep.from_spin(3)
    v = basis_state(ir, 3)
    P = np.outer(v, v.conj())
    assert overlap(symbol(P, ir, s), symbol(P, ir, -s)).real == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("s", ORDERINGS)
def test_overlap_is_trace(s, rng):
    ir = SpinIrrep.from_spin(8)
    rho = random_density_matrix(ir.dim, rng=rng)
    A = random_hermitian(ir.dim, rng)
    got = overlap(symbol(rho, ir, s), symbol(A, ir, -s))
    assert got == pytest.approx(np.trace(rho @ A), abs=1e-10)


def test_overlap_needs_opposite_orderings():
    ir = SpinIrrep.from_spin(1)
    with pytest.raises(OrderingMismatch):
        overlap(symbol(np.eye(3), ir, 1), symbol(np.eye(3), ir, 1))


def test_q_at_own_centre_is_one():
    ir = SpinIrrep.from_spin(6)
    psi = coherent_state(ir, 0.8, 1.9)
    W = symbol(np.outer(psi, psi.conj()), ir, -1)
    assert W.grid.evaluate(W.spectrum, 0.8, 1.9).real == pytest.approx(1.0, abs=1e-12)


@given(st.integers(1, 16), st.sampled_from(ORDERINGS), st.integers(0, 2**32 - 1))
def test_normalization_positivity_and_reality(two_s, s, seed):
    ir = SpinIrrep(two_s)
    rho = random_density_matrix(ir.dim, rank=1 + seed % ir.dim, rng=seed)
    W = symbol(rho, ir, s)
    assert W.grid.integrate(W.values).real * ir.dim / (4 * math.pi) == pytest.approx(1.0, abs=1e-10)
    assert np.abs(np.imag(W.values)).max() < 1e-11
    if s == -1:
        assert np.real(W.values).min() >= -1e-12


@given(st.integers(1, 16), st.sampled_from(ORDERINGS), st.integers(0, 2**32 - 1))
def test_rotation_covariance(two_s, s, seed):
    ir = SpinIrrep(two_s)
    rng = np.random.default_rng(seed)
    A = random_hermitian(ir.dim, rng)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0, 2 * math.pi)
    Sx, Sy, Sz, _, _ = angular_momentum(ir)
    U = expm(-1j * angle * (axis[0] * Sx + axis[1] * Sy + axis[2] * Sz))
    R = Rotation.from_rotvec(angle * axis).as_matrix()
    W = symbol(A, ir, s)
    Wrot = symbol(U @ A @ U.conj().T, ir, s)
    g = W.grid
    n = g.unit_vectors().reshape(3, -1)
    back = R.T @ n
    th = np.arccos(np.clip(back[2], -1, 1))
    ph = np.arctan2(back[1], back[0])
    expect = g.evaluate(W.spectrum, th, ph).reshape(g.shape)
    assert np.abs(Wrot.values - expect).max() < 1e-8 * max(1, np.abs(expect).max())


@given(st.integers(1, 12), st.sampled_from(ORDERINGS), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_coherent_symbol_matches_operator_map(two_s, s, theta, phi):
    ir = SpinIrrep(two_s)
    psi = coherent_state(ir, theta, phi)
    expect = symbol(np.outer(psi, psi.conj()), ir, s)
    got = coherent_symbol(ir, s, theta, phi)
    assert np.abs(got.values - expect.values).max() < 1e-12 * max(1.0, np.abs(expect.values).max())


def test_coherent_symbol_on_truncated_grid():
    ir = SpinIrrep.from_spin(60)
    W = coherent_symbol(ir, 0, 1.0, 0.5, SphereGrid(100))
    assert W.grid.integrate(W.values).real * ir.dim / (4 * math.pi) == pytest.approx(1.0, abs=1e-12)
    assert W.grid.evaluate(W.spectrum, 1.0, 0.5).real > 0
    with pytest.raises(BandOverflow):
        coherent_symbol(ir, 1, 1.0, 0.5, SphereGrid(100))
