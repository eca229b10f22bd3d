import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bloch_currents.currents import (
    CurrentField,
    anticommutator_symbol_coefficient,
    classical_hamiltonian_symbol,
    classical_velocity,
    continuity_residual,
    dissipative_current,
    dissipator_symbol,
    divergence,
    kerr_current,
    second_kind_form,
    total_current,
    unitary_current,
)
from bloch_currents.dynamics import DissipationParams, QuadraticHamiltonian, kerr, lindblad_rhs, lmg
from bloch_currents.errors import AxisUnsupported, PoleSingularity
from bloch_currents.phasespace_map import default_grid, symbol
from bloch_currents.sphere import SymbolField
from bloch_currents.spin_algebra import SpinIrrep, angular_momentum, coherent_state, random_density_matrix

ORDERINGS = (-1, 0, 1)


def random_quadratic(rng):
    b = rng.normal(size=(3, 3))
    return QuadraticHamiltonian(rng.normal(size=3), (b + b.T) / 2)


def l2(x):
    return float(np.sqrt((np.abs(x) ** 2).sum()))


@given(st.integers(1, 12), st.sampled_from(ORDERINGS), st.integers(0, 2**32 - 1))
def test_unitary_continuity(two_s, s, seed):
    ir = SpinIrrep(two_s)
    rng = np.random.default_rng(seed)
    H = random_quadratic(rng)
    rho = random_density_matrix(ir.dim, rng=rng)
    W = symbol(rho, ir, s)
    rhs = symbol(lindblad_rhs(rho, H.matrix(ir)), ir, s)
    assert continuity_residual(rhs, unitary_current(H, W)) < 1e-8


@given(st.integers(1, 12), st.sampled_from(ORDERINGS), st.floats(0.01, 2), st.floats(0, 3), st.integers(0, 2**32 - 1))
def test_dissipative_continuity(two_s, s, gamma, nbar, seed):
    ir = SpinIrrep(two_s)
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(ir.dim, rng=rng)
    diss = DissipationParams(gamma, nbar)
    W = symbol(rho, ir, s)
    rhs = symbol(lindblad_rhs(rho, np.zeros_like(rho), diss, ir), ir, s)
    assert continuity_residual(rhs, dissipative_current(diss, W)) < 1e-8


@pytest.mark.parametrize("s", ORDERINGS)
@pytest.mark.parametrize("which", [1, 2])
def test_dissipator_symbols(s, which, rng):
    ir = SpinIrrep.from_spin(3)
    _, _, _, Sp, Sm = angular_momentum(ir)
    rho = random_density_matrix(ir.dim, rng=rng)
    J, Jd = (Sm, Sp) if which == 1 else (Sp, Sm)
    L = 2 * J @ rho @ Jd - Jd @ J @ rho - rho @ Jd @ J
    got = dissipator_symbol(symbol(rho, ir, s), which)
    assert np.abs(got.values - symbol(L, ir, s).values).max() < 1e-9


def test_total_current_is_sum(rng):
    ir = SpinIrrep.from_spin(2)
    W = symbol(random_density_matrix(ir.dim, rng=rng), ir, 0)
    H = lmg(1.0, 3.0, ir)
    diss = DissipationParams(0.2, 0.1)
    J = total_current(H, diss, W)
    parts = unitary_current(H, W) + dissipative_current(diss, W)
    assert np.abs(J.J_theta - parts.J_theta).max() < 1e-14
    assert np.abs(J.J_phi - parts.J_phi).max() < 1e-14
    zero = total_current(None, None, W)
    assert not np.any(zero.J_theta) and not np.any(zero.J_phi)


@pytest.mark.parametrize("s", ORDERINGS)
def test_kerr_current_is_azimuthal_and_matches_general(s, rng):
    ir = SpinIrrep.from_spin(4)
    W = symbol(random_density_matrix(ir.dim, rng=rng), ir, s)
    Jk = kerr_current(0.8, W)
    Jg = unitary_current(kerr(0.8), W)
    scale = np.abs(Jg.J_phi).max()
    assert np.abs(Jg.J_theta).max() < 1e-10 * scale
    assert not np.any(Jk.J_theta)
    assert np.abs(Jk.J_phi - Jg.J_phi).max() < 1e-9 * scale


@pytest.mark.parametrize("s", ORDERINGS)
def test_second_kind_form(s, rng):
    ir = SpinIrrep.from_spin(3.5)
    rho = random_density_matrix(ir.dim, rng=rng)
    Sz = angular_momentum(ir)[2]
    W = symbol(rho, ir, s)
    got = second_kind_form(0.6, W).spectrum[: ir.two_s + 1]
    expect = symbol(lindblad_rhs(rho, 0.6 * Sz @ Sz), ir, s).spectrum[: ir.two_s + 1]
    assert np.abs(got - expect).max() < 1e-10 * np.abs(expect).max()
    with pytest.raises(AxisUnsupported):
        second_kind_form(0.6, W, axis="x")


@pytest.mark.parametrize("s", ORDERINGS)
def test_anticommutator_coefficient(s):
    ir = SpinIrrep.from_spin(2.5)
    Sx, _, Sz, _, _ = angular_momentum(ir)
    W = symbol(Sx @ Sz + Sz @ Sx, ir, s)
    n = W.grid.unit_vectors()
    C = anticommutator_symbol_coefficient(ir, s)
    assert np.abs(W.values - C * n[0] * n[2]).max() < 1e-11


def test_wigner_anticommutator_coefficient_value():
    assert anticommutator_symbol_coefficient(10, 0) == pytest.approx(math.sqrt(190 * 253), rel=1e-14)


def test_linear_hamiltonian_current_is_classical_transport(rng):
    ir = SpinIrrep.from_spin(3)
    H = QuadraticHamiltonian(rng.normal(size=3), np.zeros((3, 3)))
    for s in ORDERINGS:
        W = symbol(random_density_matrix(ir.dim, rng=rng), ir, s)
        J = unitary_current(H, W)
        v = classical_velocity(H, ir, W.grid)
        assert np.abs(J.J_theta - v.J_theta * W.values).max() < 1e-10
        assert np.abs(J.J_phi - v.J_phi * W.values).max() < 1e-10


def test_classical_velocity_of_sz_is_rigid_rotation():
    ir = SpinIrrep.from_spin(2)
    g = default_grid(ir)
    v = classical_velocity(QuadraticHamiltonian((0, 0, 1), np.zeros((3, 3))), ir, g)
    th, _ = g.mesh()
    assert np.abs(v.J_theta).max() < 1e-14
    assert np.abs(v.J_phi - np.sin(th)).max() < 1e-14


def test_classical_symbol_scaling():
    ir = SpinIrrep.from_spin(10)
    g = default_grid(ir)
    th, _ = g.mesh()
    W = classical_hamiltonian_symbol(kerr(1.0), g, ir)
    assert np.abs(W - 0.5 * 21**2 * np.cos(th) ** 2 / 2).max() < 1e-9


def test_divergence_of_meridional_field():
    g = default_grid(SpinIrrep.from_spin(3))
    th, _ = g.mesh()
    J = CurrentField(g, np.sin(th), np.zeros(g.shape))
    assert np.abs(divergence(J).values - 2 * np.cos(th)).max() < 1e-11


def test_divergence_of_rotation_vanishes():
    g = default_grid(SpinIrrep.from_spin(3))
    th, _ = g.mesh()
    J = CurrentField(g, np.zeros(g.shape), np.sin(th))
    assert np.abs(divergence(J).values).max() < 1e-12


def test_pole_singularity_warning():
    g = default_grid(SpinIrrep.from_spin(3))
    th, ph = g.mesh()
    J = CurrentField(g, np.zeros(g.shape), 1e-3 * np.cos(ph) / np.sin(th) ** 9)
    with pytest.warns(PoleSingularity):
        divergence(J)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        divergence(J, pole_check=False)


@pytest.mark.parametrize("s", ORDERINGS)
def test_high_temperature_currents(s):
    ir = SpinIrrep.from_spin(10)
    psi = coherent_state(ir, 1.2, 0.0)
    rho = np.outer(psi, psi.conj())
    W = symbol(rho, ir, s)
    g = W.grid
    th, _ = g.mesh()
    nbar = 100.0
    J = dissipative_current(DissipationParams(1.0, nbar), W)
    dW_dt = g.backward_dtheta(W.spectrum)
    dW_dp = g.backward(1j * g.orders() * W.spectrum)
    Jt = -nbar * dW_dt
    Jp = -nbar * np.cos(th) ** 2 / np.sin(th) * dW_dp
    assert l2(J.J_theta - Jt) < 0.05 * l2(Jt)
    assert l2(J.J_phi - Jp) < 0.05 * l2(Jp)


def test_current_rejects_mismatched_ordering(rng):
    ir = SpinIrrep.from_spin(1)
    W = symbol(random_density_matrix(ir.dim, rng=rng), ir, 1)
    with pytest.raises(ValueError):
        unitary_current(kerr(1.0), W, s=0)
    with pytest.raises(ValueError):
        unitary_current(kerr(1.0), SymbolField(W.grid, values=W.values, s=1))
