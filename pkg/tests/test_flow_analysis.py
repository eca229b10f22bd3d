import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from bloch_currents.currents import CurrentField, classical_velocity
from bloch_currents.dynamics import lmg, propagate
from bloch_currents.spin_algebra import coherent_state
from bloch_currents.errors import DegenerateField
from bloch_currents.flow_analysis import (
    CurrentInterpolant,
    cap_index,
    cell_indices,
    integral_flow,
    revival_period,
    sign_changes,
    stagnation_points,
    unitary_overlap,
    winding_number,
    write_flow_csv,
    write_stagnation_csv,
    zero_contours,
)
from bloch_currents.sphere import SphereGrid


def tangent_field(grid, vec):
    """Current with the tangential part of the ambient field ``vec(n)``."""
    th, ph = grid.mesh()
    ct, st_, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    n = np.stack([st_ * cp, st_ * sp, ct])
    e_t = np.stack([ct * cp, ct * sp, -st_])
    e_p = np.stack([-sp, cp, np.zeros_like(th)])
    V = vec(n)
    return CurrentField(grid, (e_t * V).sum(0), (e_p * V).sum(0))


def unit(theta, phi):
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def direction(p):
    return unit(p.theta, p.phi)



def gradient_field(grid, B):
    return tangent_field(grid, lambda n: 2 * np.einsum("ij,jab->iab", B, n))


GRID = SphereGrid(12)


def test_rigid_rotation_has_vortices_at_poles():
    S = stagnation_points(tangent_field(GRID, lambda n: np.cross([0.0, 0.0, 1.0], n, axisb=0, axisc=0)))
    assert S.theta_degenerate and not S.all_isolated
    assert sorted(p.theta for p in S.points) == pytest.approx([0.0, math.pi])
    assert all(p.index == 1 and p.classification == "vortex" for p in S.points)
    assert S.index_sum == 2


def test_vortex_winding_and_radius_invariance(rng):
    axis = Rotation.random(random_state=1).apply([0.0, 0.0, 1.0])
    J = tangent_field(GRID, lambda n: np.cross(axis, n, axisb=0, axisc=0))
    th, ph = math.acos(axis[2]), math.atan2(axis[1], axis[0])
    interp = CurrentInterpolant(J)
    for r in (0.3, 0.8, 1.5, 3.0):
        assert winding_number(interp, (th, ph), r) == 1
        assert winding_number(interp, (math.pi - th, ph + math.pi), r) == 1
    assert winding_number(J, (th, ph), 1.5, raw=True) == pytest.approx(1.0, abs=1e-9)


def test_saddle_winding():
    B = np.diag([1.0, 0.0, -1.0])
    J = gradient_field(GRID, B)
    for r in (0.5, 1.5, 2.5):
        assert winding_number(J, (math.pi / 2, math.pi / 2), r) == -1
        assert winding_number(J, (math.pi / 2, 0.0), r) == 1


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_quadratic_gradient_flow_topology(seed):
    rng = np.random.default_rng(seed)
    R = Rotation.random(random_state=seed).as_matrix()
    lam = np.sort(rng.uniform(-1, 1, 3))
    lam = lam + np.array([-0.3, 0.0, 0.3])  # keep the eigenvalues well separated
    B = R @ np.diag(lam) @ R.T
    S = stagnation_points(gradient_field(GRID, B))
    assert S.all_isolated
    assert len(S.points) == 6
    assert S.index_sum == 2
    for p in S.points:
        k = int(np.argmax(np.abs(R.T @ direction(p))))
        assert abs(abs(R[:, k] @ direction(p)) - 1) < 1e-8
        assert p.index == (-1 if k == 1 else 1)


def test_cell_and_cap_indices_add_up():
    B = np.diag([0.7, -0.2, -0.5])
    R = Rotation.from_euler("zyx", [0.3, 0.9, 0.4]).as_matrix()
    J = gradient_field(GRID, R @ B @ R.T)
    assert cell_indices(J).sum() + cap_index(J, True) + cap_index(J, False) == 2


def test_lmg_classical_flow_has_saddle_on_x_axis():
    H = lmg(1.0, 18.0, 10)
    g = SphereGrid(28)
    S = stagnation_points(classical_velocity(H, 10, g))
    assert S.all_isolated and S.index_sum == 2
    saddle = [p for p in S.points if abs(p.theta - math.pi / 2) < 1e-6 and abs(math.remainder(p.phi, 2 * math.pi)) < 1e-6]
    assert len(saddle) == 1 and saddle[0].index == -1
    wells = [p for p in S.points if abs(p.theta - math.pi / 2) < 1e-6 and abs(abs(math.remainder(p.phi, 2 * math.pi)) - 1.4589) < 1e-3]
    assert len(wells) == 2 and all(p.index == 1 for p in wells)


def test_zero_field_is_degenerate():
    z = np.zeros(GRID.shape)
    with pytest.raises(DegenerateField):
        stagnation_points(CurrentField(GRID, z, z))
    with pytest.raises(DegenerateField):
        zero_contours(z, GRID)


def test_zero_contour_of_cosine_is_equator():
    th, ph = GRID.mesh()
    lines = zero_contours(np.cos(th) + 0 * ph, GRID)
    assert len(lines) == 1
    assert np.allclose(lines[0][:, 0], math.pi / 2, atol=1e-3)
    span = lines[0][:, 1].max() - lines[0][:, 1].min()
    assert span == pytest.approx(2 * math.pi, abs=1e-9)


def test_zero_contours_shape_check():
    with pytest.raises(ValueError):
        zero_contours(np.ones((3, 3)), GRID)


def test_integral_flow():
    th, ph = GRID.mesh()
    J = CurrentField(GRID, np.zeros(GRID.shape), np.cos(th) ** 2 * (1 + np.cos(ph)))
    assert integral_flow(J, 0.0) == pytest.approx(4 / 3, abs=1e-12)
    assert integral_flow(J, 0.3) == pytest.approx(2 / 3 * (1 + math.cos(0.3)), abs=1e-12)


def test_sign_changes_and_revival():
    t = np.linspace(0, 3, 301)
    assert sign_changes(t, np.cos(2 * t)) == pytest.approx([math.pi / 4, 3 * math.pi / 4], abs=1e-4)
    assert revival_period(t, np.cos(math.pi * t / 2) ** 2) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValueError):
        revival_period(t[:50], np.cos(t[:50]))


def test_csv_writers(tmp_path):
    S = stagnation_points(gradient_field(GRID, np.diag([1.0, 0.0, -1.0])))
    write_stagnation_csv(tmp_path / "s.csv", [(0.5, S)])
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "t,theta,phi,index,class" and len(rows) == 7
    write_flow_csv(tmp_path / "f.csv", [0.0, 0.1], [1.0, -2.0])
    assert (tmp_path / "f.csv").read_text().splitlines() == ["t,I_phi0", "0,1", "0.10000000000000001,-2"]


def test_unitary_overlap_matches_window_average():
    H = lmg(1.0, 4.0, 2).matrix(2)
    psi = coherent_state(2, 1.2, 0.3)
    times = np.array([0.5, 1.0, 2.5])
    tr = propagate(np.outer(psi, psi.conj()), H, times=times, window=0.4, irrep=2)
    expect = [np.vdot(psi, r @ psi).real for r in tr.states]
    assert np.allclose(unitary_overlap(psi, H, times, 0.4), expect, atol=1e-12)
    assert unitary_overlap(psi, H, [0.0])[0] == pytest.approx(1.0)
