"""Classical flow on the sphere and the truncated Wigner approximation.

To leading order in ``eps`` the Wigner function is carried along the
Hamilton flow of the symbol

    W_H(n) = a.n / (2 eps) + n.b.n / (2 eps^2),

whose equations of motion are

    theta' =  (2 eps / sin t) d_p W_H,      phi' = -(2 eps / sin t) d_t W_H.

The orientation is the one that reproduces the exact precession
``phi' = +w`` under ``H = w S_z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import QuadraticHamiltonian
from .errors import PoleEncounter, PoleSingularity
from .sphere import SymbolField
from .spin_algebra import _irrep

__all__ = ["Trajectory", "hamiltonian_symbol", "hamilton_flow", "flow_map", "twa_propagate", "is_zonal"]

POLE_CAP = 1e-6


@dataclass
class Trajectory:
    omega0: tuple
    times: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    energy: np.ndarray
    dt: float

    @property
    def energy_drift(self) -> float:
        return float(np.abs(self.energy - self.energy[0]).max())


def is_zonal(H: QuadraticHamiltonian) -> bool:
    """True when the symbol depends on ``theta`` only."""
    a, b = H.a_vec, H.b_mat
    return a[0] == 0 and a[1] == 0 and b[0, 1] == b[0, 2] == b[1, 2] == 0 and b[0, 0] == b[1, 1]


def _unit(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def hamiltonian_symbol(H: QuadraticHamiltonian, theta, phi, irrep) -> np.ndarray:
    eps = _irrep(irrep).eps
    n = _unit(np.asarray(theta, float), np.asarray(phi, float))
    return np.einsum("i,i...->...", H.a_vec, n) / (2 * eps) + np.einsum("ij,i...,j...->...", H.b_mat, n, n) / (
        2 * eps**2
    )


def _velocity(H: QuadraticHamiltonian, eps: float):
    a, b = H.a_vec, H.b_mat

    def f(theta, phi):
        ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
        n = np.stack([st * cp, st * sp, ct])
        grad = a.reshape(3, *([1] * theta.ndim)) / (2 * eps) + np.einsum("ij,j...->i...", b, n) / eps**2
        e_t = np.stack([ct * cp, ct * sp, -st])
        e_p = np.stack([-sp, cp, np.zeros_like(theta)])
        dW_t = (grad * e_t).sum(0)
        dW_p_over_sin = (grad * e_p).sum(0)
        return 2 * eps * dW_p_over_sin, -2 * eps * dW_t / st

    return f


def _default_step(H: QuadraticHamiltonian, eps: float) -> float:
    rate = np.abs(H.a_vec).sum() + 2 * np.abs(H.b_mat).sum() / eps
    return 0.01 / rate if rate > 0 else 0.01


def flow_map(H: QuadraticHamiltonian, theta, phi, t: float, irrep, dt: float | None = None):
    """Positions after time ``t`` (negative runs backward) of many starting points.

    Without an explicit ``dt``, a non-zonal ``H`` scales the default step
    by half the smallest ``sin(theta)`` among the points.
    Returns ``(theta, phi, hit_pole)``; points that enter the pole cap under
    a non-zonal Hamiltonian stop there and are flagged.
    """
    irrep = _irrep(irrep)
    eps = irrep.eps
    th = np.array(theta, dtype=float)
    ph = np.array(phi, dtype=float)
    if t == 0:
        return th, ph % (2 * np.pi), np.zeros(th.shape, bool)
    zonal = is_zonal(H)
    frozen = np.minimum(th, np.pi - th) < POLE_CAP
    if dt is None:
        dt = _default_step(H, eps)
        if not zonal and (~frozen).any():
            # phi' grows like 1/sin(theta) next to the poles
            dt *= 0.5 * float(np.clip(np.sin(th[~frozen]).min(), 1e-3, 1.0))
    dt = float(dt)
    n = max(1, int(np.ceil(abs(t) / dt - 1e-9)))
    h = t / n
    f = _velocity(H, eps)
    hit = frozen & (not zonal)
    for _ in range(n):
        live = ~frozen
        if not live.any():
            break
        x, y = th[live], ph[live]
        k1 = f(x, y)
        k2 = f(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
        k3 = f(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
        k4 = f(x + h * k3[0], y + h * k3[1])
        th[live] = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        ph[live] = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        cap = live & (np.minimum(th, np.pi - th) < POLE_CAP)
        if cap.any() and not zonal:
            hit |= cap
            frozen |= cap
    return th, ph % (2 * np.pi), hit


def hamilton_flow(
    H: QuadraticHamiltonian, omega0: tuple, t: float, dt: float | None = None, irrep=None, samples: int = 101
) -> Trajectory:
    """RK4 integration of the classical equations of motion from ``omega0``."""
    if irrep is None:
        raise ValueError("irrep is required (eps enters the equations of motion)")
    irrep = _irrep(irrep)
    theta0, phi0 = float(omega0[0]), float(omega0[1])
    zonal = is_zonal(H)
    polar = min(theta0, np.pi - theta0) < POLE_CAP
    if polar and not zonal:
        raise PoleEncounter(f"start point theta={theta0} lies in the pole cap")
    dt = _default_step(H, irrep.eps) if dt is None else float(dt)
    times = np.linspace(0.0, t, samples)
    th = np.empty(samples)
    ph = np.empty(samples)
    th[0], ph[0] = theta0, phi0 % (2 * np.pi)
    for i in range(1, samples):
        if polar:
            th[i], ph[i] = th[i - 1], ph[i - 1]
            continue
        a, b, hit = flow_map(H, th[i - 1 : i], ph[i - 1 : i], times[i] - times[i - 1], irrep, dt)
        if hit[0]:
            raise PoleEncounter(f"trajectory reached the pole cap near t={times[i]:.6g}")
        th[i], ph[i] = a[0], b[0]
    energy = hamiltonian_symbol(H, th, ph, irrep)
    return Trajectory((theta0, phi0), times, th, ph, energy, dt)


def twa_propagate(W0: SymbolField, H: QuadraticHamiltonian, t: float, dt: float | None = None) -> SymbolField:
    """``W(n, t) = W0(n(-t))``: each grid node is flowed backward and ``W0`` is
    synthesized there from its spectrum.

    Nodes whose backward flow reaches a pole cap take the mean of the other
    nodes on their ring and raise a ``PoleSingularity`` warning.
    """
    g = W0.grid
    irrep = W0.irrep
    if irrep is None:
        raise ValueError("symbol carries no irrep")
    th, ph = g.mesh()
    tb, pb, hit = flow_map(H, th, ph, -t, irrep, dt)
    values = g.evaluate(W0.spectrum, tb, pb)
    if np.abs(values.imag).max() <= 1e-10 * max(np.abs(values).max(), 1e-300):
        values = values.real.copy()
    if hit.any():
        for i in np.flatnonzero(hit.any(axis=1)):
            ok = ~hit[i]
            values[i, hit[i]] = values[i, ok].mean() if ok.any() else np.nan
        warnings.warn(f"{int(hit.sum())} nodes reached a pole cap; values filled from their ring", PoleSingularity)
    return SymbolField(g, values=values, s=W0.s, irrep=irrep)
