"""Scenario presets, LMG calibration and energy-landscape summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamics import QuadraticHamiltonian, kerr, lmg
from .errors import CalibrationFailed, ConfigError
from .phasespace_map import symbol
from .sphere import legendre_table
from .spin_algebra import SpinIrrep, _irrep, coherent_state

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "preset",
    "equatorial_minimum",
    "calibrate_lmg",
    "energy_landscape",
]

SCENARIOS = ("kerr-unitary", "kerr-dissipative", "lmg-stable", "lmg-unstable", "custom")
LMG_TARGET_PHI = 1.459


@dataclass
class ScenarioConfig:
    name: str = "custom"
    S: float = 10.0
    s: int = 0
    model: str = "custom"
    chi: float = 1.0
    h: float = 1.0
    lam: float | None = None
    a: tuple = (0.0, 0.0, 0.0)
    b: tuple = (0.0,) * 9
    gamma: float = 0.0
    nbar: float = 0.0
    omega0: tuple | None = (math.pi / 2, 0.0)
    basis_m: float | None = None
    tmax: float = 1.0
    dt: float | None = None
    snapshots: tuple = ()
    series_points: int = 201
    method: str = "auto"
    grid: tuple | None = None
    phi0: float = 0.0
    tunnelling: bool = False
    twa: bool = False
    out: str = "bloch-currents-out"
    origin: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Raise ``ConfigError`` naming the first offending field."""

        def bad(name, msg):
            raise ConfigError(msg, field=name)

        for name in ("S", "chi", "h", "gamma", "nbar", "tmax", "phi0"):
            if not math.isfinite(getattr(self, name)):
                bad(name, f"{name} must be finite")
        if self.lam is not None and not math.isfinite(self.lam):
            bad("lam", "lambda must be finite")
        if len(self.a) != 3 or not all(math.isfinite(x) for x in self.a):
            bad("a", "a needs 3 finite numbers")
        if len(self.b) != 9 or not all(math.isfinite(x) for x in self.b):
            bad("b", "b needs 9 finite numbers")
        if self.name not in SCENARIOS:
            bad("name", f"scenario must be one of {', '.join(SCENARIOS)}")
        if self.model not in ("kerr", "lmg", "custom"):
            bad("model", "model must be kerr, lmg or custom")
        if self.s not in (-1, 0, 1):
            bad("s", "s must be -1, 0 or 1")
        try:
            SpinIrrep.from_spin(self.S)
        except ValueError as exc:
            bad("S", str(exc))
        if self.gamma < 0:
            bad("gamma", "gamma must be nonnegative")
        if self.nbar < 0:
            bad("nbar", "nbar must be nonnegative")
        if self.tmax < 0:
            bad("tmax", "tmax must be nonnegative")
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            bad("dt", "dt must be positive")
        # tmax = 0 in a tunnelling run means one measured period
        limit = math.inf if (self.tunnelling and self.tmax == 0) else self.tmax + 1e-12
        if any(not math.isfinite(t) or t < 0 or t > limit for t in self.snapshots):
            bad("snapshots", "snapshot times must lie in [0, tmax]")
        if self.method not in ("auto", "rk4", "propagator"):
            bad("method", "method must be auto, rk4 or propagator")
        if self.series_points < 2:
            bad("series_points", "series_points must be at least 2")
        if self.omega0 is None and self.basis_m is None:
            bad("omega0", "an initial state (omega0 or basis_m) is required")
        if self.omega0 is not None and (len(self.omega0) != 2 or not all(map(math.isfinite, self.omega0))):
            bad("omega0", "omega0 needs two finite angles")
        if self.basis_m is not None and self.basis_m not in list(self.irrep().m_values):
            bad("basis_m", f"basis_m={self.basis_m} is not a magnetic quantum number of S={self.S}")
        if self.grid is not None and (len(self.grid) != 2 or min(self.grid) < 1):
            bad("grid", "grid must be two positive integers")
        if self.twa and self.s != 0:
            bad("twa", "truncated Wigner output needs s = 0")
        if not math.isfinite(self.phi0):
            bad("phi0", "phi0 must be finite")

    def irrep(self) -> SpinIrrep:
        return SpinIrrep.from_spin(self.S)

    def hamiltonian(self) -> QuadraticHamiltonian:
        ir = self.irrep()
        if self.model == "kerr":
            return kerr(self.chi)
        if self.model == "lmg":
            lam = self.lam if self.lam is not None else calibrate_lmg(self.S)
            return lmg(self.h, lam, ir)
        return QuadraticHamiltonian(self.a, np.reshape(self.b, (3, 3)))

    def initial_state(self) -> np.ndarray:
        ir = self.irrep()
        if self.basis_m is not None:
            m = list(ir.m_values)
            if self.basis_m not in m:
                raise ValueError(f"basis_m={self.basis_m} is not a magnetic quantum number of S={ir.S}")
            psi = np.zeros(ir.dim, dtype=complex)
            psi[m.index(self.basis_m)] = 1.0
            return psi
        return coherent_state(ir, *self.omega0)


def preset(name: str) -> ScenarioConfig:
    """Defaults for a named scenario."""
    cat = math.pi / 2
    if name == "kerr-unitary":
        return ScenarioConfig(name, model="kerr", tmax=cat, snapshots=(0.0, 0.32, cat))
    if name == "kerr-dissipative":
        return replace(preset("kerr-unitary"), name=name, gamma=0.015)
    if name == "lmg-stable":
        return ScenarioConfig(
            name, model="lmg", omega0=(math.pi / 2, -LMG_TARGET_PHI), tmax=0.0, tunnelling=True, method="propagator"
        )
    if name == "lmg-unstable":
        return ScenarioConfig(name, model="lmg", omega0=(math.pi / 2, 0.0), tmax=1.0, snapshots=(0.0, 0.279, 0.837))
    if name == "custom":
        return ScenarioConfig(name)
    raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")


# -- LMG calibration --------------------------------------------------------


def _equator_coefficients(H: QuadraticHamiltonian, irrep) -> np.ndarray:
    """Fourier coefficients ``c_q`` of the exact s=0 symbol along the equator."""
    W = symbol(H.matrix(irrep), irrep, 0)
    g = W.grid
    km = g.k_max
    P = legendre_table(km, np.array([0.0]))[:, 0, :]
    c = np.zeros(2 * km + 1, dtype=complex)
    for q in range(-km, km + 1):
        c[km + q] = (-1) ** q * P[-q] @ W.spectrum[:, km + q] if q < 0 else P[q] @ W.spectrum[:, km + q]
    return c


def _trig(c: np.ndarray):
    km = (len(c) - 1) // 2
    q = np.arange(-km, km + 1)
    return lambda phi: float((c * np.exp(1j * q * phi)).sum().real)


def _minimum_of(f) -> tuple[float, float]:
    phis = np.linspace(0, np.pi, 181)
    vals = [f(p) for p in phis]
    i = int(np.argmin(vals))
    lo, hi = phis[max(i - 1, 0)], phis[min(i + 1, len(phis) - 1)]
    r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if vals[i] < r.fun:
        return float(phis[i]), float(vals[i])
    return float(r.x), float(r.fun)


def equatorial_minimum(H: QuadraticHamiltonian, irrep) -> tuple[float, float]:
    """``(phi_min, W_H(phi_min))`` of the exact s=0 symbol on the equator, ``phi_min`` in ``[0, pi]``."""
    irrep = _irrep(irrep)
    return _minimum_of(_trig(_equator_coefficients(H, irrep)))


def _simplest_within(lo: float, hi: float, root: float) -> float:
    """Shortest decimal in ``[lo, hi]``, preferring the one nearest ``root``."""
    for digits in range(0, 13):
        q = Fraction(10) ** -digits
        k = math.ceil(Fraction(lo) / q)
        cands = [k * q]
        while cands[-1] + q <= Fraction(hi):
            cands.append(cands[-1] + q)
        cands = [c for c in cands if lo <= c <= hi]
        if cands:
            return float(min(cands, key=lambda c: abs(float(c) - root)))
    return root


def calibrate_lmg(S: float, target: float = LMG_TARGET_PHI, tol: float = 1e-3, h: float = 1.0) -> float:
    """Coupling ``lambda`` placing the equatorial minimum of the symbol at ``phi = target``.

    The root is bracketed on ``(0, 20 S]`` and then replaced by the shortest
    decimal whose minimum still lies within ``tol`` of the target.
    """
    irrep = SpinIrrep.from_spin(S)
    # the Hamiltonian, hence its symbol, is linear in (h, lambda)
    c0 = _equator_coefficients(lmg(h, 0.0, irrep), irrep)
    c1 = _equator_coefficients(lmg(0.0, 1.0, irrep), irrep)

    def miss(lam):
        return _minimum_of(_trig(c0 + lam * c1))[0] - target

    lo, hi = 1e-9, 20.0 * irrep.S
    if miss(hi) < 0:
        raise CalibrationFailed(f"no lambda in (0, {hi:g}] puts the minimum at phi={target}")
    try:
        root = brentq(miss, lo, hi, xtol=1e-12)
    except ValueError as exc:
        raise CalibrationFailed(str(exc)) from exc
    # widen to the tolerance band on both sides of the root
    try:
        a = brentq(lambda x: miss(x) + tol, lo, root, xtol=1e-12)
    except ValueError:
        a = root
    try:
        b = brentq(lambda x: miss(x) - tol, root, hi, xtol=1e-12)
    except ValueError:
        b = root
    lam = _simplest_within(a, b, root)
    if abs(miss(lam)) > tol:
        lam = root
    return float(lam)


# -- landscape --------------------------------------------------------------


def _energy_spread(Hm: np.ndarray, psi: np.ndarray) -> float:
    e1 = np.vdot(psi, Hm @ psi).real
    e2 = np.vdot(psi, Hm @ (Hm @ psi)).real
    return float(math.sqrt(max(e2 - e1 * e1, 0.0)))


def energy_landscape(H: QuadraticHamiltonian, irrep, model: str) -> dict:
    """Exact s=0 symbol values at the landmarks of each model and the energy
    spread of the coherent state sitting in the valley."""
    irrep = _irrep(irrep)
    W = symbol(H.matrix(irrep), irrep, 0)
    g = W.grid

    def at(theta, phi):
        return float(g.evaluate(W.spectrum, theta, phi).real)

    Hm = H.matrix(irrep)
    if model == "kerr":
        valley = at(np.pi / 2, 0.0)
        pole = at(0.0, 0.0)
        spread = _energy_spread(Hm, coherent_state(irrep, np.pi / 2, 0.0))
        return {
            "valley": valley,
            "pole": pole,
            "delta_H": spread,
            "pole_far_above_valley": bool(pole - valley > 10 * spread),
        }
    if model == "lmg":
        phi_min, wmin = equatorial_minimum(H, irrep)
        saddle = at(np.pi / 2, 0.0)
        pole = at(0.0, 0.0)
        spread = _energy_spread(Hm, coherent_state(irrep, np.pi / 2, phi_min))
        return {
            "phi_min": phi_min,
            "minimum": wmin,
            "saddle": saddle,
            "pole": pole,
            "delta_H": spread,
            "ordered": bool(pole > saddle > wmin),
        }
    return {}
