"""Hilbert-space evolution under quadratic Hamiltonians and thermal damping.

The master equation is

    d rho/dt = -i[H, rho] + (gamma/2)(nbar+1) L1(rho) + (gamma/2) nbar L2(rho)

with ``L1(rho) = 2 S- rho S+ - S+S- rho - rho S+S-`` and ``L2`` its
mirror image with ``S+`` and ``S-`` exchanged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import AsymmetricB, DegenerateMeanSpin, StepTooLarge
from .spin_algebra import _irrep, angular_momentum

__all__ = [
    "QuadraticHamiltonian",
    "DissipationParams",
    "EvolutionTrace",
    "build_hamiltonian",
    "kerr",
    "lmg",
    "lindblad_rhs",
    "default_step",
    "evolve",
    "liouvillian",
    "propagate",
    "tunnelling_period_estimate",
    "squeezing",
    "best_squeezing_time",
    "write_series_csv",
]

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H = sum_i a_i S_i + sum_jk b_jk {S_j, S_k}``."""

    a: tuple = (0.0, 0.0, 0.0)
    b: tuple = ((0.0,) * 3,) * 3

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3)
        b = np.asarray(self.b, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ValueError("Hamiltonian coefficients must be finite")
        if np.abs(b - b.T).max() > 1e-14 * max(1.0, np.abs(b).max()):
            raise AsymmetricB("b must be symmetric")
        object.__setattr__(self, "a", tuple(float(x) for x in a))
        object.__setattr__(self, "b", tuple(tuple(float(x) for x in row) for row in b))

    @property
    def a_vec(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def b_mat(self) -> np.ndarray:
        return np.array(self.b)

    @property
    def is_linear(self) -> bool:
        return not np.any(self.b_mat)

    def matrix(self, irrep) -> np.ndarray:
        return build_hamiltonian(irrep, self.a, self.b)

    def to_dict(self) -> dict:
        return {"a": list(self.a), "b": [list(r) for r in self.b]}


@dataclass(frozen=True)
class DissipationParams:
    gamma: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ValueError(f"nbar must be finite and >= 0, got {self.nbar}")

    @property
    def active(self) -> bool:
        return self.gamma > 0


def build_hamiltonian(irrep, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(3)
    b = np.asarray(b, dtype=float).reshape(3, 3)
    if np.abs(b - b.T).max() > 1e-14 * max(1.0, np.abs(b).max()):
        raise AsymmetricB("b must be symmetric")
    S = angular_momentum(irrep)[:3]
    H = sum(a[i] * S[i] for i in range(3))
    for j in range(3):
        for k in range(3):
            if b[j, k]:
                H = H + b[j, k] * (S[j] @ S[k] + S[k] @ S[j])
    H = np.asarray(H, dtype=complex)
    if H.ndim == 0:
        H = np.zeros((_irrep(irrep).dim,) * 2, dtype=complex)
    return (H + H.conj().T) / 2


def kerr(chi: float) -> QuadraticHamiltonian:
    """``chi S_z^2``."""
    b = np.zeros((3, 3))
    b[2, 2] = chi / 2
    return QuadraticHamiltonian((0.0, 0.0, 0.0), b)


def lmg(h: float, lam: float, irrep) -> QuadraticHamiltonian:
    """``-h S_x + lam/(2(2S+1)) (S_z^2 - S_y^2)``."""
    irrep = _irrep(irrep)
    c = lam / (2 * irrep.dim)
    b = np.diag([0.0, -c / 2, c / 2])
    return QuadraticHamiltonian((-h, 0.0, 0.0), b)


def _lindblad_parts(irrep):
    _, _, _, Sp, Sm = angular_momentum(irrep)
    return Sp, Sm, Sp @ Sm, Sm @ Sp


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, diss: DissipationParams | None = None, irrep=None) -> np.ndarray:
    rho = np.asarray(rho)
    H = np.asarray(H)
    out = -1j * (H @ rho - rho @ H)
    if diss is None or not diss.active:
        return out
    irrep = _irrep(irrep if irrep is not None else (rho.shape[0] - 1) / 2)
    Sp, Sm, SpSm, SmSp = _lindblad_parts(irrep)
    g1 = 0.5 * diss.gamma * (diss.nbar + 1)
    g2 = 0.5 * diss.gamma * diss.nbar
    out = out + g1 * (2 * Sm @ rho @ Sp - SpSm @ rho - rho @ SpSm)
    if g2:
        out = out + g2 * (2 * Sp @ rho @ Sm - SmSp @ rho - rho @ SmSp)
    return out


def default_step(H: np.ndarray, diss: DissipationParams | None, irrep) -> float:
    """``0.01 / max(||H||_2, gamma (2 nbar + 1) S)``."""
    irrep = _irrep(irrep)
    rate = np.linalg.norm(H, 2)
    if diss is not None and diss.active:
        rate = max(rate, diss.gamma * (2 * diss.nbar + 1) * irrep.S)
    return 0.01 / rate if rate > 0 else 0.01


@dataclass
class EvolutionTrace:
    times: np.ndarray
    states: np.ndarray
    irrep: object
    scalars: dict = field(default_factory=dict)
    dt: float = 0.0
    trace_drift: float = 0.0
    min_eigenvalue: float = 0.0
    halving_error: float | None = None

    def state_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no stored state at t={t}")
        return self.states[i]


def _rk4_segment(rho, H, diss, irrep, T, dt):
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n
    f = lambda r: lindblad_rhs(r, H, diss, irrep)  # noqa: E731
    for _ in range(n):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
    return rho


def _integrate(rho0, H, diss, irrep, times, dt):
    states = [rho0]
    rho = rho0
    for t0, t1 in zip(times[:-1], times[1:]):
        rho = _rk4_segment(rho, H, diss, irrep, t1 - t0, dt) if t1 > t0 else rho
        states.append(rho)
    return np.array(states)


def evolve(
    rho0: np.ndarray,
    H,
    diss: DissipationParams | None = None,
    t_final: float = 1.0,
    dt: float | None = None,
    snapshot_times=None,
    irrep=None,
    check_halving: bool = True,
) -> EvolutionTrace:
    """Fixed-step RK4 integration of the master equation.

    States are stored at ``snapshot_times`` (plus ``0`` and ``t_final``);
    the step is shrunk slightly where needed so that every stored time is
    hit exactly. With ``check_halving`` the run is repeated at ``dt/2`` and
    the largest state difference is kept as an error estimate.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    irrep = _irrep(irrep if irrep is not None else (rho0.shape[0] - 1) / 2)
    if isinstance(H, QuadraticHamiltonian):
        H = H.matrix(irrep)
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    dt = default_step(H, diss, irrep) if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    snaps = [] if snapshot_times is None else [float(t) for t in snapshot_times]
    for t in snaps:
        if t < 0 or t > t_final + 1e-12:
            raise ValueError(f"snapshot time {t} outside [0, {t_final}]")
    times = np.array(sorted(set([0.0, float(t_final)] + snaps)))
    states = _integrate(rho0, H, diss, irrep, times, dt)
    halving = None
    if check_halving and len(times) > 1:
        fine = _integrate(rho0, H, diss, irrep, times, dt / 2)
        halving = float(np.abs(fine - states).max())
    traces = np.einsum("tii->t", states).real
    drift = float(np.abs(traces - np.trace(rho0).real).max())
    if drift > 1e-6:
        raise StepTooLarge(f"trace drift {drift:.3e} exceeds 1e-6; reduce dt (was {dt:.3e})")
    min_eig = float(min(np.linalg.eigvalsh(r).min() for r in states))
    if min_eig < -1e-8:
        raise StepTooLarge(f"positivity lost: min eigenvalue {min_eig:.3e}; reduce dt (was {dt:.3e})")
    trace = EvolutionTrace(times, states, irrep, dt=dt, trace_drift=drift, min_eigenvalue=min_eig, halving_error=halving)
    trace.scalars = _scalar_series(states, irrep)
    return trace


def liouvillian(H: np.ndarray, diss: DissipationParams | None, irrep) -> np.ndarray:
    """Superoperator ``L`` with ``vec(d rho/dt) = L vec(rho)`` (row-major ``vec``)."""
    irrep = _irrep(irrep)
    H = np.asarray(H, dtype=complex)
    d = irrep.dim
    eye = np.eye(d)
    # row-major vec: vec(A rho B) = kron(A, B^T) vec(rho)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    if diss is not None and diss.active:
        Sp, Sm, SpSm, SmSp = _lindblad_parts(irrep)
        for rate, J, JdJ in (
            (0.5 * diss.gamma * (diss.nbar + 1), Sm, SpSm),
            (0.5 * diss.gamma * diss.nbar, Sp, SmSp),
        ):
            if rate:
                L = L + rate * (2 * np.kron(J, J.conj()) - np.kron(JdJ, eye) - np.kron(eye, JdJ.T))
    return L


def propagate(
    rho0: np.ndarray,
    H,
    diss: DissipationParams | None = None,
    times=None,
    window: float = 0.0,
    irrep=None,
) -> EvolutionTrace:
    """Evolution by exact exponentials of the time-independent generator.

    Meant for runs far longer than the RK4 step allows (tunnelling
    periods). With ``window > 0`` each stored state is the average of
    ``rho`` over ``[t - window/2, t + window/2]``, obtained from the block
    exponential ``expm([[L, 1], [0, 0]] w)`` whose corner is
    ``int_0^w exp(L s) ds``; every ``t`` must then be at least ``window/2``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    irrep = _irrep(irrep if irrep is not None else (rho0.shape[0] - 1) / 2)
    if isinstance(H, QuadraticHamiltonian):
        H = H.matrix(irrep)
    times = np.asarray(sorted(set(float(t) for t in times)))
    if window < 0:
        raise ValueError("window must be nonnegative")
    if window > 0 and times[0] < window / 2 - 1e-12:
        raise ValueError("with a window every time must be >= window/2")
    L = liouvillian(H, diss, irrep)
    n = L.shape[0]
    v = rho0.reshape(-1)
    if window > 0:
        blk = np.zeros((2 * n, 2 * n), dtype=complex)
        blk[:n, :n] = L
        blk[:n, n:] = np.eye(n)
        avg = expm(blk * window)[:n, n:] / window
        starts = times - window / 2
    else:
        avg = None
        starts = times
    states = []
    t_prev = 0.0
    steps: dict = {}
    for t in starts:
        if t > t_prev:
            key = round(t - t_prev, 9)
            if key not in steps:
                steps[key] = expm(L * (t - t_prev))
            v = steps[key] @ v
        t_prev = t
        w = avg @ v if avg is not None else v
        r = w.reshape(irrep.dim, irrep.dim)
        states.append(0.5 * (r + r.conj().T))
    states = np.array(states)
    traces = np.einsum("tii->t", states).real
    drift = float(np.abs(traces - np.trace(rho0).real).max())
    if drift > 1e-6:
        raise StepTooLarge(f"trace drift {drift:.3e} exceeds 1e-6 in exponential propagation")
    min_eig = float(min(np.linalg.eigvalsh(r).min() for r in states))
    if min_eig < -1e-8:
        raise StepTooLarge(f"positivity lost: min eigenvalue {min_eig:.3e}")
    trace = EvolutionTrace(times, states, irrep, dt=0.0, trace_drift=drift, min_eigenvalue=min_eig)
    trace.scalars = _scalar_series(states, irrep)
    return trace


def tunnelling_period_estimate(psi0: np.ndarray, H: np.ndarray) -> float:
    """``2 pi / |E_a - E_b|`` for the two eigenstates carrying most of ``psi0``."""
    E, V = np.linalg.eigh(np.asarray(H))
    w = np.abs(V.conj().T @ np.asarray(psi0)) ** 2
    a, b = np.argsort(w)[::-1][:2]
    gap = abs(E[a] - E[b])
    if gap == 0:
        raise ValueError("dominant components are degenerate; no tunnelling period")
    return float(2 * np.pi / gap)


def _scalar_series(states, irrep) -> dict:
    Sx, Sy, Sz = angular_momentum(irrep)[:3]
    out = {"Sx": [], "Sy": [], "Sz": [], "purity": [], "squeezing": []}
    for r in states:
        out["Sx"].append(np.trace(r @ Sx).real)
        out["Sy"].append(np.trace(r @ Sy).real)
        out["Sz"].append(np.trace(r @ Sz).real)
        out["purity"].append(np.trace(r @ r).real)
        try:
            out["squeezing"].append(squeezing(r, irrep))
        except DegenerateMeanSpin:
            out["squeezing"].append(float("nan"))
    return {k: np.array(v) for k, v in out.items()}


def squeezing(rho: np.ndarray, irrep=None) -> float:
    """Smallest variance of ``S.u`` over unit ``u`` orthogonal to ``<S>``."""
    rho = np.asarray(rho)
    irrep = _irrep(irrep if irrep is not None else (rho.shape[0] - 1) / 2)
    S = angular_momentum(irrep)[:3]
    mean = np.array([np.trace(rho @ s).real for s in S])
    norm = np.linalg.norm(mean)
    if norm < 1e-9 * max(irrep.S, 1e-300):
        raise DegenerateMeanSpin(f"|<S>| = {norm:.3e} too small to define a tangent plane")
    n = mean / norm
    trial = np.eye(3)[int(np.argmin(np.abs(n)))]
    e1 = np.cross(n, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    A = [sum(e[i] * S[i] for i in range(3)) for e in (e1, e2)]
    m = [np.trace(rho @ a).real for a in A]
    cov = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            sym = 0.5 * (A[i] @ A[j] + A[j] @ A[i])
            cov[i, j] = np.trace(rho @ sym).real - m[i] * m[j]
    return float(np.linalg.eigvalsh(cov)[0])


def best_squeezing_time(trace: EvolutionTrace) -> float:
    """Time of minimal squeezing, refined by a parabola through three samples."""
    t = trace.times
    v = trace.scalars["squeezing"]
    ok = np.isfinite(v)
    if ok.sum() == 0:
        raise DegenerateMeanSpin("no snapshot has a defined squeezing value")
    idx = np.flatnonzero(ok)
    i = idx[int(np.argmin(v[ok]))]
    if i == 0 or i == len(t) - 1 or not (ok[i - 1] and ok[i + 1]):
        return float(t[i])
    x = t[i - 1 : i + 2]
    y = v[i - 1 : i + 2]
    c = np.polyfit(x, y, 2)
    if c[0] <= 0:
        return float(t[i])
    return float(-c[1] / (2 * c[0]))


def write_series_csv(trace: EvolutionTrace, path, digits: int = 17) -> None:
    cols = ["Sx", "Sy", "Sz", "purity", "squeezing"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + cols)
        for k, t in enumerate(trace.times):
            w.writerow([f"{t:.{digits}g}"] + [f"{trace.scalars[c][k]:.{digits}g}" for c in cols])
