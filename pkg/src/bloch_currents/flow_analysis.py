"""Topology and transport of phase-space currents.

Stagnation lines are the zero sets of ``J_theta`` and ``J_phi``;
stagnation points are their crossings, classified by the winding number
of the current direction around a small loop (+1 vortex, -1 saddle).
On the sphere the indices of isolated zeros add up to 2.

The integral flow ``I(phi0) = int sin(t) J_phi(t, phi0) dt`` measures the
net transport across the meridian ``phi = phi0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from skimage.measure import find_contours

from .currents import CurrentField, total_current
from .dynamics import DissipationParams, QuadraticHamiltonian, propagate, tunnelling_period_estimate
from .errors import AmbiguousIndex, DegenerateField
from .phasespace_map import default_grid, symbol
from .sphere import SphereGrid, legendre_table
from .spin_algebra import _irrep

__all__ = [
    "StagnationPoint",
    "StagnationSet",
    "CurrentInterpolant",
    "zero_contours",
    "stagnation_points",
    "winding_number",
    "cell_indices",
    "cap_index",
    "integral_flow",
    "revival_period",
    "unitary_overlap",
    "sign_changes",
    "TunnellingFlow",
    "tunnelling_flow",
    "write_stagnation_csv",
    "write_flow_csv",
]

DEGENERATE_TOL = 1e-12
RESIDUAL_TOL = 1e-6
REJECT = 0.2
# converged zeros closer than MERGE cells are one zero
MERGE = 1e-4
# derivative scale (relative, per radian) below which a zero is unresolved
NOISE = 1e-7


@dataclass(frozen=True)
class StagnationPoint:
    theta: float
    phi: float
    index: int | None
    classification: str
    residual: float = 0.0


@dataclass
class StagnationSet:
    theta_zero_contours: list
    phi_zero_contours: list
    points: list = field(default_factory=list)
    theta_degenerate: bool = False
    phi_degenerate: bool = False

    @property
    def isolated(self) -> list:
        return [p for p in self.points if p.classification != "degenerate"]

    @property
    def all_isolated(self) -> bool:
        return not (self.theta_degenerate or self.phi_degenerate) and all(
            p.classification != "degenerate" for p in self.points
        )

    @property
    def index_sum(self) -> int:
        return int(sum(p.index for p in self.isolated))


# -- contours ---------------------------------------------------------------


def _cell(grid: SphereGrid) -> float:
    return np.pi / grid.n_theta


def _periodic(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values, values[:, :1]], axis=1)


def _to_angles(theta_nodes: np.ndarray, n_phi: int, rc: np.ndarray) -> np.ndarray:
    theta = np.interp(rc[:, 0], np.arange(len(theta_nodes)), theta_nodes)
    phi = rc[:, 1] * (2 * np.pi / n_phi)
    return np.column_stack([theta, phi])


def _stitch(pieces: list, n_phi: int) -> list:
    """Join pieces cut by the phi seam; columns stay continuous (unwrapped)."""
    pieces = [p.copy() for p in pieces]
    closed = [bool(len(p) > 2 and np.allclose(p[0], p[-1])) for p in pieces]

    def at(pt, col):
        return abs(pt[1] - col) < 1e-9

    changed = True
    while changed:
        changed = False
        for i, a in enumerate(pieces):
            if closed[i]:
                continue
            end = a[-1]
            for col, shift in ((n_phi, n_phi), (0, -n_phi)):
                if not at(end, col):
                    continue
                for j, b in enumerate(pieces):
                    if closed[j] or not at(b[0], col - shift) or abs(b[0][0] - end[0]) > 1e-9:
                        continue
                    if j == i:
                        closed[i] = True
                        changed = True
                        break
                    b = b + np.array([0.0, end[1] - b[0][1]])
                    pieces[i] = np.vstack([a, b[1:]])
                    del pieces[j]
                    del closed[j]
                    changed = True
                    break
                if changed:
                    break
            if changed:
                break
    return pieces


def zero_contours(values: np.ndarray, grid: SphereGrid, scale: float | None = None) -> list:
    """Zero-level polylines of a real grid field, periodic in ``phi``.

    Each polyline is an ``(n, 2)`` array of ``(theta, phi)``; ``phi`` is
    continuous along a polyline and may leave ``[0, 2 pi)``. The first and
    last rings bound the search, so the pole caps are excluded.
    """
    values = np.real(np.asarray(values))
    if values.shape != grid.shape:
        raise ValueError(f"expected grid values of shape {grid.shape}, got {values.shape}")
    ref = 1.0 if scale is None else scale
    if np.abs(values).max() <= DEGENERATE_TOL * ref:
        raise DegenerateField("field vanishes identically; its zero set is the whole sphere")
    pieces = find_contours(_periodic(values), 0.0)
    return [_to_angles(grid.theta, grid.n_phi, p) for p in _stitch(pieces, grid.n_phi)]


# -- interpolation ----------------------------------------------------------


def _frames(theta, phi):
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    n = np.stack([st * cp, st * sp, ct])
    e_t = np.stack([ct * cp, ct * sp, -st])
    e_p = np.stack([-sp, cp, np.zeros_like(theta)])
    return n, e_t, e_p


class CurrentInterpolant:
    """Off-grid evaluation of a current field.

    ``sin(theta) J`` is band-limited for every current built here, so it
    is interpolated spectrally; fields that fail the round-trip check fall
    back to bilinear interpolation in ``(theta, phi)``.
    """

    def __init__(self, J: CurrentField):
        g = J.grid
        self.grid = g
        self.Jt = np.real(J.J_theta)
        self.Jp = np.real(J.J_phi)
        self.scale = float(max(np.abs(self.Jt).max(), np.abs(self.Jp).max()))
        st = g.sin_theta[:, None]
        Ft, Fp = st * self.Jt, st * self.Jp
        self.ct = g.forward(Ft)
        self.cp = g.forward(Fp)
        err = max(np.abs(g.backward(self.ct).real - Ft).max(), np.abs(g.backward(self.cp).real - Fp).max())
        self.spectral = err <= 1e-9 * max(self.scale, 1e-300)

    def _bilinear(self, F, theta, phi):
        g = self.grid
        th = np.concatenate([[0.0], g.theta, [np.pi]])
        Fe = np.vstack([np.zeros(g.n_phi), F, np.zeros(g.n_phi)])
        Fe = np.concatenate([Fe, Fe[:, :1]], axis=1)
        r = np.clip(np.searchsorted(th, theta) - 1, 0, len(th) - 2)
        u = (theta - th[r]) / (th[r + 1] - th[r])
        c = np.mod(phi, 2 * np.pi) * g.n_phi / (2 * np.pi)
        k = np.minimum(np.floor(c).astype(int), g.n_phi - 1)
        v = c - k
        return (
            (1 - u) * (1 - v) * Fe[r, k]
            + (1 - u) * v * Fe[r, k + 1]
            + u * (1 - v) * Fe[r + 1, k]
            + u * v * Fe[r + 1, k + 1]
        )

    def _synth(self, theta, phi):
        km = self.grid.k_max
        shape = theta.shape
        P = legendre_table(km, np.cos(theta.ravel()))
        ph = phi.ravel()
        out = np.zeros((2, ph.size), dtype=complex)
        C = np.stack([self.ct, self.cp])
        for q in range(km + 1):
            e = np.exp(1j * q * ph)
            out += (C[:, :, km + q] @ P[q].T) * e
            if q:
                out += (-1) ** q * (C[:, :, km - q] @ P[q].T) * e.conj()
        return out[0].real.reshape(shape), out[1].real.reshape(shape)

    def sin_weighted(self, theta, phi):
        theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
        if self.spectral:
            return self._synth(theta, phi)
        Ft = self.grid.sin_theta[:, None] * self.Jt
        Fp = self.grid.sin_theta[:, None] * self.Jp
        return self._bilinear(Ft, theta, phi), self._bilinear(Fp, theta, phi)

    def __call__(self, theta, phi):
        """``(J_theta, J_phi)``; undefined exactly at the poles."""
        Ft, Fp = self.sin_weighted(theta, phi)
        st = np.sin(theta)
        return Ft / st, Fp / st

    def cartesian(self, points: np.ndarray) -> np.ndarray:
        """Current as a 3-vector at unit vectors ``points`` of shape ``(3, ...)``."""
        theta = np.arccos(np.clip(points[2], -1, 1))
        phi = np.arctan2(points[1], points[0])
        Jt, Jp = self(np.clip(theta, 1e-9, np.pi - 1e-9), phi)
        _, e_t, e_p = _frames(theta, phi)
        return Jt * e_t + Jp * e_p

    def at_pole(self, north: bool) -> np.ndarray:
        """Limit of the current at a pole, Richardson-extrapolated along ``phi = 0``."""
        d = 1e-4
        th = np.array([d, 2 * d]) if north else np.pi - np.array([d, 2 * d])
        Jt, Jp = self(th, np.zeros(2))
        _, e_t, e_p = _frames(th, np.zeros(2))
        v = Jt * e_t + Jp * e_p
        return 2 * v[:, 0] - v[:, 1]


def _tangent_frame(theta, phi):
    n, e_t, e_p = _frames(np.asarray(theta, float), np.asarray(phi, float))
    if abs(np.sin(theta)) < 1e-9:
        # at the poles use (x, +-y) so that (t1, t2, n) stays right-handed
        t1 = np.array([1.0, 0.0, 0.0])
        t2 = np.cross(n, t1)
        return n, t1, t2
    return n, e_t, e_p


# -- winding ----------------------------------------------------------------


def winding_number(
    J: CurrentField | CurrentInterpolant,
    omega: tuple,
    radius_cells: float = 1.5,
    samples: int = 64,
    raw: bool = False,
):
    """Index of the zero at ``omega = (theta, phi)``.

    The loop is a geodesic circle of ``radius_cells`` theta-cells traversed
    counter-clockwise seen from outside the sphere.
    """
    interp = J if isinstance(J, CurrentInterpolant) else CurrentInterpolant(J)
    r = radius_cells * _cell(interp.grid)
    n, t1, t2 = _tangent_frame(*omega)
    a = 2 * np.pi * np.arange(samples) / samples
    pts = np.cos(r) * n[:, None] + np.sin(r) * (np.outer(t1, np.cos(a)) + np.outer(t2, np.sin(a)))
    v = interp.cartesian(pts)
    ang = np.arctan2(t2 @ v, t1 @ v)
    d = np.diff(np.append(ang, ang[0]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    value = d.sum() / (2 * np.pi)
    if raw:
        return float(value)
    k = int(np.rint(value))
    if abs(value - k) > REJECT:
        raise AmbiguousIndex(f"winding {value:.3f} is not close to an integer")
    return k


def _classify(index: int | None) -> str:
    return {1: "vortex", -1: "saddle"}.get(index, "degenerate")


# -- stagnation points ------------------------------------------------------


def _segments(pieces: list) -> np.ndarray:
    segs = [np.stack([p[:-1], p[1:]], axis=1) for p in pieces if len(p) > 1]
    return np.concatenate(segs) if segs else np.zeros((0, 2, 2))


def _intersections(sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """Crossing points of two segment families in index coordinates."""
    out = []
    chunk = 2048
    for i in range(0, len(sa), chunk):
        a = sa[i : i + chunk]
        p, r = a[:, None, 0], a[:, None, 1] - a[:, None, 0]
        q, s = sb[None, :, 0], sb[None, :, 1] - sb[None, :, 0]
        rxs = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
        qp = q - p
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[..., 0] * s[..., 1] - qp[..., 1] * s[..., 0]) / rxs
            u = (qp[..., 0] * r[..., 1] - qp[..., 1] * r[..., 0]) / rxs
        hit = (rxs != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
        ii, jj = np.nonzero(hit)
        out.append(p[ii, 0] + t[ii, jj, None] * r[ii, 0])
    return np.concatenate(out) if out else np.zeros((0, 2))


def _newton(interp: CurrentInterpolant, seeds, iters: int = 30) -> list:
    """Joint Newton iteration for all seeds on the tangent current.

    Each seed gets its own tangent-plane chart, so seeds at or near the
    poles need no special treatment.
    """
    if not len(seeds):
        return []
    h = 1e-7
    seeds = np.asarray(seeds, dtype=float)
    n0, t1, t2 = (np.stack(v) for v in zip(*(_tangent_frame(th, ph) for th, ph in seeds)))
    ab = np.zeros((len(seeds), 2))

    def point(ab):
        p = n0 + ab[:, :1] * t1 + ab[:, 1:] * t2
        return p / np.linalg.norm(p, axis=1, keepdims=True)

    def F(ab, rows):
        v = interp.cartesian(point(ab).T).T
        return np.stack([(v * t1[rows]).sum(1), (v * t2[rows]).sum(1)], axis=1)

    active = np.ones(len(seeds), bool)
    for _ in range(iters):
        rows = np.flatnonzero(active)
        a = ab[rows]
        saved = (n0, t1, t2)
        n0, t1, t2 = (np.tile(x[rows], (3, 1)) for x in saved)
        stacked = np.concatenate([a, a + [h, 0.0], a + [0.0, h]])
        v = F(stacked, slice(None)).reshape(3, len(rows), 2)
        n0, t1, t2 = saved
        jac = np.stack([(v[1] - v[0]) / h, (v[2] - v[0]) / h], axis=-1)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        ok = det != 0
        inv = np.stack([jac[:, 1, 1], -jac[:, 0, 1], -jac[:, 1, 0], jac[:, 0, 0]], -1).reshape(-1, 2, 2)
        step = np.zeros_like(a)
        step[ok] = -np.einsum("nij,nj->ni", inv[ok], v[0][ok]) / det[ok, None]
        step = np.clip(step, -0.5, 0.5)
        ab[rows] = a + step
        done = ~ok | (np.abs(step).max(axis=1) < 1e-13)
        active[rows[done]] = False
        if not active.any():
            break
    res = np.linalg.norm(F(ab, slice(None)), axis=1)
    p = point(ab)
    theta = np.arccos(np.clip(p[:, 2], -1, 1))
    phi = np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi)
    polar = np.hypot(p[:, 0], p[:, 1]) < 1e-12
    phi[polar] = 0.0
    return [(float(t), float(f), float(r)) for t, f, r in zip(theta, phi, res)]


def _angular_distance(a, b):
    n1 = _frames(np.asarray(a[0]), np.asarray(a[1]))[0]
    n2 = _frames(np.asarray(b[0]), np.asarray(b[1]))[0]
    return float(np.arccos(np.clip(n1 @ n2, -1, 1)))


def _pole_points(interp: CurrentInterpolant) -> list:
    found = []
    for theta, north in ((0.0, True), (np.pi, False)):
        res = float(np.linalg.norm(interp.at_pole(north)))
        if res < RESIDUAL_TOL * interp.scale:
            found.append((theta, 0.0, res))
    return found


def _cluster(points: np.ndarray, radius: float) -> list:
    kept = []
    for th, ph in points:
        if all(_angular_distance((th, ph), k) >= radius for k in kept):
            kept.append((th, ph))
    return kept


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def cell_indices(J: CurrentField) -> np.ndarray:
    """Discrete winding of the current around every grid cell.

    Cell ``(i, k)`` spans rings ``i, i+1`` and columns ``k, k+1`` (periodic).
    A nonzero entry marks a cell holding zeros of that net index.
    """
    return _cell_indices(np.real(J.J_theta), np.real(J.J_phi))


def _cell_indices(Jt, Jp):
    A = np.arctan2(Jp, Jt)
    A = np.concatenate([A, A[:, :1]], axis=1)
    # (theta, phi) is a positively oriented chart: go theta first, then phi
    d = (
        _wrap(A[1:, :-1] - A[:-1, :-1])
        + _wrap(A[1:, 1:] - A[1:, :-1])
        + _wrap(A[:-1, 1:] - A[1:, 1:])
        + _wrap(A[:-1, :-1] - A[:-1, 1:])
    )
    return np.rint(d / (2 * np.pi)).astype(int)


def cap_index(J: CurrentField, north: bool = True) -> int:
    """Net index of the zeros inside the pole cap beyond the first or last ring."""
    return _cap_index(np.real(J.J_theta), np.real(J.J_phi), north)


def _cap_index(Jt, Jp, north):
    A = np.arctan2(Jp, Jt)
    ring = A[0] if north else A[-1]
    wind = _wrap(np.diff(np.append(ring, ring[0]))).sum() / (2 * np.pi)
    # the (e_theta, e_phi) frame turns once around each pole
    return int(np.rint(1 + wind)) if north else int(np.rint(1 - wind))


def _jacobian_det(interp: CurrentInterpolant, th: float, ph: float) -> float:
    """Determinant of the current's derivative in arc-length coordinates."""
    h = 1e-6
    Jt, Jp = interp(np.array([th, th + h, th]), np.array([ph, ph, ph + h]))
    dth = np.array([Jt[1] - Jt[0], Jp[1] - Jp[0]]) / h
    dph = np.array([Jt[2] - Jt[0], Jp[2] - Jp[0]]) / (h * np.sin(th))
    return float(dth[0] * dph[1] - dth[1] * dph[0])


def stagnation_points(
    J: CurrentField, radius_cells: float = 1.5, samples: int = 64, refine: int = 5
) -> StagnationSet:
    """Isolated zeros of the current with their winding indices.

    Candidates are crossings of the two zero-line families together with
    cells of nonzero discrete winding; each is refined by Newton iteration
    on the interpolated field. The poles are tested directly from the
    limit of the field there. Zeros whose derivative is lost in round-off
    are reported as degenerate.
    """
    g = J.grid
    interp = CurrentInterpolant(J)
    if interp.scale <= DEGENERATE_TOL:
        raise DegenerateField("current vanishes identically")
    out = StagnationSet([], [])
    cell = _cell(g)
    # detection runs on a resampled grid; the native one can let the
    # current turn by more than pi between neighbouring nodes
    refine = max(1, int(refine))
    theta_f = np.linspace(g.theta[0], g.theta[-1], refine * (g.n_theta - 1) + 1)
    n_phi = refine * g.n_phi
    if refine == 1:
        Jt, Jp = interp.Jt, interp.Jp
    else:
        T, P = np.meshgrid(theta_f, 2 * np.pi * np.arange(n_phi) / n_phi, indexing="ij")
        Jt, Jp = interp(T, P)
    raw = {}
    for name, vals in (("theta", Jt), ("phi", Jp)):
        if np.abs(vals).max() <= DEGENERATE_TOL * interp.scale:
            setattr(out, f"{name}_degenerate", True)
            raw[name] = []
            continue
        pieces = find_contours(_periodic(vals), 0.0)
        raw[name] = pieces
        setattr(out, f"{name}_zero_contours", [_to_angles(theta_f, n_phi, p) for p in _stitch(pieces, n_phi)])

    candidates = []
    if not (out.theta_degenerate or out.phi_degenerate):
        hits = _intersections(_segments(raw["theta"]), _segments(raw["phi"]))
        seeds = [tuple(h) for h in _to_angles(theta_f, n_phi, hits)] if len(hits) else []
        dphi = 2 * np.pi / n_phi
        for i, k in np.argwhere(_cell_indices(Jt, Jp)):
            seeds.append((0.5 * (theta_f[i] + theta_f[i + 1]), (k + 0.5) * dphi))
        for north, cap in ((True, 0.0), (False, np.pi)):
            if _cap_index(Jt, Jp, north):
                edge = theta_f[0] if north else theta_f[-1]
                for frac in np.linspace(0.0, 1.0, 6):
                    for ph in np.arange(24) * np.pi / 12:
                        seeds.append((cap + frac * (edge - cap), ph))
        candidates = _newton(interp, _cluster(seeds, 1e-3 * cell))
    candidates.extend(_pole_points(interp))

    kept = []
    for th, ph, res in sorted(candidates, key=lambda c: c[2]):
        if res > RESIDUAL_TOL * interp.scale:
            continue
        if any(_angular_distance((th, ph), k[:2]) < MERGE * cell for k in kept):
            continue
        kept.append((th, ph, res))
    kept.sort()
    noise = (NOISE * interp.scale) ** 2
    for th, ph, res in kept:
        # crowded zeros get a loop that encloses only their own
        gap = min((_angular_distance((th, ph), k[:2]) for k in kept if k[:2] != (th, ph)), default=np.inf)
        radius = min(radius_cells, 0.4 * gap / cell)
        polar = min(th, np.pi - th) < 1e-9
        if not polar and abs(_jacobian_det(interp, th, ph)) < noise:
            idx = None
        else:
            try:
                idx = winding_number(interp, (th, ph), radius, samples)
            except AmbiguousIndex:
                idx = None
        cls = _classify(idx)
        out.points.append(StagnationPoint(float(th), float(ph), idx if cls != "degenerate" else None, cls, res))
    return out


# -- integral flow ----------------------------------------------------------


def _ring_value(values: np.ndarray, phi0: float) -> np.ndarray:
    """Trigonometric interpolation of each ring at ``phi0``."""
    n = values.shape[1]
    c = np.fft.fft(values, axis=1) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    basis = np.exp(1j * k * phi0)
    if n % 2 == 0:
        basis[n // 2] = np.cos(n // 2 * phi0)
    return (c @ basis).real if np.isrealobj(values) else c @ basis


def integral_flow(J: CurrentField, phi0: float = 0.0) -> float:
    """``int_0^pi sin(t) J_phi(t, phi0) dt`` by Gauss-Legendre quadrature."""
    g = J.grid
    Jp = np.real(J.J_phi)
    pos = (phi0 % (2 * np.pi)) * g.n_phi / (2 * np.pi)
    node = int(np.rint(pos)) % g.n_phi
    if abs(pos - np.rint(pos)) < 1e-9:
        column = Jp[:, node]
    else:
        column = _ring_value(Jp, phi0)
    return float(g.weights @ column)


def sign_changes(times, values) -> np.ndarray:
    """Zero crossings of a sampled series, located by linear interpolation."""
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    i = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
    return t[i] - v[i] * (t[i + 1] - t[i]) / (v[i + 1] - v[i])


def revival_period(times, overlap) -> float:
    """Time of the first revival maximum of an overlap series.

    The revival is the first local maximum after the global minimum that
    climbs back above the midpoint between the minimum and the initial value.
    """
    t = np.asarray(times, float)
    v = np.asarray(overlap, float)
    i0 = int(np.argmin(v))
    target = 0.5 * (v[0] + v[i0])
    for i in range(i0 + 1, len(v) - 1):
        if v[i] >= target and v[i] >= v[i - 1] and v[i] >= v[i + 1]:
            y0, y1, y2 = v[i - 1], v[i], v[i + 1]
            den = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / den if den else 0.0
            return float(t[i] + shift * (t[i + 1] - t[i]))
    raise ValueError("no revival maximum in the sampled window")


def unitary_overlap(psi0: np.ndarray, H: np.ndarray, times, window: float = 0.0) -> np.ndarray:
    """``|<psi0|exp(-iHt)|psi0>|^2`` averaged over ``[t - window/2, t + window/2]``.

    In the eigenbasis this is ``sum_ab p_a p_b cos(w_ab t) sinc(w_ab window/2)``.
    """
    E, V = np.linalg.eigh(np.asarray(H))
    p = np.abs(V.conj().T @ np.asarray(psi0)) ** 2
    w = E[:, None] - E[None, :]
    damp = np.sinc(w * window / (2 * np.pi)) if window > 0 else np.ones_like(w)
    weights = (p[:, None] * p[None, :] * damp).ravel()
    return np.cos(np.outer(np.asarray(times, float), w.ravel())) @ weights


@dataclass
class TunnellingFlow:
    times: np.ndarray
    flow: np.ndarray
    overlap: np.ndarray
    period: float
    period_estimate: float
    window: float

    @property
    def crossings(self) -> np.ndarray:
        return sign_changes(self.times, self.flow)

    def half_period_means(self) -> tuple[float, float]:
        """Mean ``|I|`` over ``[0, T/2)`` and ``[T/2, T]``."""
        T = self.period
        a = np.abs(self.flow[self.times < T / 2]).mean()
        b = np.abs(self.flow[(self.times >= T / 2) & (self.times <= T)]).mean()
        return float(a), float(b)


def tunnelling_flow(
    H: QuadraticHamiltonian,
    psi0: np.ndarray,
    irrep,
    diss: DissipationParams | None = None,
    s: int = 0,
    phi0: float = 0.0,
    periods: float = 1.2,
    samples: int = 241,
    window_fraction: float = 0.05,
    grid: SphereGrid | None = None,
) -> TunnellingFlow:
    """Integral flow across ``phi0`` over a two-well oscillation.

    The instantaneous flow is dominated by fast intra-well circulation, so
    states are averaged over a window of ``window_fraction`` times the
    estimated tunnelling period before the current is formed; this keeps
    the slow transfer between the wells and removes the fast part.

    The period is the revival of the window-averaged unitary overlap, so a
    damped run shares the time scale of its undamped counterpart.
    """
    irrep = _irrep(irrep)
    grid = default_grid(irrep) if grid is None else grid
    Hm = H.matrix(irrep)
    psi0 = np.asarray(psi0, dtype=complex)
    T0 = tunnelling_period_estimate(psi0, Hm)
    w = window_fraction * T0
    times = np.linspace(w / 2, periods * T0, samples)
    rho0 = np.outer(psi0, psi0.conj())
    trace = propagate(rho0, Hm, diss, times, window=w, irrep=irrep)
    flow = np.empty(samples)
    ov = np.empty(samples)
    for i, r in enumerate(trace.states):
        W = symbol(r, irrep, s, grid)
        flow[i] = integral_flow(total_current(H, diss, W), phi0)
        ov[i] = np.vdot(psi0, r @ psi0).real
    return TunnellingFlow(times, flow, ov, revival_period(times, unitary_overlap(psi0, Hm, times, w)), T0, w)


# -- output -----------------------------------------------------------------


def write_stagnation_csv(path, entries, digits: int = 17) -> None:
    """``entries``: iterable of ``(t, StagnationSet)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "phi", "index", "class"])
        for t, st in entries:
            for p in st.points:
                idx = "" if p.index is None else str(p.index)
                w.writerow([f"{t:.{digits}g}", f"{p.theta:.{digits}g}", f"{p.phi:.{digits}g}", idx, p.classification])


def write_flow_csv(path, times, values, digits: int = 17) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "I_phi0"])
        for t, v in zip(times, values):
            w.writerow([f"{t:.{digits}g}", f"{v:.{digits}g}"])
