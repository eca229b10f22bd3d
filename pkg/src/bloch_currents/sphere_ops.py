"""Composable linear operators acting on fields on the sphere.

A :class:`SphereOperator` is an immutable linear combination of products
of primitive actions. Products compose right to left, as in operator
notation: ``mul("n_x") @ phi_casimir(eps)`` applies ``Phi`` first and then
multiplies by ``n_x``.

Derivatives, angular momenta and functions of the Casimir are applied in
the spectral domain. Pointwise multiplications happen on the grid. A
multiplication by ``n_x``, ``n_y``, ``n_z`` raises the band limit by one
and the result is re-projected; multiplication by functions that are not
band-limited (``tan``, ``1/sin``, frame components, ...) leaves grid
values only, after which only ``dphi`` and further multiplications may
follow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandOverflow
from .sphere import SphereGrid, SymbolField

__all__ = [
    "SphereOperator",
    "apply_operator",
    "identity",
    "mul",
    "dtheta",
    "dphi",
    "angular_momentum_op",
    "n_cross_L",
    "casimir",
    "casimir_inverse",
    "phi_casimir",
    "phi_casimir_inverse",
    "psi_degree",
    "radial_ladder",
    "project",
    "phi_function",
    "psi_function",
    "MULTIPLIERS",
]


def _frame(grid: SphereGrid):
    th, ph = grid.mesh()
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    return th, ph, ct, st, cp, sp


# name -> (function of grid, band increment or None if not band-limited)
MULTIPLIERS = {
    "n_x": (lambda g: g.unit_vectors()[0], 1),
    "n_y": (lambda g: g.unit_vectors()[1], 1),
    "n_z": (lambda g: g.unit_vectors()[2], 1),
    "cos": (lambda g: g.unit_vectors()[2], 1),
    "sin": (lambda g: np.sin(g.mesh()[0]), None),
    "tan": (lambda g: np.tan(g.mesh()[0]), None),
    "cot": (lambda g: 1.0 / np.tan(g.mesh()[0]), None),
    "csc": (lambda g: 1.0 / np.sin(g.mesh()[0]), None),
    "cos2_csc": (lambda g: np.cos(g.mesh()[0]) ** 2 / np.sin(g.mesh()[0]), None),
    "e_theta_x": (lambda g: _frame(g)[2] * _frame(g)[4], None),
    "e_theta_y": (lambda g: _frame(g)[2] * _frame(g)[5], None),
    "e_theta_z": (lambda g: -_frame(g)[3], None),
    "e_phi_x": (lambda g: -_frame(g)[5], None),
    "e_phi_y": (lambda g: _frame(g)[4], None),
    "e_phi_z": (lambda g: np.zeros(g.shape), None),
}

_AXES = {"x": 0, "y": 1, "z": 2}


def phi_function(K, eps: float) -> np.ndarray:
    """``Phi`` at Casimir eigenvalue ``x^2 = K(K+1)``.

    ``Phi = [2 - eps^2 (2x^2+1) + 2 sqrt(1 - eps^2 (2x^2+1) + eps^4 x^4)]^(1/2)``.
    The radicand factorizes as ``(1 - eps^2 K^2)(1 - eps^2 (K+1)^2)``, so
    ``Phi_K = (Psi_K + Psi_{K+1}) / 2`` with ``Psi_K = 2 sqrt(1 - eps^2 K^2)``.
    Both radicands are clipped at zero above the physical band.
    """
    K = np.asarray(K, dtype=float)
    x2 = K * (K + 1)
    rad = np.clip(1 - eps**2 * (2 * x2 + 1) + eps**4 * x2**2, 0.0, None)
    return np.sqrt(np.clip(2 - eps**2 * (2 * x2 + 1) + 2 * np.sqrt(rad), 0.0, None))


def psi_function(K, eps: float) -> np.ndarray:
    """``Psi_K = 2 sqrt(1 - eps^2 K^2)``, zero for ``K >= 1/eps``."""
    K = np.asarray(K, dtype=float)
    return 2 * np.sqrt(np.clip(1 - (eps * K) ** 2, 0.0, None))


def _safe_inverse(v):
    out = np.zeros_like(v)
    nz = v > 0
    out[nz] = 1.0 / v[nz]
    return out


@dataclass(frozen=True)
class _Prim:
    kind: str
    arg: object = None


@dataclass(frozen=True)
class SphereOperator:
    """Linear combination ``sum_i c_i P_i`` of primitive products.

    ``terms`` holds ``(coefficient, (p_1, ..., p_n))`` with ``p_n`` applied
    first.
    """

    terms: tuple = ()

    def __matmul__(self, other: "SphereOperator") -> "SphereOperator":
        return SphereOperator(
            tuple((ca * cb, pa + pb) for ca, pa in self.terms for cb, pb in other.terms)
        )

    def __add__(self, other: "SphereOperator") -> "SphereOperator":
        return SphereOperator(self.terms + other.terms)

    def __sub__(self, other: "SphereOperator") -> "SphereOperator":
        return self + (-1.0) * other

    def __mul__(self, c) -> "SphereOperator":
        if isinstance(c, SphereOperator):
            return NotImplemented
        return SphereOperator(tuple((complex(c) * a, p) for a, p in self.terms))

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __call__(self, W: SymbolField) -> SymbolField:
        return apply_operator(self, W)

    def max_band_increase(self) -> int:
        """Upper bound on the band growth over all terms."""
        best = 0
        for _, prims in self.terms:
            inc = 0
            for p in prims:
                if p.kind == "mul":
                    inc += MULTIPLIERS[p.arg][1] or 0
                elif p.kind in ("nxL", "D+"):
                    inc += 1
            best = max(best, inc)
        return best


def _single(kind, arg=None) -> SphereOperator:
    return SphereOperator(((1.0 + 0j, (_Prim(kind, arg),)),))


def identity() -> SphereOperator:
    return SphereOperator(((1.0 + 0j, ()),))


def mul(name: str) -> SphereOperator:
    if name not in MULTIPLIERS:
        raise KeyError(f"unknown multiplier {name!r}")
    return _single("mul", name)


def dtheta() -> SphereOperator:
    return _single("dtheta")


def dphi() -> SphereOperator:
    return _single("dphi")


def angular_momentum_op(k: str) -> SphereOperator:
    """``L_k`` for ``k`` in ``x, y, z, +, -`` (``L_z = -i d/dphi``)."""
    if k not in ("x", "y", "z", "+", "-"):
        raise KeyError(f"unknown component {k!r}")
    return _single("L", k)


def n_cross_L(k: str) -> SphereOperator:
    """``(n x L)_k = i (e_theta,k d_theta + e_phi,k sin^-1 d_phi)``."""
    return _single("nxL", _AXES[k])


def casimir() -> SphereOperator:
    return _single("diag", ("L2", None))


def casimir_inverse() -> SphereOperator:
    """Inverse Casimir on ``K >= 1``; annihilates the ``K = 0`` component."""
    return _single("diag", ("L2inv", None))


def phi_casimir(eps: float) -> SphereOperator:
    return _single("diag", ("Phi", float(eps)))


def phi_casimir_inverse(eps: float) -> SphereOperator:
    return _single("diag", ("Phiinv", float(eps)))


def psi_degree(eps: float) -> SphereOperator:
    """Diagonal ``Psi_K = 2 sqrt(1 - eps^2 K^2)`` in the degree ``K``."""
    return _single("diag", ("Psi", float(eps)))


def radial_ladder(direction: str) -> SphereOperator:
    """Raising (``"+"``) or lowering (``"-"``) part in ``K`` of ``cos + (1/2) sin d_theta``."""
    if direction not in ("+", "-"):
        raise KeyError(direction)
    return _single("D" + direction)


def project(band: int) -> SphereOperator:
    """Discard degrees above ``band``."""
    return _single("project", int(band))


# -- engine ------------------------------------------------------------


class _State:
    __slots__ = ("grid", "values", "spectrum", "band")

    def __init__(self, grid, values=None, spectrum=None, band=None):
        self.grid = grid
        self.values = values
        self.spectrum = spectrum
        self.band = band

    def spec(self, what: str):
        if self.band is None:
            raise BandOverflow(f"{what} needs a band-limited field; apply it before non-polynomial multipliers")
        if self.spectrum is None:
            self.spectrum = self.grid.forward(self.values)
        return self.spectrum

    def vals(self):
        if self.values is None:
            self.values = self.grid.backward(self.spectrum)
        return self.values


def _field_band(W: SymbolField) -> int:
    deg = W.grid.degrees()
    mask = np.abs(W.spectrum) > 1e-13 * max(np.abs(W.spectrum).max(), 1e-300)
    return int(deg[mask].max()) if mask.any() else 0


def _ladder_coefficients(grid: SphereGrid):
    K = grid.degrees().astype(float)
    q = grid.orders().astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.sqrt(np.clip((K**2 - q**2) / ((2 * K - 1) * (2 * K + 1)), 0.0, None))
    a[0] = 0.0
    a[np.abs(q) > K] = 0.0
    return K, q, a


def _apply_diag(st: _State, kind: str, arg):
    c = st.spec(kind)
    K = st.grid.degrees().astype(float)
    if kind == "L2":
        f = K * (K + 1)
    elif kind == "L2inv":
        f = _safe_inverse(K * (K + 1))
    elif kind == "Phi":
        f = phi_function(K, arg)
    elif kind == "Phiinv":
        f = _safe_inverse(phi_function(K, arg))
    elif kind == "Psi":
        f = psi_function(K, arg)
    else:  # pragma: no cover
        raise KeyError(kind)
    return _State(st.grid, spectrum=c * f, band=st.band)


def _apply_L(st: _State, k: str):
    c = st.spec("L")
    grid = st.grid
    K, q, _ = _ladder_coefficients(grid)
    out_p = np.zeros_like(c)
    out_m = np.zeros_like(c)
    # L+ Y_Kq = sqrt((K-q)(K+q+1)) Y_K,q+1 ; L- Y_Kq = sqrt((K+q)(K-q+1)) Y_K,q-1
    up = np.sqrt(np.clip((K - q) * (K + q + 1), 0.0, None))
    dn = np.sqrt(np.clip((K + q) * (K - q + 1), 0.0, None))
    out_p[:, 1:] = (up * c)[:, :-1]
    out_m[:, :-1] = (dn * c)[:, 1:]
    if k == "z":
        res = q * c
    elif k == "+":
        res = out_p
    elif k == "-":
        res = out_m
    elif k == "x":
        res = 0.5 * (out_p + out_m)
    else:
        res = (out_p - out_m) / 2j
    return _State(grid, spectrum=res, band=st.band)


def _apply_D(st: _State, direction: str):
    c = st.spec("D")
    grid = st.grid
    K, _, a = _ladder_coefficients(grid)
    out = np.zeros_like(c)
    if direction == "+":
        # Y_K -> (K+2)/2 a_{K+1} Y_{K+1}
        band = st.band + 1
        if band > grid.k_max:
            raise BandOverflow(f"band {band} exceeds k_max={grid.k_max}")
        out[1:] = ((K[:-1] + 2) / 2 * a[1:]) * c[:-1]
    else:
        # Y_K -> -(K-1)/2 a_K Y_{K-1}
        band = st.band
        out[:-1] = (-(K[1:] - 1) / 2 * a[1:]) * c[1:]
    return _State(grid, spectrum=out, band=band)


def _dphi_grid(values, n_phi):
    F = np.fft.fft(values, axis=1)
    q = np.fft.fftfreq(n_phi, 1.0 / n_phi)
    if n_phi % 2 == 0:
        q[n_phi // 2] = 0.0
    return np.fft.ifft(1j * q * F, axis=1)


def _apply_prim(st: _State, p: _Prim) -> _State:
    grid = st.grid
    kind = p.kind
    if kind == "mul":
        func, inc = MULTIPLIERS[p.arg]
        vals = func(grid) * st.vals()
        if inc is None or st.band is None:
            return _State(grid, values=vals, band=None)
        band = st.band + inc
        if band > grid.k_max:
            raise BandOverflow(f"band {band} exceeds k_max={grid.k_max} after multiplying by {p.arg}")
        return _State(grid, values=vals, band=band)
    if kind == "dphi":
        if st.band is None:
            return _State(grid, values=_dphi_grid(st.vals(), grid.n_phi), band=None)
        return _State(grid, spectrum=1j * grid.orders() * st.spec("dphi"), band=st.band)
    if kind == "dtheta":
        return _State(grid, values=grid.backward_dtheta(st.spec("dtheta")), band=None)
    if kind == "nxL":
        c = st.spec("n x L")
        band = st.band + 1
        if band > grid.k_max:
            raise BandOverflow(f"band {band} exceeds k_max={grid.k_max} in (n x L)")
        _, _, ct, sn, cp, sp = _frame(grid)
        e_t = (ct * cp, ct * sp, -sn)[p.arg]
        e_p = (-sp, cp, np.zeros_like(sn))[p.arg]
        g_t = grid.backward_dtheta(c)
        g_p = grid.backward(1j * grid.orders() * c) / sn
        return _State(grid, values=1j * (e_t * g_t + e_p * g_p), band=band)
    if kind == "L":
        return _apply_L(st, p.arg)
    if kind == "diag":
        return _apply_diag(st, *p.arg)
    if kind in ("D+", "D-"):
        return _apply_D(st, kind[1])
    if kind == "project":
        c = st.spec("project").copy()
        c[p.arg + 1 :] = 0.0
        return _State(grid, spectrum=c, band=min(st.band, p.arg))
    raise KeyError(kind)  # pragma: no cover


def apply_operator(op: SphereOperator, W: SymbolField) -> SymbolField:
    """Apply ``op`` to ``W``; terms are summed in their stored order."""
    grid = W.grid
    band0 = _field_band(W)
    acc_spec = None
    acc_vals = None
    for coef, prims in op.terms:
        st = _State(grid, values=W._values, spectrum=W._spectrum, band=band0)
        for p in reversed(prims):
            st = _apply_prim(st, p)
        if st.band is not None and st.spectrum is not None and st.values is None:
            acc_spec = coef * st.spectrum if acc_spec is None else acc_spec + coef * st.spectrum
        else:
            v = coef * st.vals()
            acc_vals = v if acc_vals is None else acc_vals + v
    if acc_vals is None and acc_spec is None:
        return W.with_spectrum(np.zeros(grid.spectrum_shape, dtype=complex))
    if acc_vals is None:
        return W.with_spectrum(acc_spec)
    if acc_spec is not None:
        acc_vals = acc_vals + grid.backward(acc_spec)
    return W.with_values(acc_vals)
