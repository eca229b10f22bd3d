"""Phase-space probability currents for quadratic Hamiltonians and damping.

All currents are physical components on the unit sphere, so that
``dW/dt = -div J`` with

    div J = (1/sin t) d_t (sin t J_t) + (1/sin t) d_p J_p.

Unitary part, with ``U_i = a_i W + (2/eps) sum_k b_ik G_k W``::

    J_theta = e_phi . U,        J_phi = -e_theta . U

The ``G_k`` are the s-dependent operators realizing ``{S_k, .}/2`` on
symbols, ``symbol({S_k, A}/2) = G_k W_A / (2 eps)``. For ``s = +1`` the
identity holds after discarding degrees above ``2S``, which are invisible
to the operator map.

Damping part: for ``s = +-1``::

    J_theta = g/2 [ sin t W / eps - d_t((1 + 2 nbar +- cos t) W) ]
    J_phi   = -g/2 [ (2 nbar + 1) cos^2 t / sin t +- cot t ] d_p W

and for ``s = 0``::

    J_theta = g/2 [ sin t Psi W / (2 eps) - (2 nbar + 1) d_t W + d_t Y / eps ]
    J_phi   = -g/2 [ (2 nbar + 1) cos^2 t / sin t d_p W - d_p Y / (eps sin t) ]

where ``Psi`` is diagonal in the degree, ``Psi_K = 2 sqrt(1 - eps^2 K^2)``,
and ``Y = L^-2 (D+ Psi - Psi D+) W`` with ``D+`` the raising part of
``cos t + (1/2) sin t d_t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DissipationParams, QuadraticHamiltonian, kerr
from .errors import AxisUnsupported, PoleSingularity
from .phasespace_map import check_ordering, symbol
from .sphere import SphereGrid, SymbolField
from .sphere_ops import (
    SphereOperator,
    _dphi_grid,
    _safe_inverse,
    angular_momentum_op,
    apply_operator,
    casimir,
    casimir_inverse,
    dtheta,
    identity,
    mul,
    n_cross_L,
    phi_casimir,
    phi_casimir_inverse,
    phi_function,
    project,
    psi_degree,
    radial_ladder,
)
from .spin_algebra import _irrep, angular_momentum

__all__ = [
    "CurrentField",
    "G_operator",
    "unitary_current",
    "kerr_current",
    "dissipative_current",
    "total_current",
    "dissipator_symbol",
    "second_kind_operator",
    "second_kind_form",
    "classical_hamiltonian_symbol",
    "classical_velocity",
    "divergence",
    "continuity_residual",
    "anticommutator_symbol_coefficient",
]

AXES = ("x", "y", "z")


@dataclass
class CurrentField:
    """Physical components ``(J_theta, J_phi)`` on a grid."""

    grid: SphereGrid
    J_theta: np.ndarray
    J_phi: np.ndarray
    s: int | None = None
    irrep: object = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.J_theta = np.asarray(self.J_theta)
        self.J_phi = np.asarray(self.J_phi)

    @property
    def imaginary_residue(self) -> float:
        scale = max(np.abs(self.J_theta).max(), np.abs(self.J_phi).max(), 1e-300)
        imag = max(np.abs(np.imag(self.J_theta)).max(), np.abs(np.imag(self.J_phi)).max())
        return float(imag / scale)

    def real(self) -> "CurrentField":
        return CurrentField(
            self.grid, np.real(self.J_theta).copy(), np.real(self.J_phi).copy(), self.s, self.irrep, dict(self.provenance)
        )

    def magnitude(self) -> np.ndarray:
        return np.hypot(np.abs(self.J_theta), np.abs(self.J_phi))

    def __add__(self, other: "CurrentField") -> "CurrentField":
        if not self.grid.same_as(other.grid):
            raise ValueError("currents live on different grids")
        prov = {**other.provenance, **self.provenance}
        return CurrentField(self.grid, self.J_theta + other.J_theta, self.J_phi + other.J_phi, self.s, self.irrep, prov)

    def scaled(self, c: float) -> "CurrentField":
        return CurrentField(self.grid, c * self.J_theta, c * self.J_phi, self.s, self.irrep, dict(self.provenance))


def _context(W: SymbolField, s=None):
    s = W.s if s is None else s
    s = check_ordering(s)
    if W.s is not None and W.s != s:
        raise ValueError(f"symbol has s={W.s} but current requested for s={s}")
    if W.irrep is None:
        raise ValueError("symbol carries no irrep")
    return s, W.irrep


def G_operator(irrep, s, k: str) -> SphereOperator:
    """``G_k`` for ordering ``s``.

    ``s = +-1``: ``n_k (1 +- eps) +- i eps (n x L)_k``.
    ``s = 0``: ``n_k Phi/2 - (eps^2/2) [n_k + 2i (n x L)_k] Phi^-1``.
    """
    irrep = _irrep(irrep)
    s = check_ordering(s)
    eps = irrep.eps
    nk = mul("n_" + k)
    if s != 0:
        return (1 + s * eps) * nk + (s * 1j * eps) * n_cross_L(k)
    Pi = phi_casimir_inverse(eps)
    return 0.5 * (nk @ phi_casimir(eps)) - 0.5 * eps**2 * (nk @ Pi) - 1j * eps**2 * (n_cross_L(k) @ Pi)


def _frame(grid):
    th, ph = grid.mesh()
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    e_theta = np.stack([ct * cp, ct * sp, -st])
    e_phi = np.stack([-sp, cp, np.zeros_like(st)])
    return e_theta, e_phi


def _U_fields(H: QuadraticHamiltonian, W: SymbolField, s: int, irrep):
    eps = irrep.eps
    a = H.a_vec
    b = H.b_mat
    GW = [None, None, None]
    for k in range(3):
        if np.any(b[:, k]):
            GW[k] = apply_operator(G_operator(irrep, s, AXES[k]), W).values
    U = []
    for i in range(3):
        u = a[i] * W.values
        for k in range(3):
            if b[i, k]:
                u = u + (2.0 / eps) * b[i, k] * GW[k]
        U.append(u)
    return np.array(U)


def unitary_current(H: QuadraticHamiltonian, W: SymbolField, s=None) -> CurrentField:
    """Current of ``-i[H, rho]`` for ``H = a.S + sum b_jk {S_j, S_k}``."""
    s, irrep = _context(W, s)
    U = _U_fields(H, W, s, irrep)
    e_theta, e_phi = _frame(W.grid)
    Jt = np.einsum("kij,kij->ij", e_phi, U)
    Jp = -np.einsum("kij,kij->ij", e_theta, U)
    prov = {"hamiltonian": H.to_dict(), "part": "unitary"}
    return CurrentField(W.grid, Jt, Jp, s, irrep, prov)


def kerr_current(chi: float, W: SymbolField, s=None) -> CurrentField:
    """Closed form for ``H = chi S_z^2``: ``J_theta = 0`` and

    ``J_phi^(+-1) = chi sin t [ (2S+1 +- 1) cos t W +- sin t d_t W ]``,
    ``J_phi^(0) = chi sin t [ cos t Phi W / (2 eps) - (eps/2)(cos t + 2 sin t d_t) Phi^-1 W ]``.
    """
    s, irrep = _context(W, s)
    eps = irrep.eps
    grid = W.grid
    th, _ = grid.mesh()
    ct, st = np.cos(th), np.sin(th)
    c = W.spectrum
    if s != 0:
        Jp = chi * st * ((1 + s * eps) / eps * ct * W.values + s * st * grid.backward_dtheta(c))
    else:
        ph = phi_function(grid.degrees(), eps)
        PW = grid.backward(c * ph)
        c_inv = c * _safe_inverse(ph)
        PiW = grid.backward(c_inv)
        dPiW = grid.backward_dtheta(c_inv)
        Jp = chi * st * (ct * PW / (2 * eps) - 0.5 * eps * (ct * PiW + 2 * st * dPiW))
    prov = {"hamiltonian": kerr(chi).to_dict(), "part": "unitary"}
    return CurrentField(grid, np.zeros(grid.shape, dtype=Jp.dtype), Jp, s, irrep, prov)


def _psi_commutator_potential(irrep) -> SphereOperator:
    eps = irrep.eps
    Dp = radial_ladder("+")
    Ps = psi_degree(eps)
    return casimir_inverse() @ (Dp @ Ps - Ps @ Dp)


def dissipative_current(diss: DissipationParams, W: SymbolField, s=None) -> CurrentField:
    """Current of the thermal damping terms of the master equation."""
    s, irrep = _context(W, s)
    eps = irrep.eps
    grid = W.grid
    g = diss.gamma
    nb = diss.nbar
    th, _ = grid.mesh()
    ct, st = np.cos(th), np.sin(th)
    c = W.spectrum
    dW_dt = grid.backward_dtheta(c)
    dW_dp = grid.backward(1j * grid.orders() * c)
    cos2_csc = ct**2 / st
    prov = {"dissipation": {"gamma": g, "nbar": nb}, "part": "dissipative"}
    if g == 0:
        z = np.zeros(grid.shape, dtype=complex)
        return CurrentField(grid, z, z.copy(), s, irrep, prov)
    if s != 0:
        # d_t((1 + 2nb +- cos) W) = (1 + 2nb +- cos) d_t W -+ sin W
        Jt = 0.5 * g * (st * W.values / eps - (1 + 2 * nb + s * ct) * dW_dt + s * st * W.values)
        Jp = -0.5 * g * ((2 * nb + 1) * cos2_csc + s * ct / st) * dW_dp
    else:
        PsiW = apply_operator(psi_degree(eps), W).values
        Ysp = apply_operator(_psi_commutator_potential(irrep), W).spectrum
        dY_dt = grid.backward_dtheta(Ysp)
        dY_dp = grid.backward(1j * grid.orders() * Ysp)
        Jt = 0.5 * g * (st * PsiW / (2 * eps) - (2 * nb + 1) * dW_dt + dY_dt / eps)
        Jp = -0.5 * g * ((2 * nb + 1) * cos2_csc * dW_dp - dY_dp / (eps * st))
    return CurrentField(grid, Jt, Jp, s, irrep, prov)


def total_current(H: QuadraticHamiltonian | None, diss: DissipationParams | None, W: SymbolField, s=None) -> CurrentField:
    s, irrep = _context(W, s)
    parts = []
    if H is not None:
        parts.append(unitary_current(H, W, s))
    if diss is not None and diss.active:
        parts.append(dissipative_current(diss, W, s))
    if not parts:
        z = np.zeros(W.grid.shape, dtype=complex)
        return CurrentField(W.grid, z, z.copy(), s, irrep, {})
    J = parts[0]
    for p in parts[1:]:
        J = J + p
    J.provenance["part"] = "total"
    return J


def dissipator_symbol(W: SymbolField, which: int, s=None) -> SymbolField:
    """Symbol of ``L1(rho)`` (``which=1``) or ``L2(rho)`` (``which=2``) from the symbol of ``rho``.

    ``s = +-1``: ``-L^2[(1 +- sigma cos t) W] + L_z^2 W - sigma (2 cos t + sin t d_t) W / eps``,
    ``s = 0``:   ``-L^2 W + L_z^2 W - sigma (Psi D+ + D- Psi) W / eps``,
    with ``sigma = +1`` for ``L1`` and ``-1`` for ``L2``. The result is
    truncated to degrees ``<= 2S``.
    """
    s, irrep = _context(W, s)
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    sigma = 1 if which == 1 else -1
    eps = irrep.eps
    Lz2 = angular_momentum_op("z") @ angular_momentum_op("z")
    D = radial_ladder("+") + radial_ladder("-")
    if s != 0:
        op = (
            -1.0 * (casimir() @ (identity() + (s * sigma) * mul("cos")))
            + Lz2
            - (2 * sigma / eps) * D
        )
    else:
        Ps = psi_degree(eps)
        op = -1.0 * casimir() + Lz2 - (sigma / eps) * (Ps @ radial_ladder("+") + radial_ladder("-") @ Ps)
    return apply_operator(project(irrep.two_s) @ op, W)


def anticommutator_symbol_coefficient(irrep, s) -> float:
    """``C`` in ``symbol({S_i, S_j}) = C n_i n_j + delta_ij (2S(S+1) - C)/3``.

    ``C^(+-1) = [S(2S-1)]^((1-s)/2) [(2S+3)(S+1)]^((1+s)/2)`` and
    ``C^(0) = sqrt(S(2S-1)(2S+3)(S+1))``.
    """
    irrep = _irrep(irrep)
    s = check_ordering(s)
    S = irrep.S
    lo = S * (2 * S - 1)
    hi = (2 * S + 3) * (S + 1)
    return float(lo ** ((1 - s) / 2) * hi ** ((1 + s) / 2))


def second_kind_operator(irrep, s) -> SphereOperator:
    """``Gamma_z = G_z / (eps n_z)`` written without the division.

    ``s = +-1``: ``(1 +- eps)/eps +- tan t d_t``;
    ``s = 0``:  ``Phi/(2 eps) - (eps/2)(1 + 2 tan t d_t) Phi^-1``.
    """
    irrep = _irrep(irrep)
    s = check_ordering(s)
    eps = irrep.eps
    tdt = mul("tan") @ dtheta()
    if s != 0:
        return ((1 + s * eps) / eps) * identity() + s * tdt
    Pi = phi_casimir_inverse(eps)
    return (0.5 / eps) * phi_casimir(eps) - 0.5 * eps * Pi - eps * (tdt @ Pi)


def second_kind_form(b_z: float, W: SymbolField, s=None, axis: str = "z") -> SymbolField:
    """``dW/dt`` for ``H = b_z S_z^2`` as a bracket with the exact symbol of ``H``.

    ``dW/dt = {Gamma_z W, W_H} / C`` with ``{f, g} = (d_p f d_t g - d_t f d_p g)/sin t``
    and ``C`` the ``n_z^2`` coefficient of ``symbol({S_z, S_z})``. At grid
    rings on the equator, where ``tan t`` is infinite, ``n_z Gamma_z W =
    G_z W / eps`` is used instead. For ``s = +1`` only degrees ``<= 2S`` are
    meaningful.
    """
    if axis != "z":
        raise AxisUnsupported(f"only the z axis is implemented, got {axis!r}")
    s, irrep = _context(W, s)
    grid = W.grid
    Sz = angular_momentum(irrep)[2]
    WH = symbol(b_z * (Sz @ Sz), irrep, s, grid)
    dWH_dt = grid.backward_dtheta(WH.spectrum)
    th, _ = grid.mesh()
    equator = np.abs(np.cos(grid.theta)) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        GW = apply_operator(second_kind_operator(irrep, s), W).values
    if equator.any():
        alt = apply_operator(G_operator(irrep, s, "z"), W).values / irrep.eps
        # there d_t W_H = -2 c1 b_z cos t sin t -> use the product n_z Gamma W directly
        c1 = 0.5 * anticommutator_symbol_coefficient(irrep, s)
        dWH_over_cos = -2 * c1 * b_z * np.sin(th)
        GW = np.where(equator[:, None], 0.0, GW)
        prod = _dphi_grid(GW, grid.n_phi) * dWH_dt
        prod_eq = _dphi_grid(alt, grid.n_phi) * dWH_over_cos
        prod = np.where(equator[:, None], prod_eq, prod)
    else:
        prod = _dphi_grid(GW, grid.n_phi) * dWH_dt
    # W_H is zonal, so the d_t f d_p g term vanishes
    val = prod / np.sin(th) / anticommutator_symbol_coefficient(irrep, s)
    return W.with_values(val)


def classical_hamiltonian_symbol(H: QuadraticHamiltonian, grid: SphereGrid, irrep) -> np.ndarray:
    """Leading large-spin symbol ``a.n / (2 eps) + sum b_jk n_j n_k / (2 eps^2)``."""
    irrep = _irrep(irrep)
    eps = irrep.eps
    n = grid.unit_vectors()
    return np.einsum("i,ijk->jk", H.a_vec, n) / (2 * eps) + np.einsum("ij,iab,jab->ab", H.b_mat, n, n) / (2 * eps**2)


def classical_velocity(H: QuadraticHamiltonian, irrep, grid: SphereGrid) -> CurrentField:
    """``v = 2 eps (d_p W_H / sin t, -d_t W_H)`` with the leading-order symbol."""
    irrep = _irrep(irrep)
    eps = irrep.eps
    n = grid.unit_vectors()
    e_theta, e_phi = _frame(grid)
    # gradient of the polynomial symbol: d/dn_i W_H, then project on the frame
    grad = H.a_vec[:, None, None] / (2 * eps) + np.einsum("ij,jab->iab", H.b_mat, n) / eps**2
    dWt = np.einsum("iab,iab->ab", e_theta, grad)
    dWp_over_sin = np.einsum("iab,iab->ab", e_phi, grad)
    prov = {"hamiltonian": H.to_dict(), "part": "classical"}
    return CurrentField(grid, 2 * eps * dWp_over_sin, -2 * eps * dWt, 0, irrep, prov)


def divergence(J: CurrentField, pole_check: bool = True) -> SymbolField:
    """``(1/sin t) d_t (sin t J_t) + (1/sin t) d_p J_p`` on the grid.

    ``sin t J_t`` is smooth for smooth currents and is differentiated
    spectrally; ``d_p`` acts ring by ring.
    """
    grid = J.grid
    th, _ = grid.mesh()
    st = np.sin(th)
    a = grid.backward_dtheta(grid.forward(st * J.J_theta))
    b = _dphi_grid(J.J_phi, grid.n_phi)
    div = (a + b) / st
    if pole_check:
        _pole_diagnostic(div)
    return SymbolField(grid, values=div, s=J.s, irrep=J.irrep)


def _pole_diagnostic(values: np.ndarray) -> bool:
    mag = np.abs(values)
    med = np.median(mag)
    if med == 0:
        return False
    rings = np.r_[0:2, values.shape[0] - 2 : values.shape[0]]
    if mag[rings].max() > 1e6 * med:
        warnings.warn("divergence blows up next to a pole", PoleSingularity, stacklevel=3)
        return True
    return False


def continuity_residual(rhs: SymbolField, J: CurrentField, band: int | None = None) -> float:
    """``||rhs + div J|| / ||rhs||`` after truncating both to degrees ``<= band``."""
    grid = rhs.grid
    band = (J.irrep.two_s if J.irrep is not None else grid.k_max) if band is None else band
    d = divergence(J).spectrum + rhs.spectrum
    d[band + 1 :] = 0.0
    r = rhs.spectrum.copy()
    r[band + 1 :] = 0.0
    num = math.sqrt(float((np.abs(d) ** 2).sum()))
    den = math.sqrt(float((np.abs(r) ** 2).sum()))
    return num / den if den > 0 else num
