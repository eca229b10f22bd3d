"""s-parametrized Weyl-Stratonovich map between operators and sphere functions.

``s = -1, 0, +1`` give the Q (Husimi), Wigner and P (Glauber-Sudarshan)
symbols. The symbol of ``A`` is ``Tr[A w^(s)(Omega)]`` with the kernel

    w^(s)(Omega) = sqrt(4 pi / (2S+1)) sum_{Kq} (C^{SS}_{SS,K0})^{-s} Y*_{Kq}(Omega) T_{Kq}

so that its spectrum is ``sqrt(4 pi/(2S+1)) C_K^{-s} Tr(A T_Kq^dagger)``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import BandOverflow, OrderingMismatch, OrderingUndefined
from .sphere import SphereGrid, SymbolField, legendre_table
from .spin_algebra import SpinIrrep, _irrep, highest_weight_cg, tensor_operators

__all__ = [
    "ORDERINGS",
    "check_ordering",
    "default_grid",
    "ordering_factors",
    "operator_coefficients",
    "kernel",
    "symbol",
    "coherent_symbol",
    "reconstruct",
    "overlap",
]

ORDERINGS = (-1, 0, 1)


def check_ordering(s) -> int:
    if s not in ORDERINGS:
        raise OrderingUndefined(f"ordering s={s!r} not in {{-1, 0, +1}}")
    return int(s)


def default_grid(irrep, headroom: int = 8) -> SphereGrid:
    """Grid with band limit ``2S + headroom``."""
    irrep = _irrep(irrep)
    return _cached_grid(irrep.two_s + headroom)


@lru_cache(maxsize=32)
def _cached_grid(k_max: int) -> SphereGrid:
    return SphereGrid(k_max)


@lru_cache(maxsize=96)
def _factors(irrep: SpinIrrep, s: int) -> np.ndarray:
    c = highest_weight_cg(irrep)
    out = c ** (-s) * math.sqrt(4 * math.pi / irrep.dim)
    out.setflags(write=False)
    return out


def ordering_factors(irrep, s) -> np.ndarray:
    """``sqrt(4 pi/(2S+1)) (C^{SS}_{SS,K0})^{-s}`` for ``K = 0..2S``."""
    return _factors(_irrep(irrep), check_ordering(s))


def operator_coefficients(A: np.ndarray, irrep) -> np.ndarray:
    """``A_Kq = Tr(A T_Kq^dagger)`` indexed ``[K, q + 2S]``."""
    T = tensor_operators(irrep)
    # T is real, so T^dagger = T^T and Tr(A T^T) = sum(A * T).
    return np.einsum("kqab,ab->kq", T, np.asarray(A))


def _embed(coeffs: np.ndarray, two_s: int, grid: SphereGrid) -> np.ndarray:
    if grid.k_max < two_s:
        raise BandOverflow(f"grid k_max={grid.k_max} below 2S={two_s}")
    out = np.zeros(grid.spectrum_shape, dtype=complex)
    km = grid.k_max
    out[: two_s + 1, km - two_s : km + two_s + 1] = coeffs
    return out


def symbol(A: np.ndarray, irrep, s, grid: SphereGrid | None = None) -> SymbolField:
    """s-ordered symbol of the operator ``A`` as a :class:`SymbolField`."""
    irrep = _irrep(irrep)
    s = check_ordering(s)
    A = np.asarray(A)
    if A.shape != (irrep.dim, irrep.dim):
        raise ValueError(f"operator shape {A.shape} does not match dim {irrep.dim}")
    grid = default_grid(irrep) if grid is None else grid
    c = operator_coefficients(A, irrep) * ordering_factors(irrep, s)[:, None]
    return SymbolField(grid, spectrum=_embed(c, irrep.two_s, grid), s=s, irrep=irrep)


def coherent_symbol(irrep, s, theta: float, phi: float, grid: SphereGrid | None = None, tol: float = 1e-14) -> SymbolField:
    """Symbol of the coherent-state projector ``|Omega><Omega|`` without operator matrices.

    At the north pole only ``q = 0`` survives, with ``A_K0 = sqrt((2K+1)/(2S+1)) C^{SS}_{SS,K0}``;
    the addition theorem moves it to ``Omega``. The grid may resolve fewer
    than ``2S`` degrees as long as the discarded part of the spectrum has
    relative energy below ``tol``.
    """
    irrep = _irrep(irrep)
    s = check_ordering(s)
    grid = default_grid(irrep) if grid is None else grid
    tS = irrep.two_s
    # sqrt((2K+1)/dim) from A_K0 times sqrt(4 pi/(2K+1)) from the addition theorem
    f = highest_weight_cg(irrep) * ordering_factors(irrep, s) * math.sqrt(4 * math.pi / irrep.dim)
    band = min(tS, grid.k_max)
    energy = f**2
    if energy[band + 1 :].sum() > tol * energy.sum():
        raise BandOverflow(f"grid k_max={grid.k_max} drops spectral energy above tolerance")
    P = legendre_table(band, np.array([math.cos(theta)]))[:, 0, :]
    km = grid.k_max
    spec = np.zeros(grid.spectrum_shape, dtype=complex)
    for q in range(band + 1):
        # conj(Y_Kq(Omega)) for q >= 0 and its mirror for -q
        y = P[q] * np.exp(-1j * q * phi)
        spec[: band + 1, km + q] = f[: band + 1] * y
        if q:
            spec[: band + 1, km - q] = f[: band + 1] * (-1) ** q * y.conj()
    return SymbolField(grid, spectrum=spec, s=s, irrep=irrep)


def reconstruct(W: SymbolField, irrep=None, s=None, tol: float = 1e-8) -> np.ndarray:
    """Operator whose s-symbol is ``W`` (inverse of :func:`symbol`).

    Equivalent to ``(2S+1)/(4 pi) int W^(s) w^(-s) dOmega``.
    """
    irrep = _irrep(irrep if irrep is not None else W.irrep)
    s = check_ordering(W.s if s is None else s)
    grid = W.grid
    spec = W.spectrum
    if grid.band_energy(spec, irrep.two_s) > tol:
        raise BandOverflow(f"symbol has energy above K = 2S = {irrep.two_s}")
    km = grid.k_max
    tS = irrep.two_s
    c = spec[: tS + 1, km - tS : km + tS + 1] / ordering_factors(irrep, s)[:, None]
    return np.einsum("kq,kqab->ab", c, tensor_operators(irrep))


def kernel(irrep, s, theta: float, phi: float) -> np.ndarray:
    """Stratonovich kernel ``w^(s)(theta, phi)`` as a matrix."""
    irrep = _irrep(irrep)
    tS = irrep.two_s
    P = legendre_table(tS, np.array([math.cos(theta)]))[:, 0, :]
    Y = np.zeros((tS + 1, 2 * tS + 1), dtype=complex)
    for q in range(tS + 1):
        Y[:, tS + q] = P[q] * np.exp(1j * q * phi)
        if q:
            Y[:, tS - q] = (-1) ** q * P[q] * np.exp(-1j * q * phi)
    c = ordering_factors(irrep, s)[:, None] * Y.conj()
    return np.einsum("kq,kqab->ab", c, tensor_operators(irrep))


def overlap(W_rho: SymbolField, W_A: SymbolField) -> complex:
    """``(2S+1)/(4 pi) int W_rho^(s) W_A^(-s) dOmega`` (= ``Tr(rho A)``)."""
    if W_rho.s is None or W_A.s is None or W_rho.s != -W_A.s:
        raise OrderingMismatch(f"overlap needs opposite orderings, got {W_rho.s} and {W_A.s}")
    if not W_rho.grid.same_as(W_A.grid):
        raise ValueError("symbols live on different grids")
    irrep = W_rho.irrep or W_A.irrep
    val = W_rho.grid.integrate(W_rho.values * W_A.values) * irrep.dim / (4 * math.pi)
    return complex(val)
