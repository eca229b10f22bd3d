"""Finite-spin operator algebra.

Operators are dense ``numpy`` arrays acting on the ``2S+1`` dimensional
irrep. Basis states are ordered with ``m`` descending, so index ``i``
holds ``|S, S - i>`` and the highest-weight state is ``e_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import InvalidQuantumNumbers, OutOfBand

__all__ = [
    "SpinIrrep",
    "angular_momentum",
    "clebsch_gordan",
    "clebsch_gordan_exact",
    "highest_weight_cg",
    "tensor_operator",
    "tensor_operators",
    "coherent_state",
    "basis_state",
    "is_hermitian",
    "random_density_matrix",
    "random_hermitian",
]


def _twice(x, what="value"):
    """Return ``2x`` as an int, or raise if ``x`` is not a half-integer."""
    y = 2 * Fraction(x).limit_denominator(1000)
    if y.denominator != 1 or abs(float(y) - 2 * float(x)) > 1e-9:
        raise InvalidQuantumNumbers(f"{what}={x!r} is not a half-integer")
    return int(y)


@dataclass(frozen=True)
class SpinIrrep:
    """Irreducible representation of SU(2) with spin ``S``.

    Stored as ``two_s = 2S`` so that half-integer spins hash exactly.
    """

    two_s: int

    def __post_init__(self):
        if not isinstance(self.two_s, (int, np.integer)) or self.two_s < 0:
            raise InvalidQuantumNumbers(f"2S must be a nonnegative integer, got {self.two_s!r}")
        object.__setattr__(self, "two_s", int(self.two_s))

    @classmethod
    def from_spin(cls, S) -> "SpinIrrep":
        return cls(_twice(S, "S"))

    @property
    def S(self) -> float:
        return self.two_s / 2

    @property
    def dim(self) -> int:
        return self.two_s + 1

    @property
    def eps(self) -> float:
        return 1.0 / self.dim

    @property
    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order (descending)."""
        return self.S - np.arange(self.dim)

    def __repr__(self):
        return f"SpinIrrep(S={Fraction(self.two_s, 2)})"


def _irrep(irrep) -> SpinIrrep:
    return irrep if isinstance(irrep, SpinIrrep) else SpinIrrep.from_spin(irrep)


@lru_cache(maxsize=64)
def _angular_momentum(irrep: SpinIrrep):
    S = irrep.S
    m = irrep.m_values
    Sz = np.diag(m).astype(complex)
    # S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>; |m+1> sits one index above |m>.
    ladder = np.sqrt(S * (S + 1) - m[1:] * (m[1:] + 1))
    Sp = np.diag(ladder, k=1).astype(complex)
    Sm = Sp.conj().T.copy()
    Sx = (Sp + Sm) / 2
    Sy = (Sp - Sm) / 2j
    mats = (Sx, Sy, Sz, Sp, Sm)
    for a in mats:
        a.setflags(write=False)
    return mats


def angular_momentum(irrep):
    """Return ``(Sx, Sy, Sz, Splus, Sminus)`` for the irrep.

    The returned arrays are read-only and shared between calls.
    """
    return _angular_momentum(_irrep(irrep))


def _check_pair(j, m, name):
    tj = _twice(j, f"j{name}")
    tm = _twice(m, f"m{name}")
    if tj < 0:
        raise InvalidQuantumNumbers(f"j{name}={j} is negative")
    if abs(tm) > tj:
        raise InvalidQuantumNumbers(f"|m{name}|={abs(m)} exceeds j{name}={j}")
    if (tj - tm) % 2:
        raise InvalidQuantumNumbers(f"j{name}={j} and m{name}={m} differ by a non-integer")
    return tj, tm


def _racah_limits(tj1, tm1, tj2, tm2, tJ):
    """Summation range of the Racah series (undoubled k)."""
    kmin = max(0, (tj2 - tJ - tm1) // 2, (tj1 - tJ + tm2) // 2)
    kmax = min((tj1 + tj2 - tJ) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    return kmin, kmax


def _selection(tj1, tm1, tj2, tm2, tJ, tM):
    if tm1 + tm2 != tM:
        return False
    if tJ < abs(tj1 - tj2) or tJ > tj1 + tj2:
        return False
    if (tj1 + tj2 + tJ) % 2:
        return False
    return True


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | J M>`` (Condon-Shortley).

    The alternating Racah series is regrouped into a sum of products of
    binomials, which is evaluated in exact integer arithmetic; only the
    final square root is taken in floating point, so there is no
    cancellation loss at large ``j``.
    """
    tj1, tm1 = _check_pair(j1, m1, "1")
    tj2, tm2 = _check_pair(j2, m2, "2")
    tJ, tM = _check_pair(J, M, "")
    return _cg_doubled(tj1, tm1, tj2, tm2, tJ, tM)


@lru_cache(maxsize=1024)
def _fact(n: int) -> int:
    return math.factorial(n)


def _cg_doubled(tj1, tm1, tj2, tm2, tJ, tM) -> float:
    if not _selection(tj1, tm1, tj2, tm2, tJ, tM):
        return 0.0
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    jm = (tJ - tM) // 2
    jp = (tJ + tM) // 2
    kmin, kmax = _racah_limits(tj1, tm1, tj2, tm2, tJ)
    total = 0
    for k in range(kmin, kmax + 1):
        term = math.comb(a, k) * math.comb(jm, b - k) * math.comb(jp, c - k)
        total += -term if k % 2 else term
    if total == 0:
        return 0.0
    f = _fact
    num = (
        (tJ + 1)
        * f((tJ + tj1 - tj2) // 2)
        * f((tJ - tj1 + tj2) // 2)
        * f((tj1 - tm1) // 2)
        * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2)
        * f((tj2 + tm2) // 2)
    )
    den = f((tj1 + tj2 + tJ + 2) // 2) * f(a) * f(jp) * f(jm)
    return math.copysign(math.sqrt(float(Fraction(total * total * num, den))), total)


def clebsch_gordan_exact(j1, m1, j2, m2, J, M) -> float:
    """Same coefficient from the plain factorial form of Racah's series.

    Every term is an exact ``Fraction``; slow, kept as an independent
    check on :func:`clebsch_gordan`.
    """
    tj1, tm1 = _check_pair(j1, m1, "1")
    tj2, tm2 = _check_pair(j2, m2, "2")
    tJ, tM = _check_pair(J, M, "")
    if not _selection(tj1, tm1, tj2, tm2, tJ, tM):
        return 0.0
    f = lambda n2: math.factorial(n2 // 2)  # noqa: E731
    pref = Fraction(
        (tJ + 1) * f(tJ + tj1 - tj2) * f(tJ - tj1 + tj2) * f(tj1 + tj2 - tJ),
        f(tj1 + tj2 + tJ + 2),
    ) * (f(tJ + tM) * f(tJ - tM) * f(tj1 - tm1) * f(tj1 + tm1) * f(tj2 - tm2) * f(tj2 + tm2))
    kmin, kmax = _racah_limits(tj1, tm1, tj2, tm2, tJ)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        t2 = 2 * k
        den = (
            f(t2)
            * f(tj1 + tj2 - tJ - t2)
            * f(tj1 - tm1 - t2)
            * f(tj2 + tm2 - t2)
            * f(tJ - tj2 + tm1 + t2)
            * f(tJ - tj1 - tm2 + t2)
        )
        total += Fraction((-1) ** k, den)
    sq = total * total * pref
    return math.copysign(math.sqrt(float(sq)), total)


@lru_cache(maxsize=64)
def _highest_weight_cg(irrep: SpinIrrep) -> np.ndarray:
    tS = irrep.two_s
    out = np.array([_cg_doubled(tS, tS, 2 * K, 0, tS, tS) for K in range(tS + 1)])
    out.setflags(write=False)
    return out


def highest_weight_cg(irrep) -> np.ndarray:
    """Vector of ``C^{SS}_{SS,K0}`` for ``K = 0..2S``."""
    return _highest_weight_cg(_irrep(irrep))


@lru_cache(maxsize=16)
def _tensor_family(irrep: SpinIrrep) -> np.ndarray:
    tS = irrep.two_s
    dim = irrep.dim
    out = np.zeros((tS + 1, 2 * tS + 1, dim, dim))
    for K in range(tS + 1):
        norm = math.sqrt((2 * K + 1) / dim)
        for q in range(-K, K + 1):
            for col in range(dim):
                tm = tS - 2 * col
                tmp = tm + 2 * q
                if abs(tmp) > tS:
                    continue
                row = (tS - tmp) // 2
                out[K, q + tS, row, col] = norm * _cg_doubled(tS, tm, 2 * K, 2 * q, tS, tmp)
    out.setflags(write=False)
    return out


def tensor_operators(irrep) -> np.ndarray:
    """All irreducible tensor operators, indexed ``[K, q + 2S, row, col]``.

    Entries with ``|q| > K`` are zero. Matrices are real in this basis.
    """
    return _tensor_family(_irrep(irrep))


def tensor_operator(irrep, K: int, q: int) -> np.ndarray:
    """Irreducible tensor operator ``T^S_{Kq}`` as a complex matrix."""
    irrep = _irrep(irrep)
    if K < 0 or K > irrep.two_s or abs(q) > K:
        raise OutOfBand(f"(K={K}, q={q}) outside 0 <= K <= {irrep.two_s}, |q| <= K")
    return tensor_operators(irrep)[K, q + irrep.two_s].astype(complex)


def basis_state(irrep, m) -> np.ndarray:
    irrep = _irrep(irrep)
    tm = _twice(m, "m")
    if abs(tm) > irrep.two_s or (irrep.two_s - tm) % 2:
        raise InvalidQuantumNumbers(f"m={m} not in irrep {irrep}")
    v = np.zeros(irrep.dim, dtype=complex)
    v[(irrep.two_s - tm) // 2] = 1.0
    return v


def coherent_state(irrep, theta: float, phi: float) -> np.ndarray:
    """Spin coherent state pointing along ``n = (sin t cos p, sin t sin p, cos t)``.

    Built as ``exp[theta/2 (S- e^{i phi} - S+ e^{-i phi})] |S, S>``, i.e. the
    rotation ``exp(-i phi Sz) exp(-i theta Sy)`` up to a global phase.
    """
    irrep = _irrep(irrep)
    _, _, _, Sp, Sm = angular_momentum(irrep)
    gen = 0.5 * theta * (Sm * np.exp(1j * phi) - Sp * np.exp(-1j * phi))
    psi = expm(gen)[:, 0]
    return psi / np.linalg.norm(psi)


def is_hermitian(A: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(np.abs(A).max(), 1e-300)
    return bool(np.abs(A - A.conj().T).max() <= rtol * scale)


def random_hermitian(dim: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (X + X.conj().T) / 2


def random_density_matrix(dim: int, rank: int | None = None, rng=None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    rng = np.random.default_rng(rng)
    rank = dim if rank is None else rank
    X = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real
