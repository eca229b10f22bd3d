"""Gauss-Legendre x uniform-azimuth grids and spherical-harmonic transforms.

Spectra are stored as complex arrays ``c[K, q + k_max]`` of shape
``(k_max + 1, 2 k_max + 1)``; entries with ``|q| > K`` are zero. The
harmonics follow the Condon-Shortley phase,
``Y_{K,-q} = (-1)^q conj(Y_{Kq})``.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import BandOverflow, GridTooSmall

__all__ = ["SphereGrid", "SymbolField", "legendre_table", "ylm"]


def legendre_table(k_max: int, x: np.ndarray, q_max: int | None = None) -> np.ndarray:
    """Orthonormal associated Legendre functions ``Pbar[q, i, K]``.

    ``Y_{Kq}(theta, phi) = Pbar[q, :, K](cos theta) * exp(i q phi)`` for
    ``q >= 0``. Upward recurrence in degree, seeded from the sectoral
    terms, which stays bounded for ``K`` in the hundreds.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q_max = k_max if q_max is None else q_max
    sin_t = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((q_max + 1, x.size, k_max + 1))
    sect = np.full(x.size, 1.0 / math.sqrt(4 * math.pi))
    for q in range(min(q_max, k_max) + 1):
        if q > 0:
            sect = -math.sqrt((2 * q + 1) / (2 * q)) * sin_t * sect
        out[q, :, q] = sect
        if q + 1 <= k_max:
            out[q, :, q + 1] = math.sqrt(2 * q + 3) * x * sect
        for K in range(q + 2, k_max + 1):
            a = math.sqrt((4 * K * K - 1) / (K * K - q * q))
            b = math.sqrt(((K - 1) ** 2 - q * q) / (4 * (K - 1) ** 2 - 1))
            out[q, :, K] = a * (x * out[q, :, K - 1] - b * out[q, :, K - 2])
    return out


def ylm(K: int, q: int, theta, phi) -> np.ndarray:
    """Single spherical harmonic, broadcast over ``theta`` and ``phi``."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    P = legendre_table(K, np.cos(theta).ravel(), q_max=abs(q))[abs(q), :, K]
    P = P.reshape(theta.shape)
    if q < 0:
        P = P * (-1) ** q
    return P * np.exp(1j * q * phi)


class SphereGrid:
    """Product grid: Gauss-Legendre in ``cos(theta)``, uniform in ``phi``.

    ``theta`` increases with the row index (north pole first). Transforms
    are exact for fields band-limited at ``k_max``.
    """

    def __init__(self, k_max: int, n_theta: int | None = None, n_phi: int | None = None):
        if k_max < 0:
            raise GridTooSmall("k_max must be nonnegative")
        n_theta = k_max + 1 if n_theta is None else int(n_theta)
        n_phi = 2 * k_max + 2 if n_phi is None else int(n_phi)
        if n_theta < k_max + 1:
            raise GridTooSmall(f"n_theta={n_theta} < k_max + 1 = {k_max + 1}")
        if n_phi < 2 * k_max + 1:
            raise GridTooSmall(f"n_phi={n_phi} < 2 k_max + 1 = {2 * k_max + 1}")
        self.k_max = int(k_max)
        self.n_theta = n_theta
        self.n_phi = n_phi
        x, w = np.polynomial.legendre.leggauss(n_theta)
        order = np.argsort(-x)
        self.x = x[order]
        self.weights = w[order]
        self.theta = np.arccos(self.x)
        self.phi = 2 * np.pi * np.arange(n_phi) / n_phi
        self.sin_theta = np.sqrt(1.0 - self.x**2)
        self._P = legendre_table(self.k_max, self.x)
        self._dP = self._derivative_table(self._P)
        if self.k_max <= 24:
            self.check_orthonormality()

    # -- bookkeeping -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def spectrum_shape(self) -> tuple[int, int]:
        return (self.k_max + 1, 2 * self.k_max + 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(theta, phi)`` arrays of grid shape."""
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def unit_vectors(self) -> np.ndarray:
        """Cartesian components ``n[k]`` of the radial unit vector, shape ``(3, n_theta, n_phi)``."""
        th, ph = self.mesh()
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    def same_as(self, other: "SphereGrid") -> bool:
        return (self.k_max, self.n_theta, self.n_phi) == (other.k_max, other.n_theta, other.n_phi)

    def __repr__(self):
        return f"SphereGrid(k_max={self.k_max}, n_theta={self.n_theta}, n_phi={self.n_phi})"

    def _derivative_table(self, P):
        # d/dtheta Pbar_K^q = (1/2)[sqrt((K-q)(K+q+1)) Pbar_K^{q+1} - sqrt((K+q)(K-q+1)) Pbar_K^{q-1}]
        km = self.k_max
        K = np.arange(km + 1)
        dP = np.zeros_like(P)
        for q in range(km + 1):
            up = np.sqrt(np.clip((K - q) * (K + q + 1), 0, None))
            dn = np.sqrt(np.clip((K + q) * (K - q + 1), 0, None))
            hi = P[q + 1] if q + 1 <= km else 0.0
            lo = P[q - 1] if q >= 1 else (-P[1] if km >= 1 else 0.0)
            dP[q] = 0.5 * (up * hi - dn * lo)
        return dP

    def check_orthonormality(self, tol: float = 1e-12) -> None:
        """Verify the quadrature reproduces ``<Y_Kq, Y_K'q> = delta`` exactly."""
        if abs(self.weights.sum() - 2.0) > tol:
            raise GridTooSmall("Gauss-Legendre weights do not sum to 2")
        for q in range(self.k_max + 1):
            Pq = self._P[q][:, q:]
            gram = 2 * np.pi * (Pq.T * self.weights) @ Pq
            if np.abs(gram - np.eye(gram.shape[0])).max() > tol:
                raise GridTooSmall(f"quadrature not exact for q={q}")

    # -- transforms ------------------------------------------------------

    def _q_index(self, q):
        return q % self.n_phi

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Grid values -> spectrum by quadrature."""
        values = np.asarray(values)
        if values.shape != self.shape:
            raise ValueError(f"expected grid values of shape {self.shape}, got {values.shape}")
        F = np.fft.fft(values, axis=1) * (2 * np.pi / self.n_phi)
        km = self.k_max
        out = np.zeros(self.spectrum_shape, dtype=complex)
        wF = F * self.weights[:, None]
        for q in range(km + 1):
            Pq = self._P[q]
            out[:, km + q] = Pq.T @ wF[:, self._q_index(q)]
            if q:
                out[:, km - q] = (-1) ** q * (Pq.T @ wF[:, self._q_index(-q)])
        out[np.abs(np.arange(-km, km + 1))[None, :] > np.arange(km + 1)[:, None]] = 0.0
        return out

    def _synth(self, coeffs, table):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != self.spectrum_shape:
            raise ValueError(f"expected spectrum of shape {self.spectrum_shape}, got {coeffs.shape}")
        km = self.k_max
        G = np.zeros((self.n_theta, self.n_phi), dtype=complex)
        for q in range(km + 1):
            Tq = table[q]
            G[:, self._q_index(q)] += Tq @ coeffs[:, km + q]
            if q:
                G[:, self._q_index(-q)] += (-1) ** q * (Tq @ coeffs[:, km - q])
        return np.fft.ifft(G, axis=1) * self.n_phi

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        """Spectrum -> complex grid values."""
        return self._synth(coeffs, self._P)

    def backward_dtheta(self, coeffs: np.ndarray) -> np.ndarray:
        """Exact ``d/dtheta`` of the synthesized field, at the grid nodes."""
        return self._synth(coeffs, self._dP)

    def evaluate(self, coeffs: np.ndarray, theta, phi) -> np.ndarray:
        """Synthesize the spectrum at arbitrary points (spectral interpolation)."""
        theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
        shape = theta.shape
        th = theta.ravel()
        ph = phi.ravel()
        km = self.k_max
        P = legendre_table(km, np.cos(th))
        out = np.zeros(th.size, dtype=complex)
        for q in range(km + 1):
            out += (P[q] @ coeffs[:, km + q]) * np.exp(1j * q * ph)
            if q:
                out += (-1) ** q * (P[q] @ coeffs[:, km - q]) * np.exp(-1j * q * ph)
        return out.reshape(shape)

    def integrate(self, values: np.ndarray) -> complex | float:
        """``int f dOmega`` by the product quadrature."""
        ring = np.asarray(values).sum(axis=1) * (2 * np.pi / self.n_phi)
        return ring @ self.weights

    def l2_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(abs(self.integrate(np.abs(values) ** 2))))

    def band_energy(self, coeffs: np.ndarray, above: int) -> float:
        """Fraction of spectral energy in degrees ``K > above``."""
        e = (np.abs(coeffs) ** 2).sum(axis=1)
        tot = e.sum()
        return float(e[above + 1 :].sum() / tot) if tot > 0 else 0.0

    def spectrum_of(self, K: int, q: int) -> np.ndarray:
        """Unit spectrum of ``Y_{Kq}``."""
        if K > self.k_max or abs(q) > K:
            raise BandOverflow(f"Y_({K},{q}) not representable at k_max={self.k_max}")
        c = np.zeros(self.spectrum_shape, dtype=complex)
        c[K, self.k_max + q] = 1.0
        return c

    def degrees(self) -> np.ndarray:
        """Degree ``K`` of every spectrum slot, spectrum-shaped."""
        return np.broadcast_to(np.arange(self.k_max + 1)[:, None], self.spectrum_shape)

    def orders(self) -> np.ndarray:
        return np.broadcast_to(np.arange(-self.k_max, self.k_max + 1)[None, :], self.spectrum_shape)

    def write_csv(self, path, values, digits: int = 17) -> None:
        """Dump ``theta,phi,value`` rows, theta-major."""
        values = np.asarray(values)
        if np.iscomplexobj(values):
            values = values.real
        th, ph = self.mesh()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "phi", "value"])
            for a, b, v in zip(th.ravel(), ph.ravel(), values.ravel()):
                w.writerow([f"{a:.{digits}g}", f"{b:.{digits}g}", f"{v:.{digits}g}"])


class SymbolField:
    """Function on the sphere held as grid values and/or a spectrum.

    Whichever representation is missing is computed on first access and
    cached. ``s`` and ``irrep`` are provenance tags (``None`` for plain
    fields such as test functions).
    """

    def __init__(self, grid: SphereGrid, values=None, spectrum=None, s=None, irrep=None):
        if values is None and spectrum is None:
            raise ValueError("need values or spectrum")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=complex)
        self._spectrum = None if spectrum is None else np.asarray(spectrum, dtype=complex)
        self.s = s
        self.irrep = irrep

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self.grid.backward(self._spectrum)
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            self._spectrum = self.grid.forward(self._values)
        return self._spectrum

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def synchronize(self) -> "SymbolField":
        """Materialize both representations (call before sharing across threads)."""
        self.values, self.spectrum  # noqa: B018
        return self

    def with_values(self, values) -> "SymbolField":
        return SymbolField(self.grid, values=values, s=self.s, irrep=self.irrep)

    def with_spectrum(self, spectrum) -> "SymbolField":
        return SymbolField(self.grid, spectrum=spectrum, s=self.s, irrep=self.irrep)

    def integral(self) -> complex:
        return self.grid.integrate(self.values)

    def __add__(self, other):
        if isinstance(other, SymbolField):
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, SymbolField):
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, other):
        if isinstance(other, SymbolField):
            return self.with_values(self.values * other.values)
        if np.isscalar(other) and self._spectrum is not None and self._values is None:
            return self.with_spectrum(self._spectrum * other)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"SymbolField(s={self.s}, irrep={self.irrep}, grid={self.grid})"
