"""Floquet (Bloch) analysis of q-periodic lattice Schrodinger operators.

The q x q Hermitian fiber matrix carries the one-period potential on its
diagonal, unit hopping on the off-diagonals, and quasimomentum phases
e^{+- i q kappa} in the corners.  Everything downstream of the periodic
theory lives here: the characteristic-polynomial identity linking the fiber
determinant to the discriminant, band structure and widths, eigenvalue and
weight derivatives, and the two-site spectral measure

    mu_kappa(.) = sum_j (|psi_j(0)|^2 + |psi_j(1)|^2) delta_{lambda_j(kappa)},

which has total mass exactly 2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DegeneratePointError,
    InputError,
    NearDegenerateError,
)
from .operator import PeriodicModel, SamplingFunction, periodic_model

_EPS_CUBE_ROOT = float(np.finfo(float).eps) ** (1.0 / 3.0)

# |Delta'| below this is treated as a degenerate (closed-gap) point
DEGENERATE_DISCRIMINANT_TOL = 1e-8
# eigenvalue gaps below this make the perturbation series unusable
MIN_PERTURBATION_GAP = 1e-7


def floquet_matrix(model: PeriodicModel, kappa: float) -> np.ndarray:
    """Hermitian fiber matrix at quasimomentum kappa.

    Corner entries are e^{i q kappa} (top right) and its conjugate (bottom
    left); for q = 2 they add onto the hopping entries, for q = 1 the matrix
    is the scalar V(0) + 2 cos(kappa).
    """
    q = model.q
    if q == 1:
        return np.array([[model.potential[0] + 2.0 * math.cos(kappa)]],
                        dtype=complex)
    a = np.diag(model.potential.astype(complex))
    idx = np.arange(q - 1)
    a[idx, idx + 1] += 1.0
    a[idx + 1, idx] += 1.0
    phase = cmath.exp(1j * q * kappa)
    a[0, q - 1] += phase
    a[q - 1, 0] += phase.conjugate()
    return a


def _floquet_matrix_kappa_derivative(model: PeriodicModel, kappa: float
                                     ) -> np.ndarray:
    """d/dkappa of the fiber matrix: only the corner phases move."""
    q = model.q
    d = np.zeros((q, q), dtype=complex)
    phase = cmath.exp(1j * q * kappa)
    d[0, q - 1] += 1j * q * phase
    d[q - 1, 0] += -1j * q * phase.conjugate()
    return d


@dataclass(frozen=True)
class FloquetEigensystem:
    """Eigenvalues (ascending) and eigenvectors of one fiber matrix."""

    kappa: float
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)  # columns

    @property
    def q(self) -> int:
        return self.eigenvalues.size

    @property
    def phi(self) -> np.ndarray:
        """Two-site weights |psi_j(0)|^2 + |psi_j(1)|^2; needs q >= 2."""
        if self.q < 2:
            raise InputError(
                "phi weights need the site-1 component; q must be >= 2")
        u = self.eigenvectors
        return np.abs(u[0, :]) ** 2 + np.abs(u[1, :]) ** 2


def floquet_eigensystem(model: PeriodicModel, kappa: float) -> FloquetEigensystem:
    w, u = np.linalg.eigh(floquet_matrix(model, kappa))
    return FloquetEigensystem(kappa=float(kappa), eigenvalues=w, eigenvectors=u)


def _transfer_trace(potential: np.ndarray, energy) -> complex:
    """Trace of the one-period transfer product T(q-1)...T(0) at energy."""
    m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    for v in potential:
        a = energy - v
        m00, m01, m10, m11 = (a * m00 - m10, a * m01 - m11, m00, m01)
    return m00 + m11


def discriminant(model: PeriodicModel, energy: float) -> float:
    """Discriminant Delta_q(E) = (-1)^q * trace of the period transfer matrix.

    The sign makes det(A_q(kappa) - E) = Delta_q(E) + 2(-1)^(q-1) cos(q kappa)
    hold for every q; for even q this is the plain transfer trace.
    """
    tr = _transfer_trace(model.potential, float(energy))
    return float(((-1) ** model.q) * tr)


def discriminant_derivative(model: PeriodicModel, energy: float,
                            h: float | None = None) -> float:
    """Central-difference d Delta / dE with h = eps^(1/3) * max(1, |E|)."""
    if h is None:
        h = _EPS_CUBE_ROOT * max(1.0, abs(energy))
    return (discriminant(model, energy + h)
            - discriminant(model, energy - h)) / (2.0 * h)


@dataclass(frozen=True)
class Band:
    """Band j (1-indexed, ascending) with its kappa = 0 and pi/q edges."""

    j: int
    edge_zero: float   # lambda_j(0)
    edge_pi: float     # lambda_j(pi/q)

    @property
    def lo(self) -> float:
        return min(self.edge_zero, self.edge_pi)

    @property
    def hi(self) -> float:
        return max(self.edge_zero, self.edge_pi)

    @property
    def width(self) -> float:
        return abs(self.edge_pi - self.edge_zero)

    @property
    def center(self) -> float:
        return 0.5 * (self.edge_zero + self.edge_pi)

    def intersects(self, lo: float, hi: float) -> bool:
        return self.lo <= hi and lo <= self.hi


@dataclass(frozen=True)
class BandStructure:
    model: PeriodicModel
    bands: tuple
    kappas: np.ndarray = field(repr=False)
    eigenvalue_grid: np.ndarray = field(repr=False)  # shape (K, q)
    monotone_ok: bool = True
    parity_ok: bool = True
    disjoint_ok: bool = True

    @property
    def q(self) -> int:
        return self.model.q

    @property
    def widths(self) -> np.ndarray:
        return np.array([b.width for b in self.bands])

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.bands])

    def band(self, j: int) -> Band:
        if not 1 <= j <= len(self.bands):
            raise InputError(f"band index {j} outside 1..{len(self.bands)}")
        return self.bands[j - 1]


def expected_derivative_sign(q: int, j: int) -> int:
    """Sign of d lambda_j / d kappa on (0, pi/q): alternates from the top.

    The top band (j = q) always decreases as cos(q kappa) runs 2 -> -2.
    """
    return -1 if (q - j) % 2 == 0 else 1


def band_structure(model: PeriodicModel, kappa_grid: int = 64) -> BandStructure:
    """Bands from the kappa = 0 and pi/q eigenvalues plus a monotonicity audit.

    The audit checks, on an interior grid, that each lambda_j is monotone
    with the parity-alternating sign, and that band interiors are disjoint.
    """
    if kappa_grid < 2:
        raise InputError(f"kappa_grid must be >= 2, got {kappa_grid}")
    q = model.q
    kappas = np.linspace(0.0, math.pi / q, kappa_grid)
    grid = np.empty((kappa_grid, q))
    for i, kap in enumerate(kappas):
        grid[i] = np.linalg.eigh(floquet_matrix(model, kap))[0]
    lam0, lam_pi = grid[0], grid[-1]
    bands = tuple(Band(j=j + 1, edge_zero=float(lam0[j]), edge_pi=float(lam_pi[j]))
                  for j in range(q))

    scale = max(1.0, model.norm_bound)
    tol = 1e-10 * scale
    diffs = np.diff(grid, axis=0)
    monotone_ok = True
    parity_ok = True
    for j in range(q):
        sign = expected_derivative_sign(q, j + 1)
        if np.any(sign * diffs[:, j] < -tol):
            parity_ok = False
        d = diffs[:, j]
        if not (np.all(d >= -tol) or np.all(d <= tol)):
            monotone_ok = False
    disjoint_ok = all(bands[j].hi <= bands[j + 1].lo + tol for j in range(q - 1))
    return BandStructure(model=model, bands=bands, kappas=kappas,
                         eigenvalue_grid=grid, monotone_ok=monotone_ok,
                         parity_ok=parity_ok and monotone_ok,
                         disjoint_ok=disjoint_ok)


def _check_interior_kappa(model: PeriodicModel, kappa: float):
    if not 0.0 <= kappa <= math.pi / model.q:
        raise InputError(
            f"kappa {kappa} outside the reduced interval [0, pi/{model.q}]")


def eigenvalue_derivative(model: PeriodicModel, kappa: float, j: int) -> float:
    """d lambda_j / d kappa from the discriminant identity.

    |Delta'(lambda_j)| |lambda_j'| = 2 q |sin(q kappa)| with the parity-
    alternating sign; j is 1-indexed.  Raises at degenerate points where
    Delta' vanishes (touching bands).
    """
    q = model.q
    _check_interior_kappa(model, kappa)
    if not 1 <= j <= q:
        raise InputError(f"band index {j} outside 1..{q}")
    lam = floquet_eigensystem(model, kappa).eigenvalues[j - 1]
    dprime = discriminant_derivative(model, lam)
    if abs(dprime) < DEGENERATE_DISCRIMINANT_TOL:
        raise DegeneratePointError(
            f"discriminant derivative {dprime:.3g} at lambda_{j}({kappa:.6g}) "
            "is below resolution (closed gap / touching bands)")
    mag = 2.0 * q * abs(math.sin(q * kappa)) / abs(dprime)
    return expected_derivative_sign(q, j) * mag


def phi_derivative(model: PeriodicModel, kappa: float, j: int) -> float:
    """d phi_j / d kappa by first-order perturbation of the eigenvector.

    psi_dot_j = sum_{k != j} <psi_k, Adot psi_j> / (lambda_j - lambda_k) psi_k
    with Adot supported on the two corners.  Raises when the spacing to the
    nearest neighbor is below MIN_PERTURBATION_GAP (scaled).
    """
    q = model.q
    if q < 2:
        raise InputError("phi derivative needs q >= 2")
    _check_interior_kappa(model, kappa)
    if not 1 <= j <= q:
        raise InputError(f"band index {j} outside 1..{q}")
    sys = floquet_eigensystem(model, kappa)
    lam, u = sys.eigenvalues, sys.eigenvectors
    jj = j - 1
    gaps = np.abs(lam - lam[jj])
    gaps[jj] = np.inf
    scale = max(1.0, model.norm_bound)
    min_gap = float(np.min(gaps))
    if min_gap < MIN_PERTURBATION_GAP * scale:
        raise NearDegenerateError(
            f"eigenvalue gap {min_gap:.3g} at kappa={kappa:.6g} below the "
            f"minimum {MIN_PERTURBATION_GAP * scale:.3g} for the perturbation "
            "formula")
    adot = _floquet_matrix_kappa_derivative(model, kappa)
    delta = lam[jj] - lam
    delta[jj] = np.inf  # self term excluded
    coeff = (u.conj().T @ (adot @ u[:, jj])) / delta
    psi_dot = u @ coeff
    psi = u[:, jj]
    return float(2.0 * (psi[0].conjugate() * psi_dot[0]).real
                 + 2.0 * (psi[1].conjugate() * psi_dot[1]).real)


def phi_derivative_edge_bound(model: PeriodicModel, j: int,
                              width: float | None = None) -> float:
    """Bound C3 q^4 / width on |phi_j'| over the interior window.

    This is 8e q^2 / (width * (1 - |cos(q kappa)|)) evaluated at the window
    edge kappa = pi/(16 q^2), where the bound is largest.
    """
    q = model.q
    if width is None:
        width = band_structure(model).bands[j - 1].width
    if width <= 0:
        raise InputError("band width must be positive")
    kappa_edge = math.pi / (16.0 * q * q)
    return 8.0 * math.e * q * q / (width * (1.0 - abs(math.cos(q * kappa_edge))))


def interior_window(q: int) -> tuple[float, float]:
    """The kappa window [pi/(16 q^2), pi/q - pi/(16 q^2)]."""
    edge = math.pi / (16.0 * q * q)
    return edge, math.pi / q - edge


def derivative_sandwich(model: PeriodicModel, kappa: float, j: int,
                        width: float | None = None) -> tuple[float, float]:
    """Lower/upper bounds for |lambda_j'(kappa)| on (0, pi/q).

    lower = 2 q sin(q kappa) * width / (4 e)
    upper = 2 q sin(q kappa) * width / ((1 + sqrt 5)(1 - |cos(q kappa)|))
    """
    q = model.q
    if not 0.0 < kappa < math.pi / q:
        raise InputError("sandwich bounds hold on the open interval (0, pi/q)")
    if width is None:
        width = band_structure(model).bands[j - 1].width
    s = 2.0 * q * abs(math.sin(q * kappa)) * width
    lower = s / (4.0 * math.e)
    upper = s / ((1.0 + math.sqrt(5.0)) * (1.0 - abs(math.cos(q * kappa))))
    return lower, upper


def spectral_measure_interval(model: PeriodicModel, kappa: float,
                              interval: tuple[float, float]) -> float:
    """mu_kappa([a, b]): sum of phi_j over eigenvalues in the closed interval."""
    a, b = interval
    if b < a:
        raise InputError(f"empty interval [{a}, {b}]")
    if model.q < 2:
        raise InputError("the two-site spectral measure needs q >= 2")
    sys = floquet_eigensystem(model, kappa)
    inside = (sys.eigenvalues >= a) & (sys.eigenvalues <= b)
    return float(np.sum(sys.phi[inside]))


@dataclass(frozen=True)
class MeasureLowerBound:
    eta: float
    theta_argmin: float
    kappa_argmin: float
    theta_count: int
    kappa_count: int


def measure_kappa_infimum(model: PeriodicModel, interval: tuple[float, float],
                          kappa_grid: int = 64) -> tuple[float, float]:
    """Infimum over a kappa grid of mu_kappa(interval); returns (eta, argmin)."""
    if kappa_grid < 2:
        raise InputError(f"kappa_grid must be >= 2, got {kappa_grid}")
    kappas = np.linspace(0.0, math.pi / model.q, kappa_grid)
    best, arg = math.inf, 0.0
    for kap in kappas:
        m = spectral_measure_interval(model, kap, interval)
        if m < best:
            best, arg = m, float(kap)
    return best, arg


def measure_uniform_lower_bound(f: SamplingFunction, alpha: Fraction,
                                interval: tuple[float, float],
                                theta_grid: int = 16,
                                kappa_grid: int = 64) -> MeasureLowerBound:
    """eta = inf over (theta, kappa) grids of mu_{kappa, theta}(interval)."""
    if theta_grid < 1:
        raise InputError(f"theta_grid must be >= 1, got {theta_grid}")
    thetas = np.arange(theta_grid) / theta_grid
    best = None
    for theta in thetas:
        model = periodic_model(f, alpha, float(theta))
        eta, kap = measure_kappa_infimum(model, interval, kappa_grid)
        if best is None or eta < best[0]:
            best = (eta, float(theta), kap)
    return MeasureLowerBound(eta=best[0], theta_argmin=best[1],
                             kappa_argmin=best[2], theta_count=theta_grid,
                             kappa_count=kappa_grid)


def phi_occupation_measure(model: PeriodicModel, j: int, threshold: float,
                           kappa_grid: int = 256) -> float:
    """Lebesgue measure (on [0, pi/q]) of {kappa : phi_j(kappa) > threshold},
    estimated on a uniform grid."""
    q = model.q
    if q < 2:
        raise InputError("phi occupation needs q >= 2")
    if not 1 <= j <= q:
        raise InputError(f"band index {j} outside 1..{q}")
    kappas = np.linspace(0.0, math.pi / q, kappa_grid)
    count = 0
    for kap in kappas:
        if floquet_eigensystem(model, kap).phi[j - 1] > threshold:
            count += 1
    return (count / kappa_grid) * (math.pi / q)
