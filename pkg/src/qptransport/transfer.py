"""Transfer-matrix products, Lyapunov exponent estimation, and the
rational-approximation diagnostics built on them.

One-step matrices are T(n) = [[E - V(n), -1], [1, 0]] (det = 1), so
Phi_{[0,n]} = T(n)...T(0) maps (psi(0), psi(-1)) to (psi(n+1), psi(n)).
Long products are kept representable by a cadence-32 norm renormalization
with an accumulated log factor; the determinant is tracked separately via
a per-step Givens-QR factor stream, whose per-step 2x2 factorizations stay
well conditioned even when the product itself is hyperbolic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InputError, NumericalError
from .operator import Chain, PeriodicModel, SamplingFunction, _orbit_points

RENORM_CADENCE = 32
_OVERFLOW_GUARD = 1e250
GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0


def _potential_segment(source, n_lo: int, n_hi: int) -> np.ndarray:
    if isinstance(source, Chain):
        return source.potential(n_lo, n_hi)
    if isinstance(source, PeriodicModel):
        return source.extended(n_lo, n_hi)
    arr = np.asarray(source, dtype=float)
    if arr.shape != (n_hi - n_lo + 1,):
        raise InputError(
            f"potential array has shape {arr.shape}, expected ({n_hi - n_lo + 1},)")
    return arr


@dataclass(frozen=True)
class TransferProduct:
    """A finite transfer product with renormalization bookkeeping.

    The true product equals exp(log_scale) * matrix_scaled.  det_log is the
    accumulated log|det| from the QR factor stream and should vanish; the
    det sign is tracked separately and should stay +1.
    """

    energy: float
    n_lo: int
    n_hi: int
    inverse: bool
    matrix_scaled: np.ndarray = field(repr=False)
    log_scale: float
    det_log: float
    det_sign: int

    @property
    def length(self) -> int:
        return self.n_hi - self.n_lo + 1

    @property
    def log_norm(self) -> float:
        """log of the spectral norm of the true product."""
        return self.log_scale + math.log(_spectral_norm_2x2(self.matrix_scaled))

    @property
    def matrix(self) -> np.ndarray:
        """The true product, when representable in double precision."""
        if self.log_scale > 700.0:
            raise NumericalError(
                f"product norm e^{self.log_scale:.1f} overflows doubles; "
                "use matrix_scaled and log_scale")
        return math.exp(self.log_scale) * self.matrix_scaled

    def apply(self, vec) -> np.ndarray:
        return self.matrix @ np.asarray(vec, dtype=float)


def _spectral_norm_2x2(m: np.ndarray) -> float:
    a = m[0, 0] ** 2 + m[1, 0] ** 2
    b = m[0, 1] ** 2 + m[1, 1] ** 2
    c = m[0, 0] * m[0, 1] + m[1, 0] * m[1, 1]
    half = 0.5 * (a + b)
    rad = math.sqrt(max(0.0, (0.5 * (a - b)) ** 2 + c * c))
    return math.sqrt(max(half + rad, 0.0))


def transfer_product(source, energy: float, n_lo: int, n_hi: int,
                     inverse: bool = False) -> TransferProduct:
    """Product of one-step matrices over the site interval [n_lo, n_hi].

    Forward: T(n_hi)...T(n_lo).  Inverse: T^{-1}(n_lo)...T^{-1}(n_hi),
    matching the left-half-line convention (most negative site leftmost).
    """
    if n_hi < n_lo:
        raise InputError(f"empty site interval [{n_lo}, {n_hi}]")
    v_arr = _potential_segment(source, n_lo, n_hi)
    energy = float(energy)
    order = range(len(v_arr) - 1, -1, -1) if inverse else range(len(v_arr))

    m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    q00, q01, q10, q11 = 1.0, 0.0, 0.0, 1.0
    log_scale = 0.0
    det_logs = []
    det_sign = 1
    count = 0
    for idx in order:
        a = energy - v_arr[idx]
        if inverse:
            # T^{-1}(n) = [[0, 1], [-1, a]]
            m00, m01, m10, m11 = m10, m11, -m00 + a * m10, -m01 + a * m11
            a00, a10 = q10, -q00 + a * q10
            a01, a11 = q11, -q01 + a * q11
        else:
            m00, m01, m10, m11 = a * m00 - m10, a * m01 - m11, m00, m01
            a00, a10 = a * q00 - q10, q00
            a01, a11 = a * q01 - q11, q01
        r11 = math.hypot(a00, a10)
        if r11 == 0.0 or not math.isfinite(r11):
            raise NumericalError(f"transfer product degenerated at step {count}")
        c, s = a00 / r11, a10 / r11
        r22 = c * a11 - s * a01
        if r22 == 0.0:
            raise NumericalError(
                f"determinant factor vanished at step {count} "
                "(energy scale too large for the QR stream)")
        det_logs.append(math.log(r11) + math.log(abs(r22)))
        if r22 < 0.0:
            det_sign = -det_sign
        q00, q01, q10, q11 = c, -s, s, c
        count += 1
        if count % RENORM_CADENCE == 0 or abs(m00) > _OVERFLOW_GUARD:
            fro = math.sqrt(m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11)
            if not (math.isfinite(fro) and fro > 0.0):
                raise NumericalError(
                    f"transfer norm not finite at step {count}")
            m00, m01, m10, m11 = m00 / fro, m01 / fro, m10 / fro, m11 / fro
            log_scale += math.log(fro)

    return TransferProduct(
        energy=energy, n_lo=n_lo, n_hi=n_hi, inverse=inverse,
        matrix_scaled=np.array([[m00, m01], [m10, m11]]),
        log_scale=log_scale, det_log=math.fsum(det_logs), det_sign=det_sign)


@dataclass(frozen=True)
class LyapunovEstimate:
    energy: float
    gamma_hat: float
    stderr: float
    n_steps: int
    theta_count: int
    per_theta: np.ndarray = field(repr=False)


def _theta_grid(theta_count: int, mode: str, seed) -> np.ndarray:
    if theta_count < 1:
        raise InputError(f"theta_count must be >= 1, got {theta_count}")
    if mode == "golden":
        return (np.arange(1, theta_count + 1) * GOLDEN_MEAN) % 1.0
    if mode == "random":
        return np.random.default_rng(seed).uniform(0.0, 1.0, theta_count)
    raise InputError(f"unknown theta mode {mode!r} (use 'golden' or 'random')")


def lyapunov_exponent(f: SamplingFunction, alpha, energy: float,
                      n_steps: int = 10_000, theta_count: int = 100,
                      theta_mode: str = "golden", seed=None) -> LyapunovEstimate:
    """Phase-averaged finite-n Lyapunov estimate (1/n) log ||Phi_[0,n-1](E)||.

    The cocycle is iterated simultaneously over a theta grid (low-discrepancy
    golden rotation by default, seeded i.i.d. draws as fallback), with the
    cadence-32 norm renormalization.
    """
    if n_steps < 1:
        raise InputError(f"n_steps must be >= 1, got {n_steps}")
    thetas = _theta_grid(theta_count, theta_mode, seed)
    alpha_f = float(alpha)
    energy = float(energy)

    m00 = np.ones_like(thetas)
    m01 = np.zeros_like(thetas)
    m10 = np.zeros_like(thetas)
    m11 = np.zeros_like(thetas)
    acc = np.zeros_like(thetas)
    for n in range(n_steps):
        x = (thetas + n * alpha_f) % 1.0
        a = energy - np.asarray(f(x), dtype=float)
        m00, m01, m10, m11 = a * m00 - m10, a * m01 - m11, m00, m01
        if (n + 1) % RENORM_CADENCE == 0:
            fro = np.sqrt(m00 ** 2 + m01 ** 2 + m10 ** 2 + m11 ** 2)
            m00, m01, m10, m11 = m00 / fro, m01 / fro, m10 / fro, m11 / fro
            acc += np.log(fro)

    aa = m00 ** 2 + m10 ** 2
    bb = m01 ** 2 + m11 ** 2
    cc = m00 * m01 + m10 * m11
    sigma_sq = 0.5 * (aa + bb) + np.sqrt(np.maximum(
        (0.5 * (aa - bb)) ** 2 + cc ** 2, 0.0))
    per_theta = (acc + 0.5 * np.log(np.maximum(sigma_sq, 1e-300))) / n_steps
    gamma_hat = float(np.mean(per_theta))
    stderr = float(np.std(per_theta, ddof=1) / math.sqrt(theta_count)) \
        if theta_count > 1 else 0.0
    return LyapunovEstimate(energy=energy, gamma_hat=gamma_hat, stderr=stderr,
                            n_steps=n_steps, theta_count=theta_count,
                            per_theta=per_theta)


@dataclass(frozen=True)
class MinLyapunovResult:
    energy: float
    gamma: float
    estimates: tuple


def min_lyapunov_on_spectrum(f: SamplingFunction, alpha, energies,
                             n_steps: int = 10_000, theta_count: int = 100,
                             theta_mode: str = "golden", seed=None
                             ) -> MinLyapunovResult:
    """Minimize the Lyapunov estimate over a list of on-spectrum energies
    (typically band centers of a deep periodic approximant)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if energies.size == 0:
        raise InputError("need at least one energy")
    ests = tuple(lyapunov_exponent(f, alpha, e, n_steps, theta_count,
                                   theta_mode, seed) for e in energies)
    k = int(np.argmin([est.gamma_hat for est in ests]))
    return MinLyapunovResult(energy=float(energies[k]),
                             gamma=ests[k].gamma_hat, estimates=ests)


def gordon_block_statistic(a_matrix, u=None) -> float:
    """max(||A^2 u||, ||A u||, ||A^-1 u||, ||A^-2 u||) for unimodular A.

    The classical four-block fact guarantees this is >= 1/2 for any 2x2 A
    with det A = 1 and unit u.
    """
    a = np.asarray(a_matrix, dtype=float)
    if a.shape != (2, 2):
        raise InputError(f"A must be 2x2, got shape {a.shape}")
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det - 1.0) > 1e-8:
        raise InputError(f"A must be unimodular: det = {det!r}")
    if u is None:
        u = np.array([1.0, 0.0])
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-8:
        raise InputError(f"u must be a unit vector, got norm {np.linalg.norm(u)}")
    a_inv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det
    return float(max(
        np.linalg.norm(a @ (a @ u)),
        np.linalg.norm(a @ u),
        np.linalg.norm(a_inv @ u),
        np.linalg.norm(a_inv @ (a_inv @ u)),
    ))


def transfer_difference(f: SamplingFunction, alpha, alpha_m: Fraction,
                        theta: float, energy: float, n_max: int | None = None,
                        u=(1.0, 0.0)) -> float:
    """max over product lengths 1..n_max of ||(Phi_alpha - Phi_alpha_m) u||,
    both products taken over [0, length-1].

    alpha_m is the rational approximant; n_max defaults to twice its
    denominator (the two-block range the Gordon argument inspects).
    Raises NumericalError if the orbits overflow before n_max.
    """
    if not isinstance(alpha_m, Fraction):
        raise InputError("alpha_m must be a Fraction approximant")
    if n_max is None:
        n_max = 2 * alpha_m.denominator
    if n_max < 1:
        raise InputError(f"n_max must be >= 1, got {n_max}")
    sites = range(0, n_max)
    v_true = np.asarray(f(_orbit_points(alpha, theta, sites)), dtype=float)
    v_appr = np.asarray(f(_orbit_points(alpha_m, theta, sites)), dtype=float)
    energy = float(energy)

    v0, v1 = float(u[0]), float(u[1])
    w0, w1 = v0, v1
    best = 0.0
    for n in range(n_max):
        a = energy - v_true[n]
        v0, v1 = a * v0 - v1, v0
        b = energy - v_appr[n]
        w0, w1 = b * w0 - w1, w0
        if abs(v0) > _OVERFLOW_GUARD or abs(w0) > _OVERFLOW_GUARD:
            raise NumericalError(
                f"transfer orbits overflow at n = {n} (|psi| > 1e250); "
                "reduce n_max or move the energy")
        diff = math.hypot(v0 - w0, v1 - w1)
        if diff > best:
            best = diff
    return best
