"""Ground-truth physical layer: transmitter impairments, channel, noise.

Transmit chain per user: modulator branch mismatch (amplitude/phase), then a
power-amplifier nonlinearity, then a multipath MIMO channel with AWGN at the
receive array.  Complex signals can be stacked into the equivalent real model
for the real-valued detectors and networks.
"""

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class IqImbalance:
    """Branch mismatch of the quadrature modulator.

    lambda_k is the amplitude imbalance, theta_k the phase imbalance in
    radians.  xi and zeta are the derived mixing coefficients applied to the
    signal and its conjugate.
    """

    lambda_k: float
    theta_k: float
    xi: complex
    zeta: complex

    @classmethod
    def from_params(cls, lambda_k: float, theta_k: float) -> "IqImbalance":
        xi, zeta = iq_coefficients(lambda_k, theta_k)
        return cls(lambda_k, theta_k, xi, zeta)

    @classmethod
    def ideal(cls) -> "IqImbalance":
        return cls.from_params(0.0, 0.0)


def iq_coefficients(lambda_k: float, theta_k: float):
    """Mixing coefficients (xi, zeta) for given amplitude/phase imbalance."""

    c = math.cos(theta_k / 2.0)
    s = math.sin(theta_k / 2.0)
    xi = complex(c, lambda_k * s)
    zeta = complex(lambda_k * c, s)
    return xi, zeta


def apply_iq(x, imb: IqImbalance):
    """xi * x + zeta * conj(x), elementwise."""

    return imb.xi * x + imb.zeta * np.conj(x)


@dataclass(frozen=True)
class PaModel:
    """Solid-state amplifier with amplitude compression and phase rotation.

    alpha_a: small-signal gain, x_sat: output saturation amplitude, sigma_a:
    smoothness of the compression knee.  alpha_phi, beta_phi, q1, q2 shape the
    amplitude-to-phase conversion; alpha_phi is expressed in degrees (the
    standard WLAN amplifier parameterization) and converted to radians before
    it rotates the signal.
    """

    alpha_a: float = 4.65
    x_sat: float = 0.58
    sigma_a: float = 0.81
    alpha_phi: float = 2560.0
    beta_phi: float = 0.114
    q1: float = 2.4
    q2: float = 2.3

    def distort(self, x):
        return apply_pa(x, self)


@dataclass(frozen=True)
class PolynomialPa:
    """Odd-order baseband polynomial amplifier: sum_i c_i * x * |x|^(2i).

    Used by the "extreme" severity preset.  The default coefficients are not
    taken from a datasheet; they are chosen to compress the amplitude by
    roughly 40% and rotate the phase by several degrees at the peak of a
    unit-average-power constellation while keeping the amplitude mapping
    monotone.
    """

    coeffs: tuple = (1.05 + 0.06j, -0.25 + 0.09j, 0.022 - 0.012j)

    def distort(self, x):
        x = np.asarray(x, dtype=np.complex128)
        r2 = (x * np.conj(x)).real
        out = np.zeros_like(x)
        pw = np.ones_like(r2)
        for c in self.coeffs:
            out = out + c * x * pw
            pw = pw * r2
        return out if out.shape else complex(out)


Amplifier = Union[PaModel, PolynomialPa]


def pa_am_am(r, pa: PaModel):
    """Output amplitude for input amplitude r >= 0 (saturates at x_sat)."""

    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("amplitude must be nonnegative")
    drive = pa.alpha_a * r
    e = 2.0 * pa.sigma_a
    out = drive / (1.0 + (drive / pa.x_sat) ** e) ** (1.0 / e)
    return float(out) if out.ndim == 0 else out


def pa_am_pm(r, pa: PaModel):
    """Phase rotation in radians for input amplitude r >= 0."""

    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("amplitude must be nonnegative")
    with np.errstate(divide="ignore"):
        deg = pa.alpha_phi * r ** pa.q1 / (1.0 + (r / pa.beta_phi) ** pa.q2)
    deg = np.where(r == 0.0, 0.0, deg)
    out = np.deg2rad(deg)
    return float(out) if out.ndim == 0 else out


def apply_pa(x, pa: PaModel):
    """Amplitude compression plus phase rotation, preserving the input phase."""

    x = np.asarray(x, dtype=np.complex128)
    r = np.abs(x)
    amp = pa_am_am(r, pa)
    ph = np.angle(x) + pa_am_pm(r, pa)
    out = amp * np.exp(1j * ph)
    return out if out.shape else complex(out)


@dataclass(frozen=True)
class ImpairmentParams:
    """Per-user transmitter impairments (one shared instance by default)."""

    iq: IqImbalance = field(default_factory=IqImbalance.ideal)
    pa: Amplifier = None

    def distort(self, x):
        y = apply_iq(x, self.iq)
        if self.pa is not None:
            y = self.pa.distort(y)
        return y

    @classmethod
    def ideal(cls) -> "ImpairmentParams":
        return cls(IqImbalance.ideal(), None)


def steering_vector(theta: float, n: int, spacing: float = 0.5) -> np.ndarray:
    """Uniform linear array response for arrival angle theta (radians)."""

    idx = np.arange(n)
    return np.exp(-2j * np.pi * spacing * np.sin(theta) * idx) / np.sqrt(n)


@dataclass(frozen=True)
class MimoChannel:
    """Multipath uplink channel: h[:, k] = sqrt(N/Q) * sum_q beta_kq * a(theta_kq)."""

    h: np.ndarray
    gains: np.ndarray  # (K, Q) complex path gains
    angles: np.ndarray  # (K, Q) arrival angles, radians
    spacing: float = 0.5

    @property
    def n_antennas(self) -> int:
        return self.h.shape[0]

    @property
    def n_users(self) -> int:
        return self.h.shape[1]


def draw_channel(n: int, k: int, paths: int, rng: np.random.Generator,
                 spacing: float = 0.5) -> MimoChannel:
    """Draw a channel with complex circular Gaussian path gains.

    Angles are uniform on (-pi/2, pi/2]; gains have zero mean and unit
    variance.  Deterministic for a fixed generator state.
    """

    if min(n, k, paths) < 1:
        raise ValueError("n, k and paths must all be >= 1")
    gains = (rng.standard_normal((k, paths)) + 1j * rng.standard_normal((k, paths)))
    gains /= np.sqrt(2.0)
    angles = np.pi * rng.random((k, paths)) - np.pi / 2.0
    h = np.zeros((n, k), dtype=np.complex128)
    for kk in range(k):
        col = np.zeros(n, dtype=np.complex128)
        for q in range(paths):
            col += gains[kk, q] * steering_vector(angles[kk, q], n, spacing)
        h[:, kk] = np.sqrt(n / paths) * col
    return MimoChannel(h, gains, angles, spacing)


@dataclass(frozen=True)
class FrameRecord:
    """One transmitted frame: inputs, channel outputs, and the noise level."""

    sent_symbols: np.ndarray  # (K, M) constellation symbols before impairments
    distorted: np.ndarray  # (K, M) signals after the transmit chain
    received: np.ndarray  # (N, M)
    noise_variance: float  # per complex receive sample


def transmit_frame(symbols: np.ndarray, imps: Sequence[ImpairmentParams],
                   ch: MimoChannel, snr_db: float,
                   rng: np.random.Generator) -> FrameRecord:
    """Push a K x M symbol block through impairments, channel and AWGN.

    The noise variance derives from snr_db against unit transmitted symbol
    power; snr_db = inf disables noise entirely.
    """

    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.ndim != 2 or symbols.size == 0:
        raise ValueError("symbols must be a nonempty K x M matrix")
    k, m = symbols.shape
    if ch.n_users != k:
        raise ValueError(f"channel has {ch.n_users} users, symbols have {k}")
    if len(imps) != k:
        raise ValueError(f"need impairments for all {k} users, got {len(imps)}")

    s = np.empty_like(symbols)
    for kk in range(k):
        s[kk] = imps[kk].distort(symbols[kk])

    y = ch.h @ s
    if math.isinf(snr_db):
        sigma2 = 0.0
    else:
        sigma2 = 10.0 ** (-snr_db / 10.0)
        noise = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        y = y + np.sqrt(sigma2 / 2.0) * noise
    return FrameRecord(symbols, s, y, sigma2)


def to_real(v: np.ndarray) -> np.ndarray:
    """Real stacking: vectors -> (Re; Im), matrices -> [[Re, -Im], [Im, Re]]."""

    v = np.asarray(v)
    if v.ndim <= 1:
        v = np.atleast_1d(v)
        return np.concatenate([v.real, v.imag]).astype(np.float64)
    if v.ndim == 2:
        return np.block([[v.real, -v.imag], [v.imag, v.real]]).astype(np.float64)
    raise ValueError(f"to_real supports at most 2 dimensions, got {v.ndim}")


def to_real_block(x: np.ndarray) -> np.ndarray:
    """Columnwise real stacking of a complex (K, M) block into (2K, M)."""

    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=0).astype(np.float64)


def from_real(v: np.ndarray) -> np.ndarray:
    """Inverse of to_real for stacked vectors or columnwise blocks."""

    v = np.asarray(v, dtype=np.float64)
    half = v.shape[0] // 2
    if 2 * half != v.shape[0]:
        raise ValueError("stacked input must have even leading dimension")
    return v[:half] + 1j * v[half:]
