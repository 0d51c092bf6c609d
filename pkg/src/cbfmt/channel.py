"""Time-variant multipath channel with Clarke-correlated Rayleigh taps.

Taps are generated over the whole cyclic-prefix-plus-block segment, so a
realization holds ``P x (M + mu)`` coefficients ``alpha[s, n]`` and the
received sample is ``y(n) = sum_s alpha[s, n] x(n - s)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "ChannelSpec",
    "ChannelRealization",
    "NoiseSpec",
    "exponential_power_profile",
    "clarke_process",
    "draw_channel",
    "static_channel",
    "apply_channel",
    "channel_to_dict",
    "channel_from_dict",
]

DOPPLER_BINS = 256


@dataclass(frozen=True)
class ChannelSpec:
    """Statistical description of the medium.

    Parameters
    ----------
    P : int
        Number of taps.
    gamma : float
        Normalized delay spread of the exponential power profile, in samples.
    f_D_normalized : float
        Maximum Doppler shift times the sampling period.
    sigma2_n : float
        Noise variance per complex sample.
    """

    P: int = 5
    gamma: float = 2.0
    f_D_normalized: float = 2e-4
    sigma2_n: float = 1e-4

    def with_doppler(self, f_D_normalized: float) -> "ChannelSpec":
        return ChannelSpec(self.P, self.gamma, f_D_normalized, self.sigma2_n)


@dataclass
class ChannelRealization:
    """Tap coefficients over one CP-plus-block segment."""

    alpha: np.ndarray
    Omega: np.ndarray
    f_D_normalized: float = 0.0
    gamma: float = 0.0
    mu: int = 0
    seed: int | None = None

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=complex))

    @property
    def P(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_samples(self) -> int:
        return self.alpha.shape[1]

    @property
    def time_invariant(self) -> bool:
        return bool(np.all(self.alpha == self.alpha[:, :1]))

    def block_taps(self) -> np.ndarray:
        """Tap values over the block samples that follow the prefix."""
        return self.alpha[:, self.mu:]

    def impulse_response(self) -> np.ndarray:
        """Taps at the first block sample (the response of a static channel)."""
        return self.alpha[:, self.mu].copy()


@dataclass(frozen=True)
class NoiseSpec:
    sigma2_n: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.sigma2_n < 0:
            raise ValueError("noise variance must be non-negative")


def exponential_power_profile(P: int, gamma: float) -> np.ndarray:
    """Tap powers proportional to ``exp(-l / gamma)``, summing to one."""
    if P < 1 or gamma <= 0:
        raise ValueError("need P >= 1 and gamma > 0")
    w = np.exp(-np.arange(P) / gamma)
    return w / w.sum()


def _doppler_bins(f_D: float, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Bin centres over (-f_D, f_D) and the Jakes power integrated over each bin.

    Integrating ``1 / (pi sqrt(f_D^2 - f^2))`` gives arcsin differences, which
    keeps the diverging edge bins finite without clipping.
    """
    edges = np.linspace(-f_D, f_D, 2 * n_bins + 1)
    power = np.diff(np.arcsin(np.clip(edges / f_D, -1.0, 1.0))) / np.pi
    centres = 0.5 * (edges[1:] + edges[:-1])
    return centres, power


def clarke_process(f_D: float, n_samples: int, n_processes: int, rng, n_bins: int = DOPPLER_BINS) -> np.ndarray:
    """Unit-power complex Gaussian processes with autocorrelation close to ``J0(2 pi f_D n)``.

    White complex Gaussian bin amplitudes are shaped by the square root of the
    bin-integrated Jakes spectrum and transformed back to time on the sample
    grid.

    Returns
    -------
    numpy.ndarray
        Shape ``(n_processes, n_samples)``.
    """
    if f_D == 0:
        w = (rng.standard_normal(n_processes) + 1j * rng.standard_normal(n_processes)) / np.sqrt(2)
        return np.repeat(w[:, None], n_samples, axis=1)
    freqs, power = _doppler_bins(abs(f_D), n_bins)
    amps = (rng.standard_normal((n_processes, freqs.size))
            + 1j * rng.standard_normal((n_processes, freqs.size))) * np.sqrt(power / 2)
    return amps @ _doppler_phasors(abs(f_D), n_samples, n_bins)


@lru_cache(maxsize=8)
def _doppler_phasors(f_D: float, n_samples: int, n_bins: int) -> np.ndarray:
    freqs, _ = _doppler_bins(f_D, n_bins)
    out = np.exp(2j * np.pi * freqs[:, None] * np.arange(n_samples)[None, :])
    out.flags.writeable = False
    return out


def draw_channel(P: int, gamma: float, f_D_normalized: float, M: int, seed=None, mu: int = 0,
                 n_bins: int = DOPPLER_BINS) -> ChannelRealization:
    """One realization over ``M + mu`` samples; deterministic for a given seed."""
    if P < 1 or gamma <= 0:
        raise ValueError("need P >= 1 and gamma > 0")
    rng = np.random.default_rng(seed)
    Omega = exponential_power_profile(P, gamma)
    taps = clarke_process(f_D_normalized, M + mu, P, rng, n_bins)
    return ChannelRealization(np.sqrt(Omega)[:, None] * taps, Omega, f_D_normalized, gamma, mu,
                              seed if isinstance(seed, (int, np.integer)) else None)


def static_channel(taps, M: int, mu: int = 0) -> ChannelRealization:
    """Time-invariant channel with the given impulse response."""
    taps = np.asarray(taps, dtype=complex)
    power = np.abs(taps) ** 2
    return ChannelRealization(np.repeat(taps[:, None], M + mu, axis=1), power, 0.0, 0.0, mu)


def apply_channel(x_cp, ch: ChannelRealization, noise: NoiseSpec | None = None) -> np.ndarray:
    """Pass a CP-extended block (or a batch of columns) through the channel.

    Samples before the start of the segment are taken as zero; the prefix
    absorbs the resulting transient when ``mu >= P - 1``.
    """
    x = np.asarray(x_cp, dtype=complex)
    n = x.shape[0]
    if ch.n_samples < n:
        raise ValueError(f"channel covers {ch.n_samples} samples, input has {n}")
    alpha = ch.alpha[:, :n]
    extra = (1,) * (x.ndim - 1)
    y = np.zeros_like(x)
    for s in range(min(ch.P, n)):
        y[s:] += alpha[s, s:].reshape((-1,) + extra) * x[: n - s]
    if noise is not None and noise.sigma2_n > 0:
        rng = np.random.default_rng(noise.seed)
        w = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        y = y + np.sqrt(noise.sigma2_n / 2) * w
    return y


def channel_to_dict(ch: ChannelRealization) -> dict:
    return {"P": ch.P, "gamma": float(ch.gamma), "fD": float(ch.f_D_normalized), "seed": ch.seed,
            "mu": ch.mu, "Omega": [float(v) for v in ch.Omega],
            "alpha_re": [[float(v) for v in row] for row in ch.alpha.real],
            "alpha_im": [[float(v) for v in row] for row in ch.alpha.imag]}


def channel_from_dict(data: dict) -> ChannelRealization:
    alpha = np.asarray(data["alpha_re"], dtype=float) + 1j * np.asarray(data["alpha_im"], dtype=float)
    Omega = np.asarray(data.get("Omega", np.mean(np.abs(alpha) ** 2, axis=1)), dtype=float)
    return ChannelRealization(alpha, Omega, float(data["fD"]), float(data["gamma"]),
                              int(data.get("mu", 0)), data.get("seed"))
