"""One-tap frequency-domain equalizers and end-to-end interference maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, apply_channel
from .filterbank import PrototypePulse, _analyze_spectrum, add_cp, synthesis_matrix

__all__ = [
    "EqualizerCoeffs",
    "ChannelSpectrum2D",
    "SingularChannelError",
    "equivalent_filter_response",
    "zf_coeffs",
    "mmse_tinv_coeffs",
    "channel_spectrum_2d",
    "tx_spectrum_power",
    "mmse_tvar_coeffs",
    "InterferenceMap",
    "interference_coefficients",
    "block_transfer",
]


class SingularChannelError(ValueError):
    """A zero-forcing equalizer was requested for a channel with a null bin."""


@dataclass
class EqualizerCoeffs:
    C: np.ndarray
    kind: str

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=complex)
        if not np.all(np.isfinite(self.C)):
            raise ValueError("equalizer coefficients must be finite")


@dataclass
class ChannelSpectrum2D:
    """``H2[p, r]``: gain from transmitted bin ``p`` to received bin ``p + r``.

    Normalized so that ``Y(q) = sum_p X(p) H2[p, (q - p) mod M]``.
    """

    H2: np.ndarray

    @property
    def M(self) -> int:
        return self.H2.shape[0]

    def diagonal_gain(self) -> np.ndarray:
        """``D(q) = H2[q, 0]``, the gain each bin applies to itself."""
        return self.H2[:, 0].copy()

    def transfer_matrix(self) -> np.ndarray:
        """Dense ``M x M`` map with ``Y = T @ X``."""
        M = self.M
        q = np.arange(M)
        return self.H2[q[None, :], (q[:, None] - q[None, :]) % M]


def equivalent_filter_response(taps, M: int) -> np.ndarray:
    """``M``-point DFT of a time-invariant impulse response."""
    g = np.zeros(M, dtype=complex)
    taps = np.asarray(taps, dtype=complex)
    g[: taps.size] = taps
    return np.fft.fft(g)


def zf_coeffs(G_eq) -> EqualizerCoeffs:
    G_eq = np.asarray(G_eq, dtype=complex)
    if np.any(np.abs(G_eq) == 0):
        raise SingularChannelError("channel response has a zero bin")
    return EqualizerCoeffs(1.0 / G_eq, "ZF")


def _composite_spectrum(pulse: PrototypePulse) -> np.ndarray:
    """``sum_k |G(q - kQ)|^2``: the pulse power landing on bin ``q`` from all sub-channels."""
    p = pulse.params
    q = np.arange(p.M)
    idx = (q[None, :] - p.Q * np.arange(p.K)[:, None]) % p.M
    return (np.abs(pulse.G[idx]) ** 2).sum(axis=0)


def mmse_tinv_coeffs(G_eq, pulse: PrototypePulse, sigma2_n: float) -> EqualizerCoeffs:
    """``C = conj(G_eq) / (|G_eq|^2 + sigma2_n / |G|^2)`` on active bins, zero elsewhere.

    ``|G(q)|^2`` is taken as the pulse power reaching bin ``q`` from every
    sub-channel, which equals ``|G(q)|^2`` on the first sub-channel's bins.
    """
    G_eq = np.asarray(G_eq, dtype=complex)
    power = _composite_spectrum(pulse)
    C = np.zeros_like(G_eq)
    active = power > 0
    denom = np.abs(G_eq[active]) ** 2 + sigma2_n / power[active]
    with np.errstate(divide="ignore", invalid="ignore"):
        C[active] = np.where(denom > 0, np.conj(G_eq[active]) / denom, 0.0)
    return EqualizerCoeffs(C, "MMSE_TINV")


def channel_spectrum_2d(ch: ChannelRealization, M: int | None = None) -> ChannelSpectrum2D:
    """Two-dimensional DFT of the taps over the block, divided by ``M``."""
    taps = ch.block_taps()
    M = taps.shape[1] if M is None else M
    taps = taps[:, :M]
    if taps.shape[1] != M or ch.P > M:
        raise ValueError("channel does not cover the block")
    padded = np.zeros((M, M), dtype=complex)
    padded[: ch.P] = taps
    return ChannelSpectrum2D(np.fft.fft2(padded) / M)


def tx_spectrum_power(pulse: PrototypePulse, sigma2_a: float = 1.0, tx=None) -> np.ndarray:
    """Transmit power per bin and per symbol slot, ``E|X(q)|^2 / L``.

    Read off the synthesis operator's row norms; it equals
    ``sigma2_a * sum_k |G(q - kQ)|^2``. ``tx`` may pass a precomputed
    :func:`~cbfmt.filterbank.synthesis_matrix`.
    """
    S = synthesis_matrix(pulse) if tx is None else tx
    return sigma2_a * (np.abs(S) ** 2).sum(axis=1) / pulse.params.L


def mmse_tvar_coeffs(h2: ChannelSpectrum2D, tx_power, sigma2_n: float) -> EqualizerCoeffs:
    """Per-bin MMSE that treats leakage from the other bins as noise.

    ``C(q) = conj(D) S / (|D|^2 S + sum_{p != q} S(p) |H2[p, q - p]|^2 + sigma2_n)``
    """
    H2 = h2.H2
    M = h2.M
    S = np.asarray(tx_power, dtype=float)
    q = np.arange(M)
    leak = np.abs(H2[q[:, None], (q[None, :] - q[:, None]) % M]) ** 2  # [p, q]
    D = h2.diagonal_gain()
    own = S * np.abs(D) ** 2
    interference = S @ leak - own
    denom = own + np.maximum(interference, 0.0) + sigma2_n
    num = np.conj(D) * S
    C = np.zeros(M, dtype=complex)
    ok = denom > 0
    C[ok] = num[ok] / denom[ok]
    return EqualizerCoeffs(C, "MMSE_TVAR")


def block_transfer(pulse: PrototypePulse, ch: ChannelRealization, eq: EqualizerCoeffs,
                   symbols, rx_responses=None) -> np.ndarray:
    """Noiseless chain: synthesis, prefix, channel, prefix removal, equalizer, analysis.

    ``symbols`` is ``K x L`` or ``K x L x B`` (batch of blocks).
    """
    a = np.asarray(symbols, dtype=complex)
    p = pulse.params
    batch = a.ndim == 3
    flat = a.reshape(p.K * p.L, -1)
    X = synthesis_matrix(pulse) @ flat
    return _chain(pulse, ch, eq, X, rx_responses).reshape((p.K, p.L) + ((flat.shape[1],) if batch else ()))


def _chain(pulse, ch, eq, X, rx_responses=None) -> np.ndarray:
    mu = ch.mu
    x = np.fft.ifft(X, axis=0)
    y = apply_channel(add_cp(x, mu), ch)[mu:]
    Y = np.fft.fft(y, axis=0) * eq.C[:, None]
    z = _analyze_spectrum(Y, pulse, rx_responses)
    return z.reshape(pulse.params.K * pulse.params.L, -1)


@dataclass
class InterferenceMap:
    """Linear map from transmitted to received symbols.

    ``matrix[i * L + m, k * L + l]`` is the weight of ``a[k, l]`` in ``z[i, m]``.
    """

    matrix: np.ndarray
    K: int
    L: int

    def coefficient(self, i: int, m: int, k: int, l: int) -> complex:
        return self.matrix[i * self.L + m, k * self.L + l]

    def useful(self) -> np.ndarray:
        return np.diag(self.matrix).reshape(self.K, self.L)

    def isi_power(self) -> np.ndarray:
        """Power from other symbols of the same sub-channel, per output."""
        T = np.abs(self.matrix.reshape(self.K, self.L, self.K, self.L)) ** 2
        same = T[np.arange(self.K), :, np.arange(self.K), :]  # (K, L, L)
        return np.maximum(same.sum(axis=2) - np.abs(self.useful()) ** 2, 0.0)

    def ici_power(self) -> np.ndarray:
        """Power from other sub-channels, per output."""
        T = np.abs(self.matrix.reshape(self.K, self.L, self.K, self.L)) ** 2
        total = T.sum(axis=(2, 3))
        same = T[np.arange(self.K), :, np.arange(self.K), :].sum(axis=2)
        return np.maximum(total - same, 0.0)

    def interference(self) -> np.ndarray:
        """Matrix with the useful diagonal removed."""
        out = self.matrix.copy()
        np.fill_diagonal(out, 0.0)
        return out


def interference_coefficients(pulse: PrototypePulse, ch: ChannelRealization, eq: EqualizerCoeffs,
                              rx_responses=None, tx=None) -> InterferenceMap:
    """Probe the noiseless chain with every unit symbol to get the ``KL x KL`` map.

    ``tx`` may pass a precomputed synthesis matrix when many channels are
    probed with the same pulse.
    """
    p = pulse.params
    X = synthesis_matrix(pulse) if tx is None else tx
    return InterferenceMap(_chain(pulse, ch, eq, X, rx_responses), p.K, p.L)
