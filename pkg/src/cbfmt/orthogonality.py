"""Orthogonality conditions for cyclic filter-bank pulses.

Several equivalent formulations are implemented so that they can be checked
against each other:

* time-domain cross-convolution of modulated pulses sampled every ``N``;
* the frequency-domain sums over the ``N`` aliases of each bin;
* ``N_s = gcd(Q, L)`` small matrices whose columns must be orthonormal;
* for ``K == N``, unit-modulus DFTs of the sub-band vectors.

The module also constructs random orthogonal pulses and reuses a
frequency-confined orthogonal pulse for scaled parameter sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .filterbank import FilterBankParams, PrototypePulse
from .transforms import cyclic_shift

__all__ = [
    "DEFAULT_TOLERANCE",
    "OrthReport",
    "OrthMatrix",
    "PreconditionError",
    "subband_vectors",
    "pulse_from_subband_vectors",
    "ccf_time",
    "ccf_freq",
    "isi_residuals",
    "ici_residuals_reduced",
    "ici_residuals_full",
    "check_gnc",
    "index_maps",
    "build_orth_matrices",
    "check_matrix_orthogonality",
    "check_critically_sampled",
    "random_orthogonal_pulse",
    "is_frequency_confined",
    "extend_pulse_length",
    "resample_pulse",
    "equivalent_filter_autocorrelation",
    "check_equivalent_filter_orthogonality",
]

DEFAULT_TOLERANCE = 1e-8
CONFINEMENT_TOLERANCE = 1e-10


class PreconditionError(ValueError):
    """Raised when a pulse does not meet the requirements of a reuse construction."""


@dataclass
class OrthReport:
    """Outcome of an orthogonality check."""

    max_isi_residual: float
    max_ici_residual: float
    tolerance: float
    params: FilterBankParams | None = None
    extra: dict = field(default_factory=dict)

    @property
    def is_orthogonal(self) -> bool:
        return bool(self.max_isi_residual <= self.tolerance and self.max_ici_residual <= self.tolerance)

    def to_dict(self) -> dict:
        out = {
            "is_orthogonal": self.is_orthogonal,
            "max_isi_residual": float(self.max_isi_residual),
            "max_ici_residual": float(self.max_ici_residual),
            "tolerance": float(self.tolerance),
            "params": None if self.params is None else {
                "K": self.params.K, "N": self.params.N, "M": self.params.M},
        }
        out.update(self.extra)
        return out


@dataclass
class OrthMatrix:
    """One ``N x K`` orthogonality matrix; column ``j`` is a shifted sub-band vector over sqrt(N)."""

    p: int
    H: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def gram(self) -> np.ndarray:
        return self.H.conj().T @ self.H


def subband_vectors(pulse: PrototypePulse) -> np.ndarray:
    """``L x N`` array whose row ``p`` holds ``G(p + i L)``, i = 0..N-1."""
    p = pulse.params
    return pulse.G.reshape(p.N, p.L).T.copy()


def pulse_from_subband_vectors(vectors, params: FilterBankParams, metadata=None) -> PrototypePulse:
    """Inverse of :func:`subband_vectors`."""
    v = np.asarray(vectors, dtype=complex)
    if v.shape != (params.L, params.N):
        raise ValueError(f"expected {params.L}x{params.N} sub-band vectors")
    return PrototypePulse(v.T.reshape(-1), params, dict(metadata or {}))


def _check_pair(pulse_tx: PrototypePulse, pulse_rx: PrototypePulse, k: int, i: int):
    if pulse_tx.params != pulse_rx.params and (
            (pulse_tx.params.K, pulse_tx.params.N, pulse_tx.params.M)
            != (pulse_rx.params.K, pulse_rx.params.N, pulse_rx.params.M)):
        raise ValueError("pulses must share filter bank parameters")
    K = pulse_tx.params.K
    if not (0 <= k < K and 0 <= i < K):
        raise ValueError(f"sub-channel indices must lie in [0, {K})")


def ccf_time(pulse_tx: PrototypePulse, pulse_rx: PrototypePulse, k: int, i: int) -> np.ndarray:
    """Cross-convolution of sub-channel pulses ``k`` and ``i`` sampled at ``m N``.

    The receiver prototype is the matched filter of ``pulse_rx``,
    ``h(n) = conj(g_rx(-n))``, and both pulses are modulated by
    ``exp(+i 2 pi n k / K)``.
    """
    _check_pair(pulse_tx, pulse_rx, k, i)
    p = pulse_tx.params
    n = np.arange(p.M)
    gk = pulse_tx.g * np.exp(2j * np.pi * n * k / p.K)
    h = np.conj(pulse_rx.g[(-n) % p.M])
    hi = h * np.exp(2j * np.pi * n * i / p.K)
    r = np.fft.ifft(np.fft.fft(gk) * np.fft.fft(hi))
    return r[:: p.N].copy()


def ccf_freq(pulse_tx: PrototypePulse, pulse_rx: PrototypePulse, k: int, i: int) -> np.ndarray:
    """``L``-point DFT of :func:`ccf_time` evaluated from the pulse spectra.

    ``R(p) = (1/N) sum_s G(p + sL - kQ) H(p + sL - iQ)`` with ``H = conj(G_rx)``
    and all bins reduced modulo ``M``.
    """
    _check_pair(pulse_tx, pulse_rx, k, i)
    p = pulse_tx.params
    bins = np.arange(p.L)[:, None] + p.L * np.arange(p.N)[None, :]
    G = pulse_tx.G[(bins - k * p.Q) % p.M]
    H = np.conj(pulse_rx.G[(bins - i * p.Q) % p.M])
    return (G * H).sum(axis=1) / p.N


def _alias_table(pulse: PrototypePulse) -> np.ndarray:
    """``G(p + sL + kQ)`` for every k, p, s; shape (K, L, N)."""
    p = pulse.params
    bins = (np.arange(p.L)[None, :, None] + p.L * np.arange(p.N)[None, None, :]
            + p.Q * np.arange(p.K)[:, None, None]) % p.M
    return pulse.G[bins]


def isi_residuals(pulse: PrototypePulse) -> np.ndarray:
    """``(1/N) sum_s |G(p + sL + kQ)|^2 - 1`` for all ``k, p``; shape (K, L)."""
    table = _alias_table(pulse)
    return (np.abs(table) ** 2).sum(axis=2) / pulse.params.N - 1.0


def ici_residuals_reduced(pulse: PrototypePulse) -> np.ndarray:
    """``(1/N) sum_s G(p + sL) conj(G(p + sL + kQ))`` for ``k = 1..K-1``; shape (K-1, L)."""
    table = _alias_table(pulse)
    return (table[0][None] * np.conj(table[1:])).sum(axis=2) / pulse.params.N


def ici_residuals_full(pulse: PrototypePulse) -> np.ndarray:
    """Cross terms for every ordered pair ``k != i``; shape (K, K, L) with zero diagonal."""
    table = _alias_table(pulse)
    out = np.einsum("kps,ips->kip", table, np.conj(table)) / pulse.params.N
    idx = np.arange(pulse.params.K)
    out[idx, idx] = 0.0
    return out


def check_gnc(pulse: PrototypePulse, tolerance: float = DEFAULT_TOLERANCE) -> OrthReport:
    """Energy condition on every alias set plus the reduced cross-term condition."""
    isi = float(np.max(np.abs(isi_residuals(pulse))))
    ici = float(np.max(np.abs(ici_residuals_reduced(pulse)))) if pulse.params.K > 1 else 0.0
    return OrthReport(isi, ici, tolerance, pulse.params)


def index_maps(params: FilterBankParams, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Sub-band index ``c = (p + jQ) mod L`` and shift ``d = (p + jQ - c) / L`` per column j."""
    total = p + params.Q * np.arange(params.K)
    c = total % params.L
    d = (total - c) // params.L
    return c, d


def build_orth_matrices(pulse: PrototypePulse) -> list[OrthMatrix]:
    """The ``N_s`` matrices whose orthonormal columns certify orthogonality."""
    p = pulse.params
    vectors = subband_vectors(pulse)
    scale = 1.0 / math.sqrt(p.N)
    out = []
    for row in range(p.Ns):
        c, d = index_maps(p, row)
        H = np.stack([cyclic_shift(vectors[cj], dj) for cj, dj in zip(c, d)], axis=1) * scale
        out.append(OrthMatrix(row, H, c, d))
    return out


def check_matrix_orthogonality(pulse: PrototypePulse, tolerance: float = DEFAULT_TOLERANCE) -> OrthReport:
    """Test ``H^H H = I`` for each orthogonality matrix."""
    isi = 0.0
    ici = 0.0
    eye = np.eye(pulse.params.K)
    for mat in build_orth_matrices(pulse):
        dev = mat.gram() - eye
        diag = np.abs(np.diag(dev))
        isi = max(isi, float(diag.max()))
        off = np.abs(dev - np.diag(np.diag(dev)))
        ici = max(ici, float(off.max()))
    return OrthReport(isi, ici, tolerance, pulse.params)


def check_critically_sampled(pulse: PrototypePulse, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    """For ``K == N``: every sub-band vector has a unit-modulus DFT (after 1/sqrt(N))."""
    p = pulse.params
    if p.K != p.N:
        raise ValueError("unit-modulus criterion applies only when K == N")
    spectra = np.fft.fft(subband_vectors(pulse), axis=1) / math.sqrt(p.N)
    return bool(np.max(np.abs(np.abs(spectra) - 1.0)) <= tolerance)


def random_orthogonal_pulse(params: FilterBankParams, seed=None) -> PrototypePulse:
    """Draw a random orthogonal pulse.

    For each group ``p < N_s`` a vector with unit-modulus DFT (random phases)
    is drawn; its cyclic shifts form an ``N x N`` unitary circulant. Every
    sub-band vector of the group is set to this vector, so the columns of the
    group's orthogonality matrix are the shifts ``d(p, j)``, which are distinct
    because ``Q >= L``. This keeps ``K`` of the ``N`` circulant columns.
    """
    rng = np.random.default_rng(seed)
    N = params.N
    base = np.empty((params.Ns, N), dtype=complex)
    for group in range(params.Ns):
        phases = rng.uniform(0.0, 2 * np.pi, size=N)
        base[group] = math.sqrt(N) * np.fft.ifft(np.exp(1j * phases))
    vectors = base[np.arange(params.L) % params.Ns]
    return pulse_from_subband_vectors(vectors, params, {"designer": "random_orthogonal", "seed": seed})


def is_frequency_confined(pulse: PrototypePulse, tolerance: float = CONFINEMENT_TOLERANCE) -> bool:
    """True when every bin at or above ``Q`` is negligible relative to the peak."""
    mags = np.abs(pulse.G)
    peak = mags.max()
    if peak == 0:
        return False
    return bool(mags[pulse.params.Q:].max(initial=0.0) <= tolerance * peak)


def _require_reusable(pulse: PrototypePulse, label: str):
    if not check_gnc(pulse).is_orthogonal:
        raise PreconditionError(f"{label}: mother pulse is not orthogonal")
    if not is_frequency_confined(pulse):
        raise PreconditionError(f"{label}: mother pulse is not confined to its first Q bins")


def _scaled_int(value, factor, name) -> int:
    scaled = Fraction(value) * factor
    if scaled.denominator != 1:
        raise ValueError(f"{name} * alpha = {scaled} is not an integer")
    return int(scaled)


def extend_pulse_length(pulse: PrototypePulse, alpha1) -> PrototypePulse:
    """Reuse a confined pulse for ``(a K, a N, a M)``: same ``Q`` bins, longer block."""
    _require_reusable(pulse, "length extension")
    factor = Fraction(alpha1).limit_denominator(10**6)
    if factor <= 0:
        raise ValueError("alpha must be positive")
    p = pulse.params
    new = FilterBankParams(_scaled_int(p.K, factor, "K"), _scaled_int(p.N, factor, "N"),
                           _scaled_int(p.M, factor, "M"), p.T, p.mu)
    G = np.zeros(new.M, dtype=complex)
    G[: p.Q] = math.sqrt(float(factor)) * pulse.G[: p.Q]
    meta = dict(pulse.metadata, derived_from=p.label(), extension="length", alpha=float(factor))
    return PrototypePulse(G, new, meta)


def resample_pulse(pulse: PrototypePulse, alpha2: int) -> PrototypePulse:
    """Reuse a confined pulse for ``(a K, a N, M)`` by keeping every ``a``-th bin."""
    if int(alpha2) != alpha2 or alpha2 < 1:
        raise ValueError("alpha must be a positive integer")
    alpha2 = int(alpha2)
    p = pulse.params
    if p.Q % alpha2:
        raise ValueError(f"alpha={alpha2} does not divide Q={p.Q}")
    _require_reusable(pulse, "frequency resampling")
    new = FilterBankParams(alpha2 * p.K, alpha2 * p.N, p.M, p.T, p.mu)
    G = np.zeros(p.M, dtype=complex)
    width = p.Q // alpha2
    G[:width] = math.sqrt(alpha2) * pulse.G[: alpha2 * width: alpha2]
    meta = dict(pulse.metadata, derived_from=p.label(), extension="resample", alpha=alpha2)
    return PrototypePulse(G, new, meta)


def equivalent_filter_autocorrelation(g_eq, params: FilterBankParams) -> np.ndarray:
    """``sum_n g(n) conj(g(n - mN))`` over the cyclic block, for m = 0..L-1."""
    g = np.asarray(g_eq, dtype=complex)
    if g.size > params.M:
        raise ValueError("equivalent filter longer than the block")
    padded = np.zeros(params.M, dtype=complex)
    padded[: g.size] = g
    spectrum = np.fft.fft(padded)
    return np.fft.ifft(np.abs(spectrum) ** 2)[:: params.N]


def check_equivalent_filter_orthogonality(g_eq, params: FilterBankParams,
                                          tolerance: float = DEFAULT_TOLERANCE) -> bool:
    """True when the equivalent filter is orthogonal to its cyclic shifts by multiples of ``N``."""
    c = equivalent_filter_autocorrelation(g_eq, params)
    target = np.zeros(params.L)
    target[0] = 1.0
    return bool(np.max(np.abs(c - target)) <= tolerance)
