"""Prototype pulse design.

Each sub-band vector ``v_p = (G(p), G(p + L), ...)`` is written in
hyper-spherical coordinates of radius ``sqrt(N)``, so the per-sub-band energy
condition holds for every angle draw and an optimizer only has to deal with
the cross terms. With a band limit ``Q2 <= Q`` the cross terms vanish as well
and the design becomes unconstrained.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .filterbank import FilterBankParams, PrototypePulse
from .orthogonality import build_orth_matrices, pulse_from_subband_vectors, subband_vectors

__all__ = [
    "AngleParams",
    "AngleLayout",
    "DesignSpec",
    "DesignResult",
    "DesignFailure",
    "FEASIBILITY_TOLERANCE",
    "hypersphere_vector",
    "vector_to_angles",
    "angles_to_pulse",
    "pulse_to_angles",
    "orthogonality_constraints",
    "rrc_pulse",
    "design_pulse",
]

log = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-8
PULSE_MODES = ("real", "complex")
METRICS = ("ibob", "capacity")


def hypersphere_vector(theta, phi, radius: float) -> np.ndarray:
    """Point on a sphere of the given radius from nested angles.

    ``v[0] = r cos(theta_0)``, ``v[i] = r sin(theta_0)...sin(theta_{i-1}) cos(theta_i)``
    and the last entry is the plain product of sines; entry ``i`` is then
    multiplied by ``exp(1j * phi[i])``.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1] + 1
    if phi is not None and np.size(phi) and np.shape(phi)[-1] != n:
        raise ValueError("need one phase per component")
    ones = np.ones(theta.shape[:-1] + (1,))
    sines = np.concatenate([ones, np.cumprod(np.sin(theta), axis=-1)], axis=-1)
    cosines = np.concatenate([np.cos(theta), ones], axis=-1)
    v = radius * sines * cosines
    if phi is None or np.size(phi) == 0:
        return v.astype(complex)
    return v * np.exp(1j * np.asarray(phi, dtype=float))


def vector_to_angles(v, real: bool) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`hypersphere_vector` (radius is discarded).

    In real mode the last angle is signed so that any real vector is reachable.
    """
    v = np.asarray(v, dtype=complex)
    n = v.size
    if real:
        x = v.real
        tail = np.sqrt(np.cumsum((x[::-1]) ** 2)[::-1])
        theta = np.arctan2(tail[1:], x[:-1]) if n > 1 else np.zeros(0)
        if n > 1:
            theta[-1] = math.atan2(x[-1], x[-2])
        return theta, np.zeros(n)
    r = np.abs(v)
    tail = np.sqrt(np.cumsum((r[::-1]) ** 2)[::-1])
    theta = np.arctan2(tail[1:], r[:-1]) if n > 1 else np.zeros(0)
    return theta, np.angle(v)


@dataclass
class AngleParams:
    """Per-sub-band angle sets.

    ``theta[p]`` has ``n_p - 1`` amplitude angles and ``phi[p]`` has ``n_p``
    phases (empty in real mode), where ``n_p`` counts the bins of sub-band ``p``
    below the band limit.
    """

    theta: list
    phi: list
    band_limit_Q2: int | None = None
    real: bool = True


class AngleLayout:
    """Bookkeeping between :class:`AngleParams` and a flat optimizer vector."""

    def __init__(self, params: FilterBankParams, band_limit_Q2: int | None = None, real: bool = True):
        Q2 = params.M if band_limit_Q2 is None else int(band_limit_Q2)
        if not params.L <= Q2 <= params.M:
            raise ValueError(f"band limit must lie in [L, M] = [{params.L}, {params.M}]")
        self.params = params
        self.band_limit_Q2 = band_limit_Q2
        self.Q2 = Q2
        self.real = real
        p = np.arange(params.L)
        self.sizes = np.minimum(params.N, -(-(Q2 - p) // params.L)).astype(int)
        self.n_theta = self.sizes - 1
        self.n_phi = np.zeros_like(self.sizes) if real else self.sizes.copy()
        # Sub-bands sharing a size are mapped in one vectorized call.
        theta_start = np.concatenate([[0], np.cumsum(self.n_theta)[:-1]])
        phi_start = self.n_theta.sum() + np.concatenate([[0], np.cumsum(self.n_phi)[:-1]])
        self._groups = []
        for size in np.unique(self.sizes):
            rows = np.flatnonzero(self.sizes == size)
            t_idx = theta_start[rows][:, None] + np.arange(size - 1)[None, :]
            f_idx = None if real else phi_start[rows][:, None] + np.arange(size)[None, :]
            self._groups.append((int(size), rows, t_idx, f_idx))

    @property
    def n_free(self) -> int:
        return int(self.n_theta.sum() + self.n_phi.sum())

    @property
    def constraints_vanish(self) -> bool:
        """Cross terms are identically zero when the band fits in one sub-channel."""
        return self.Q2 <= self.params.Q or self.params.K == 1

    def unpack(self, x) -> AngleParams:
        x = np.asarray(x, dtype=float)
        if x.size != self.n_free:
            raise ValueError(f"expected {self.n_free} angles, got {x.size}")
        split = np.cumsum(np.concatenate([self.n_theta, self.n_phi]))[:-1]
        parts = np.split(x, split)
        L = self.params.L
        return AngleParams(parts[:L], parts[L:], self.band_limit_Q2, self.real)

    def pack(self, angles: AngleParams) -> np.ndarray:
        self.validate(angles)
        pieces = [np.asarray(t, dtype=float) for t in angles.theta]
        if not self.real:
            pieces += [np.asarray(f, dtype=float) for f in angles.phi]
        return np.concatenate(pieces) if pieces else np.zeros(0)

    def validate(self, angles: AngleParams):
        L = self.params.L
        if len(angles.theta) != L or (not self.real and len(angles.phi) != L):
            raise ValueError(f"need angle sets for all {L} sub-bands")
        for p in range(L):
            if np.size(angles.theta[p]) != self.n_theta[p]:
                raise ValueError(f"sub-band {p}: expected {self.n_theta[p]} amplitude angles")
            if not self.real and np.size(angles.phi[p]) != self.n_phi[p]:
                raise ValueError(f"sub-band {p}: expected {self.n_phi[p]} phase angles")

    def random(self, rng) -> np.ndarray:
        theta = rng.uniform(0.0, np.pi, size=int(self.n_theta.sum()))
        phi = rng.uniform(0.0, 2 * np.pi, size=int(self.n_phi.sum()))
        return np.concatenate([theta, phi])

    def vectors(self, x) -> np.ndarray:
        """``L x N`` sub-band vectors for a flat angle vector."""
        x = np.asarray(x, dtype=float)
        if x.size != self.n_free:
            raise ValueError(f"expected {self.n_free} angles, got {x.size}")
        out = np.zeros((self.params.L, self.params.N), dtype=complex)
        radius = math.sqrt(self.params.N)
        for size, rows, t_idx, f_idx in self._groups:
            phi = None if f_idx is None else x[f_idx]
            out[rows, :size] = hypersphere_vector(x[t_idx], phi, radius)
        return out

    def pulse(self, x, metadata=None) -> PrototypePulse:
        return pulse_from_subband_vectors(self.vectors(x), self.params, metadata)


def angles_to_pulse(angles: AngleParams, params: FilterBankParams, metadata=None) -> PrototypePulse:
    """Assemble the pulse spectrum from per-sub-band angles."""
    layout = AngleLayout(params, angles.band_limit_Q2, angles.real)
    return layout.pulse(layout.pack(angles), metadata)


def pulse_to_angles(pulse: PrototypePulse, band_limit_Q2: int | None = None, real: bool = True) -> AngleParams:
    """Angles reproducing ``pulse`` (exact when its sub-band vectors have norm sqrt(N))."""
    layout = AngleLayout(pulse.params, band_limit_Q2, real)
    vectors = subband_vectors(pulse)
    if np.max(np.abs(vectors[np.arange(pulse.params.N)[None, :] >= layout.sizes[:, None]]), initial=0.0) > 0:
        raise ValueError("pulse has energy beyond the band limit")
    thetas, phis = [], []
    for p, size in enumerate(layout.sizes):
        theta, phi = vector_to_angles(vectors[p, :size], real)
        thetas.append(theta)
        phis.append(np.zeros(0) if real else phi)
    return AngleParams(thetas, phis, band_limit_Q2, real)


def _gram_residuals(pulse: PrototypePulse) -> np.ndarray:
    K = pulse.params.K
    upper = np.triu_indices(K, 1)
    out = []
    for mat in build_orth_matrices(pulse):
        vals = mat.gram()[upper]
        out.append(vals.real)
        out.append(vals.imag)
    return np.concatenate(out) if out else np.zeros(0)


def orthogonality_constraints(angles: AngleParams, params: FilterBankParams) -> np.ndarray:
    """Real and imaginary parts of the off-diagonal Gram entries of every orthogonality matrix.

    Length is ``2 * N_s * K (K - 1) / 2``; all zeros iff the pulse is orthogonal.
    """
    return _gram_residuals(angles_to_pulse(angles, params))


def rrc_pulse(params: FilterBankParams) -> PrototypePulse:
    """Root-raised-cosine spectrum with roll-off ``(Q - L) / L`` on the first ``Q`` bins.

    The response is centred at ``Q / 2`` and has zero phase. Each pair of bins
    spaced ``L`` apart is power complementary, so the pulse is orthogonal; for
    ``K == N`` it reduces to a flat window over the ``Q`` bins.
    """
    Q, L, M = params.Q, params.L, params.M
    beta = (Q - L) / L
    dist = np.abs(np.arange(Q) - Q / 2)
    lo = (1 - beta) * L / 2
    hi = (1 + beta) * L / 2
    shape = np.zeros(Q)
    shape[dist <= lo] = 1.0
    edge = (dist > lo) & (dist < hi)
    if beta > 0:
        shape[edge] = np.sqrt(0.5 * (1 + np.cos(np.pi / (beta * L) * (dist[edge] - lo))))
    G = np.zeros(M)
    G[:Q] = math.sqrt(params.N) * shape
    return PrototypePulse(G, params, {"designer": "rrc", "metric": "none", "seed": None, "rolloff": beta})


@dataclass
class DesignSpec:
    """What to design.

    ``band_limit_Q2=None`` confines the pulse to the first ``Q`` bins, which
    removes the cross-term constraints and keeps the pulse reusable under
    length extension and frequency resampling.
    """

    params: FilterBankParams
    metric: str = "ibob"
    pulse_mode: str = "real"
    n_starting_points: int = 500
    seed: int = 0
    band_limit_Q2: int | None = None
    channel_model: object = None
    max_iter: int = 200

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.pulse_mode not in PULSE_MODES:
            raise ValueError(f"pulse mode must be one of {PULSE_MODES}")
        if self.n_starting_points < 1:
            raise ValueError("need at least one starting point")
        if self.metric == "capacity" and self.channel_model is None:
            raise ValueError("capacity design needs a channel model")

    def layout(self) -> AngleLayout:
        Q2 = self.params.Q if self.band_limit_Q2 is None else self.band_limit_Q2
        return AngleLayout(self.params, Q2, self.pulse_mode == "real")


@dataclass
class RestartOutcome:
    index: int
    x: np.ndarray
    objective: float
    residual: float

    @property
    def feasible(self) -> bool:
        return self.residual <= FEASIBILITY_TOLERANCE


@dataclass
class DesignResult:
    pulse: PrototypePulse
    angles: AngleParams
    objective_value: float
    all_restart_values: list
    trace: list = field(default_factory=list)

    def trace_rows(self):
        return [(o.index, o.feasible, o.objective) for o in self.trace]


class DesignFailure(RuntimeError):
    """No restart produced a feasible pulse; carries the least infeasible iterate."""

    def __init__(self, message: str, best: RestartOutcome | None, pulse: PrototypePulse | None):
        super().__init__(message)
        self.best = best
        self.pulse = pulse


def _residual(layout: AngleLayout, x) -> float:
    if layout.constraints_vanish:
        return 0.0
    res = _gram_residuals(layout.pulse(x))
    return float(np.max(np.abs(res))) if res.size else 0.0


def _restart(layout: AngleLayout, objective, x0, max_iter: int, index: int) -> RestartOutcome:
    def negative(x):
        if not np.all(np.isfinite(x)):
            return np.inf
        return -float(objective(layout.pulse(x)))

    if layout.n_free == 0:
        x = x0
    elif layout.constraints_vanish:
        res = optimize.minimize(negative, x0, method="L-BFGS-B",
                                options={"maxiter": max_iter, "ftol": 1e-13, "gtol": 1e-9})
        x = res.x
    else:
        cons = {"type": "eq", "fun": lambda v: _gram_residuals(layout.pulse(v))}
        res = optimize.minimize(negative, x0, method="SLSQP", constraints=[cons],
                                options={"maxiter": max_iter, "ftol": 1e-12})
        x = res.x
        if _residual(layout, x) > FEASIBILITY_TOLERANCE:
            # Pull the iterate onto the constraint surface before giving up on it.
            fix = optimize.least_squares(lambda v: _gram_residuals(layout.pulse(v)), x,
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * x.size)
            x = fix.x
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        x = np.asarray(x0, dtype=float)  # the optimizer diverged; report the start instead
    return RestartOutcome(index, x, -negative(x), _residual(layout, x))


def design_pulse(spec: DesignSpec, objective: Callable[[PrototypePulse], float],
                 workers: int | None = None, initial_pulses=()) -> DesignResult:
    """Multi-start constrained maximization of ``objective`` over orthogonal pulses.

    Parameters
    ----------
    spec : DesignSpec
    objective : callable
        Maps a pulse to the value to maximize. Must be deterministic.
    workers : int, optional
        Thread count for running restarts concurrently.
    initial_pulses : sequence of PrototypePulse, optional
        Extra starting points run after the random ones, e.g. a known good
        pulse to refine. They must respect the band limit.

    Returns
    -------
    DesignResult
        Best feasible restart; raises :class:`DesignFailure` if none is feasible.
    """
    layout = spec.layout()
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_starting_points)
    starts = [layout.random(np.random.default_rng(s)) for s in seeds]
    starts += [layout.pack(pulse_to_angles(pl, layout.Q2, layout.real)) for pl in initial_pulses]

    def run(i):
        return _restart(layout, objective, starts[i], spec.max_iter, i)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, range(len(starts))))
    else:
        outcomes = [run(i) for i in range(len(starts))]

    feasible = [o for o in outcomes if o.feasible and np.isfinite(o.objective)]
    meta = {"designer": "multistart", "metric": spec.metric, "seed": spec.seed,
            "pulse_mode": spec.pulse_mode, "restarts": spec.n_starting_points,
            "band_limit_Q2": layout.Q2}
    if not feasible:
        best = min(outcomes, key=lambda o: o.residual)
        raise DesignFailure(f"no feasible pulse in {len(outcomes)} restarts "
                            f"(smallest residual {best.residual:.3e})", best, layout.pulse(best.x, meta))
    best = max(feasible, key=lambda o: o.objective)
    log.info("design %s: best %.6g from restart %d", spec.metric, best.objective, best.index)
    meta["objective"] = best.objective
    return DesignResult(layout.pulse(best.x, meta), layout.unpack(best.x), best.objective,
                        [o.objective for o in outcomes], outcomes)
