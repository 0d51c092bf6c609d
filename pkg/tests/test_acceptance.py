"""Acceptance criteria with their tolerances pinned.

Every check reports through the ``criterion`` fixture, which prints one
PASS/FAIL line per check and a per-criterion summary at the end of the run.
Set ``CBFMT_LONG=1`` to also run the full 500-restart design.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.special import j0

from cbfmt import cli
from cbfmt.channel import (ChannelRealization, apply_channel, draw_channel, exponential_power_profile,
                           static_channel)
from cbfmt.equalization import channel_spectrum_2d, equivalent_filter_response, zf_coeffs
from cbfmt.filterbank import (FilterBankParams, PrototypePulse, add_cp, analyze, load_pulse, random_qam_block,
                              remove_cp, synthesize)
from cbfmt.metrics import RateEvaluator, average_capacity, design_capacity_pulse, ibob_db, standard_setup
from cbfmt.orthogonality import (ccf_freq, ccf_time, check_critically_sampled, check_gnc,
                                 check_matrix_orthogonality, extend_pulse_length, ici_residuals_full,
                                 ici_residuals_reduced, random_orthogonal_pulse, resample_pulse)
from cbfmt.pulse_design import AngleLayout, DesignSpec, design_pulse, rrc_pulse

from conftest import random_complex

# (K, N, M): RRC in-band to out-of-band ratio in dB
IBOB_TABLE = {
    (8, 8, 360): 20.62, (8, 9, 360): 45.33, (8, 12, 360): 56.88,
    (10, 10, 330): 19.24, (10, 11, 330): 34.15, (10, 15, 330): 52.59,
    (12, 12, 468): 19.98, (12, 13, 468): 34.79, (12, 18, 468): 54.94,
}
IBOB_TOL_DB = 0.1

# (K, N, M): RRC mean achievable rate in bit/s at f_D T = 2e-4
RATE_TABLE = {(8, 8, 360): 96.57e6, (10, 15, 330): 100.30e6, (8, 12, 360): 92.21e6}
RATE_REL_TOL = 0.05

DESIGN_RESTARTS = 50
DESIGN_TARGET_DB = 90.0
LONG_DESIGN_TARGET_DB = 110.0
RECT_IBOB_DB = 20.62
RECT_TOL_DB = 0.05

CLARKE_FD = 1e-2
CLARKE_LAGS = 200
CLARKE_REALIZATIONS = 5000
CLARKE_TOL = 0.03

ORTH_TOL = 1e-8


def _rrc_round_trip_error(pulse, rng):
    a = random_qam_block(pulse.params, rng, "16-QAM").a
    return float(np.max(np.abs(analyze(synthesize(a, pulse), pulse) - a)))


@pytest.fixture(scope="module")
def ibob_design(tmp_path_factory):
    """(8,12,360) IBOB design through the command line, 50 restarts."""
    out = tmp_path_factory.mktemp("design") / "ibob_8_12_360.json"
    start = time.perf_counter()
    code = cli.main(["design", "--params", "8,12,360", "--metric", "ibob", "--restarts", str(DESIGN_RESTARTS),
                     "--seed", "1", "--out", str(out)])
    elapsed = time.perf_counter() - start
    return code, load_pulse(out), elapsed


@pytest.fixture(scope="module")
def capacity_designs():
    """Capacity-designed pulses: RRC warm start plus one random start, batch of 8 draws."""
    setup = standard_setup()
    out = {}
    for dims in [(8, 12, 360), (10, 15, 330)]:
        p = FilterBankParams(*dims)
        spec = DesignSpec(p, "capacity", "real", n_starting_points=1, seed=123, channel_model=setup, max_iter=40)
        out[dims] = design_capacity_pulse(spec, setup, batch_size=8).pulse
    return out


def test_01_rrc_ibob_reproduction(criterion):
    start = time.perf_counter()
    values = {dims: ibob_db(rrc_pulse(FilterBankParams(*dims))) for dims in IBOB_TABLE}
    elapsed = time.perf_counter() - start
    ok = True
    for dims, target in IBOB_TABLE.items():
        hit = abs(values[dims] - target) <= IBOB_TOL_DB
        ok &= hit
        criterion(1, hit, f"RRC {dims}: {values[dims]:.2f} dB vs {target:.2f} +/- {IBOB_TOL_DB}")
    ok &= criterion(1, elapsed < 10, f"runtime {elapsed:.2f} s < 10 s")
    assert ok


def test_02_orthogonality_equivalence(criterion):
    families = [(4, 6, 24), (4, 4, 24), (8, 12, 360), (8, 8, 360), (10, 15, 330)]
    ok = True
    for dims in families:
        p = FilterBankParams(*dims)
        rng = np.random.default_rng(sum(dims))
        layout = AngleLayout(p, p.Q, real=False)
        pulses = []
        for j in range(200):
            kind = j % 4
            if kind == 0:
                pulse = random_orthogonal_pulse(p, j)
            elif kind == 1:
                pulse = layout.pulse(layout.random(rng))
            elif kind == 2:
                base = layout.pulse(layout.random(rng))
                G = base.G.copy()
                G[rng.integers(p.M)] *= 1 + rng.choice([1e-9, 1e-6, 1e-2])
                pulse = PrototypePulse(G, p)
            else:
                pulse = PrototypePulse(random_complex(rng, p.M), p)
            pulses.append(pulse)
        agree = 0
        worst_gap = 0.0
        n_orth = 0
        for pulse in pulses:
            a = check_gnc(pulse, ORTH_TOL).is_orthogonal
            b = check_matrix_orthogonality(pulse, ORTH_TOL).is_orthogonal
            c = check_critically_sampled(pulse, ORTH_TOL) if p.critically_sampled else a
            agree += a == b == c
            n_orth += a
            full = np.max(np.abs(ici_residuals_full(pulse)))
            reduced = np.max(np.abs(ici_residuals_reduced(pulse)))
            worst_gap = max(worst_gap, abs(full - reduced))
        ok &= criterion(2, agree == len(pulses),
                        f"{dims}: checkers agree on {agree}/{len(pulses)} pulses ({n_orth} orthogonal)")
        ok &= criterion(2, worst_gap <= 1e-12, f"{dims}: full vs reduced cross-term gap {worst_gap:.1e} <= 1e-12")
    assert ok


def test_03_perfect_reconstruction(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    pulses = [rrc_pulse(FilterBankParams(*dims)) for dims in IBOB_TABLE]
    pulses += [random_orthogonal_pulse(FilterBankParams(*dims), 11) for dims in IBOB_TABLE]
    small = FilterBankParams(4, 6, 24)
    designed = design_pulse(DesignSpec(small, "ibob", "complex", n_starting_points=3, seed=0), ibob_db).pulse
    pulses.append(designed)
    worst = max(_rrc_round_trip_error(pl, rng) for pl in pulses for _ in range(3))
    ok = criterion(3, worst < 1e-9, f"ideal medium, {len(pulses)} pulses: max error {worst:.1e} < 1e-9")

    worst_ch = 0.0
    mu = 8
    for pulse in pulses:
        p = pulse.params
        while True:
            taps = random_complex(rng, 5) / math.sqrt(10)
            G_eq = equivalent_filter_response(taps, p.M)
            if np.min(np.abs(G_eq)) > 0.05:
                break
        a = random_qam_block(p, rng, "QPSK").a
        y = remove_cp(apply_channel(add_cp(synthesize(a, pulse), mu), static_channel(taps, p.M, mu)), mu)
        z = analyze(np.fft.ifft(np.fft.fft(y) * zf_coeffs(G_eq).C), pulse)
        worst_ch = max(worst_ch, float(np.max(np.abs(z - a))))
    ok &= criterion(3, worst_ch < 1e-8, f"prefix + LTI channel + ZF: max error {worst_ch:.1e} < 1e-8")
    elapsed = time.perf_counter() - start
    ok &= criterion(3, elapsed < 30, f"runtime {elapsed:.2f} s < 30 s")
    assert ok


def test_04_oracle_equivalence(criterion):
    rng = np.random.default_rng(4)
    worst = {"ccf time": 0.0, "ccf freq": 0.0, "synthesis": 0.0, "G_eq product": 0.0, "H2 double sum": 0.0}
    for dims in [(4, 6, 24), (4, 4, 32), (2, 3, 12), (4, 8, 32)]:
        p = FilterBankParams(*dims)
        tx = PrototypePulse(random_complex(rng, p.M), p)
        rx = PrototypePulse(random_complex(rng, p.M), p)
        n = np.arange(p.M)
        for k in range(p.K):
            for i in range(p.K):
                gk = tx.g * np.exp(2j * np.pi * n * k / p.K)
                hi = np.conj(rx.g[(-n) % p.M]) * np.exp(2j * np.pi * n * i / p.K)
                ref = np.array([sum(gk[t] * hi[(m * p.N - t) % p.M] for t in range(p.M)) for m in range(p.L)])
                r = ccf_time(tx, rx, k, i)
                worst["ccf time"] = max(worst["ccf time"], np.max(np.abs(r - ref)))
                ell = np.arange(p.L)
                dft_ref = np.array([np.sum(ref * np.exp(-2j * np.pi * ell * q / p.L)) for q in range(p.L)])
                worst["ccf freq"] = max(worst["ccf freq"], np.max(np.abs(ccf_freq(tx, rx, k, i) - dft_ref)))
        a = random_complex(rng, p.K, p.L)
        x_ref = np.array([sum(a[k, ell] * tx.g[(t - ell * p.N) % p.M] * np.exp(2j * np.pi * t * k / p.K)
                              for k in range(p.K) for ell in range(p.L)) for t in range(p.M)])
        worst["synthesis"] = max(worst["synthesis"], np.max(np.abs(synthesize(a, tx) - x_ref)))

        mu = 4
        x = random_complex(rng, p.M)
        taps = random_complex(rng, 3)
        y = remove_cp(apply_channel(add_cp(x, mu), static_channel(taps, p.M, mu)), mu)
        X = np.array([np.sum(x * np.exp(-2j * np.pi * n * q / p.M)) for q in range(p.M)])
        Y = np.array([np.sum(y * np.exp(-2j * np.pi * n * q / p.M)) for q in range(p.M)])
        G_eq = np.array([np.sum(taps * np.exp(-2j * np.pi * np.arange(3) * q / p.M)) for q in range(p.M)])
        worst["G_eq product"] = max(worst["G_eq product"], np.max(np.abs(Y - G_eq * X)),
                                    np.max(np.abs(equivalent_filter_response(taps, p.M) - G_eq)))

        alpha = random_complex(rng, 3, p.M + mu)
        ch = ChannelRealization(alpha, np.ones(3), mu=mu)
        y = remove_cp(apply_channel(add_cp(x, mu), ch), mu)
        Y = np.array([np.sum(y * np.exp(-2j * np.pi * n * q / p.M)) for q in range(p.M)])
        H2 = channel_spectrum_2d(ch, p.M).H2
        Y_ref = np.array([sum(X[j] * H2[j, (q - j) % p.M] for j in range(p.M)) for q in range(p.M)])
        worst["H2 double sum"] = max(worst["H2 double sum"], np.max(np.abs(Y - Y_ref)))
    ok = True
    for name, err in worst.items():
        ok &= criterion(4, err < 1e-10, f"{name}: max deviation {err:.1e} < 1e-10")
    assert ok


def test_05_parameter_variation(criterion, ibob_design):
    _, mother, _ = ibob_design
    ok = True
    for label, pulse in [("designed", mother), ("rrc", rrc_pulse(FilterBankParams(8, 12, 360)))]:
        ext = extend_pulse_length(pulse, 3)
        res = resample_pulse(pulse, 3)
        dims_ext = (ext.params.K, ext.params.N, ext.params.M)
        dims_res = (res.params.K, res.params.N, res.params.M)
        r_ext, r_res = check_gnc(ext, ORTH_TOL), check_gnc(res, ORTH_TOL)
        ok &= criterion(5, dims_ext == (24, 36, 1080) and r_ext.is_orthogonal,
                        f"{label} length x3 -> {dims_ext}, residual {max(r_ext.max_isi_residual, r_ext.max_ici_residual):.1e}")
        ok &= criterion(5, dims_res == (24, 36, 360) and r_res.is_orthogonal,
                        f"{label} resample x3 -> {dims_res}, residual {max(r_res.max_isi_residual, r_res.max_ici_residual):.1e}")
    assert ok


def test_06_design_quality(criterion, ibob_design):
    code, pulse, elapsed = ibob_design
    value = ibob_db(pulse)
    ok = criterion(6, code == 0 and value >= DESIGN_TARGET_DB and check_gnc(pulse, ORTH_TOL).is_orthogonal,
                   f"(8,12,360) {DESIGN_RESTARTS} restarts: {value:.2f} dB >= {DESIGN_TARGET_DB} ({elapsed:.0f} s)")
    rect = design_pulse(DesignSpec(FilterBankParams(8, 8, 360), "ibob", "real", n_starting_points=5, seed=0),
                        ibob_db)
    ok &= criterion(6, abs(rect.objective_value - RECT_IBOB_DB) <= RECT_TOL_DB,
                    f"(8,8,360): {rect.objective_value:.3f} dB vs {RECT_IBOB_DB} +/- {RECT_TOL_DB}")
    assert ok


@pytest.mark.skipif(not os.environ.get("CBFMT_LONG"), reason="full 500-restart design; set CBFMT_LONG=1")
def test_06_design_quality_full_budget(criterion):
    spec = DesignSpec(FilterBankParams(8, 12, 360), "ibob", "real", n_starting_points=500, seed=1)
    value = design_pulse(spec, ibob_db).objective_value
    assert criterion(6, value >= LONG_DESIGN_TARGET_DB, f"(8,12,360) 500 restarts: {value:.2f} dB >= 110")


def test_07_clarke_statistics(criterion):
    start = time.perf_counter()
    n_samples = 800
    seeds = np.random.SeedSequence(7).spawn(CLARKE_REALIZATIONS)
    alpha = np.stack([draw_channel(5, 2.0, CLARKE_FD, n_samples, np.random.default_rng(s)).alpha for s in seeds])
    # average over realizations and over every time origin of the segment
    spectrum = np.fft.fft(alpha, 2 * n_samples, axis=2)
    acc = np.fft.ifft(np.abs(spectrum) ** 2, axis=2)[:, :, : CLARKE_LAGS + 1].mean(axis=0)
    lags = np.arange(CLARKE_LAGS + 1)
    r = acc / (n_samples - lags)
    omega = exponential_power_profile(5, 2.0)
    dev = np.max(np.abs(r - omega[:, None] * j0(2 * np.pi * CLARKE_FD * lags)), axis=1) / omega
    elapsed = time.perf_counter() - start
    ok = criterion(7, np.all(dev < CLARKE_TOL),
                   f"max |r - Omega J0| / Omega over lags <= {CLARKE_LAGS}: {dev.max():.4f} < {CLARKE_TOL} "
                   f"({CLARKE_REALIZATIONS} realizations)")
    ok &= criterion(7, elapsed < 60, f"runtime {elapsed:.1f} s < 60 s")
    assert ok


def test_08a_rrc_rate_reproduction(criterion):
    setup = standard_setup()
    ok = True
    for dims, target in RATE_TABLE.items():
        stats = average_capacity(rrc_pulse(FilterBankParams(*dims)), setup, 200, seed=0)
        rel = stats.mean_rate / target - 1
        ok &= criterion(8, abs(rel) <= RATE_REL_TOL,
                        f"RRC {dims}: {stats.mean_rate / 1e6:.2f} Mbps vs {target / 1e6:.2f} ({rel:+.1%}, tol 5%)")
    assert ok


def test_08b_capacity_design_beats_rrc(criterion, capacity_designs):
    setup = standard_setup()
    ok = True
    for dims, pulse in capacity_designs.items():
        p = FilterBankParams(*dims)
        ev = RateEvaluator(p, setup, 200, seed=2024)
        designed, baseline = ev.rates(pulse), ev.rates(rrc_pulse(p))
        gain = designed.mean() - baseline.mean()
        se = np.std(designed - baseline, ddof=1) / math.sqrt(designed.size)
        ok &= criterion(8, gain > 0 and check_gnc(pulse, ORTH_TOL).is_orthogonal,
                        f"capacity pulse {dims}: {designed.mean() / 1e6:.2f} > RRC {baseline.mean() / 1e6:.2f} Mbps "
                        f"(gain {gain / 1e6:.2f}, paired SE {se / 1e6:.2f})")
    assert ok


def test_09_static_channel_equivalence(criterion, ibob_design, capacity_designs):
    setup = standard_setup(f_D_normalized=0.0)
    p = FilterBankParams(8, 12, 360)
    base = average_capacity(rrc_pulse(p), setup, 200, seed=9)
    ok = True
    for label, pulse in [("ibob design", ibob_design[1]), ("capacity design", capacity_designs[(8, 12, 360)])]:
        other = average_capacity(pulse, setup, 200, seed=9)
        se = math.hypot(base.standard_error, other.standard_error)
        diff = other.mean_rate - base.mean_rate
        ok &= criterion(9, abs(diff) <= 2 * se,
                        f"{label} vs RRC at f_D = 0: |{diff / 1e6:.3f}| <= 2 x {se / 1e6:.3f} Mbps")
    # A random orthogonal pulse is not spectrally confined, so its analysis filter weights the
    # ZF-enhanced noise differently; it is reported for context and does not count toward the check.
    other = average_capacity(random_orthogonal_pulse(p, 4), setup, 200, seed=9)
    print(f"criterion 9: INFO random orthogonal (not designed) vs RRC at f_D = 0: "
          f"{(other.mean_rate - base.mean_rate) / 1e6:+.3f} Mbps")
    assert ok


def test_10_sinr_ordering(criterion):
    setup = standard_setup()
    mean_sinr = {}
    for N in (10, 11, 15):
        p = FilterBankParams(10, N, 330)
        mean_sinr[N] = average_capacity(rrc_pulse(p), setup, 200, seed=10).mean_sinr
    text = ", ".join(f"N={N}: {10 * math.log10(v):.2f} dB" for N, v in mean_sinr.items())
    assert criterion(10, mean_sinr[15] > mean_sinr[11] > mean_sinr[10], f"K=10 RRC mean SINR {text}")
