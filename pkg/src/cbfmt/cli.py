"""Command-line front end.

Subcommands::

    cbfmt design   design a pulse (IBOB or capacity objective)
    cbfmt check    certify a pulse file as orthogonal
    cbfmt extend   reuse a confined pulse for scaled parameters
    cbfmt sweep    mean achievable rate against normalized Doppler
    cbfmt simulate link report for one pulse

Settings may come from a TOML or JSON file given with ``--config``; command
line flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .filterbank import FilterBankParams, PrototypePulse, load_pulse, save_pulse
from .io import dumps, write_csv, write_json
from .metrics import average_capacity, design_capacity_pulse, ibob_db, link_report, standard_setup
from .channel import draw_channel
from .orthogonality import (DEFAULT_TOLERANCE, PreconditionError, check_critically_sampled, check_gnc,
                            check_matrix_orthogonality, extend_pulse_length, resample_pulse)
from .pulse_design import DesignFailure, DesignSpec, design_pulse, rrc_pulse

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("cbfmt")

SWEEP_HEADER = ["fD_normalized", "pulse_name", "mean_rate_bps", "std_rate_bps", "n_realizations"]
TRACE_HEADER = ["restart_index", "feasible", "objective"]

# Flag defaults, applied after the config file so that the file can override them.
DEFAULTS = {
    "params": None, "mu": 8, "T": 5e-8, "metric": "ibob", "pulse_mode": "real", "restarts": 500,
    "seed": 0, "fd": 2e-4, "realizations": 200, "batch": 8, "band_limit": None, "threads": 1,
    "snr_db": 40.0, "taps": 5, "gamma": 2.0, "fd_grid": None, "pulses": None, "max_iter": 200,
}


def load_config(path) -> dict:
    """Read a TOML or JSON experiment config into a flat dict of option names."""
    text = Path(path).read_bytes()
    if str(path).endswith(".json"):
        data = json.loads(text.decode("utf-8"))
    else:
        data = tomllib.loads(text.decode("utf-8"))
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return {k.replace("-", "_"): v for k, v in flat.items()}


def _settings(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key, value in vars(args).items():
        if value is not None:
            cfg[key] = value
    return cfg


def _params(cfg) -> FilterBankParams:
    raw = cfg["params"]
    if raw is None:
        raise SystemExit("--params K,N,M is required")
    if isinstance(raw, (list, tuple)):
        raw = ",".join(str(v) for v in raw)
    return FilterBankParams.parse(str(raw), T=float(cfg["T"]), mu=int(cfg["mu"]))


def _setup(cfg, fd=None):
    sigma2_n = 10.0 ** (-float(cfg["snr_db"]) / 10.0)
    return standard_setup(P=int(cfg["taps"]), gamma=float(cfg["gamma"]),
                          f_D_normalized=float(cfg["fd"] if fd is None else fd), sigma2_n=sigma2_n,
                          mu=int(cfg["mu"]), T=float(cfg["T"]), n_realizations=int(cfg["realizations"]))


def _report_dict(pulse: PrototypePulse, tolerance: float) -> dict:
    gnc = check_gnc(pulse, tolerance)
    mat = check_matrix_orthogonality(pulse, tolerance)
    out = gnc.to_dict()
    out["matrix_form"] = {"is_orthogonal": mat.is_orthogonal, "max_isi_residual": mat.max_isi_residual,
                          "max_ici_residual": mat.max_ici_residual}
    if pulse.params.critically_sampled:
        out["unit_modulus_dft"] = check_critically_sampled(pulse, tolerance)
    out["ibob_db"] = ibob_db(pulse)
    return out


def cmd_design(args) -> int:
    cfg = _settings(args)
    params = _params(cfg)
    band = None if cfg["band_limit"] is None else int(cfg["band_limit"])
    setup = _setup(cfg) if cfg["metric"] == "capacity" else None
    spec = DesignSpec(params, cfg["metric"], cfg["pulse_mode"], int(cfg["restarts"]), int(cfg["seed"]),
                      band, setup, int(cfg["max_iter"]))
    out = Path(cfg.get("out") or f"pulse_{params.K}_{params.N}_{params.M}.json")
    trace_path = Path(cfg.get("trace") or out.with_suffix(".trace.csv"))
    try:
        if spec.metric == "ibob":
            result = design_pulse(spec, ibob_db, workers=int(cfg["threads"]))
        else:
            result = design_capacity_pulse(spec, setup, batch_size=int(cfg["batch"]),
                                           per_realization=bool(cfg.get("per_realization", False)),
                                           workers=int(cfg["threads"]))
    except DesignFailure as exc:
        diag = {"error": str(exc), "params": params.label(), "metric": spec.metric, "seed": spec.seed}
        if exc.best is not None:
            diag.update(best_restart=exc.best.index, best_residual=exc.best.residual,
                        best_objective=exc.best.objective)
        write_json(diag, out.with_suffix(".failure.json"))
        sys.stderr.write(dumps(diag))
        return 2
    save_pulse(result.pulse, out)
    write_csv(trace_path, TRACE_HEADER, [(i, int(f), v) for i, f, v in result.trace_rows()])
    report = _report_dict(result.pulse, DEFAULT_TOLERANCE)
    report["objective"] = result.objective_value
    report["pulse_file"] = str(out)
    sys.stdout.write(dumps(report))
    return 0 if report["is_orthogonal"] else 1


def cmd_check(args) -> int:
    try:
        pulse = load_pulse(args.pulse)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    report = _report_dict(pulse, args.tolerance)
    sys.stdout.write(dumps(report))
    return 0 if report["is_orthogonal"] and report["matrix_form"]["is_orthogonal"] else 1


def cmd_extend(args) -> int:
    pulse = load_pulse(args.pulse)
    try:
        if args.mode == "length":
            new = extend_pulse_length(pulse, args.alpha)
        else:
            if float(args.alpha) != int(float(args.alpha)):
                raise ValueError("resampling needs an integer alpha")
            new = resample_pulse(pulse, int(float(args.alpha)))
    except PreconditionError as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    report = _report_dict(new, DEFAULT_TOLERANCE)
    if not report["is_orthogonal"]:
        sys.stderr.write(dumps(report))
        return 1
    out = args.out or f"pulse_{new.params.K}_{new.params.N}_{new.params.M}.json"
    save_pulse(new, out)
    report["pulse_file"] = str(out)
    sys.stdout.write(dumps(report))
    return 0


def _pulse_sources(cfg, params):
    sources = cfg["pulses"] or ["rrc"]
    out = []
    for src in sources:
        if src == "rrc":
            out.append(("rrc", rrc_pulse(params)))
        else:
            pulse = load_pulse(src)
            if (pulse.params.K, pulse.params.N, pulse.params.M) != (params.K, params.N, params.M):
                raise SystemExit(f"{src}: parameters {pulse.params.label()} differ from {params.label()}")
            out.append((Path(src).stem, pulse))
    return out


def _grid(raw):
    if raw is None:
        return []
    if isinstance(raw, str):
        return [float(v) for v in raw.split(",") if v.strip()]
    return [float(v) for v in raw]


def cmd_sweep(args) -> int:
    cfg = _settings(args)
    params = _params(cfg)
    grid = _grid(cfg["fd_grid"])
    rows = []
    sources = _pulse_sources(cfg, params) if grid else []
    for fd in grid:
        setup = _setup(cfg, fd)
        for name, pulse in sources:
            stats = average_capacity(pulse, setup, int(cfg["realizations"]), int(cfg["seed"]),
                                     workers=int(cfg["threads"]))
            rows.append((fd, name, stats.mean_rate, stats.std_rate, stats.n_realizations))
            log.info("fd=%g %s: %.4g bit/s", fd, name, stats.mean_rate)
    out = cfg.get("out") or "sweep.csv"
    write_csv(out, SWEEP_HEADER, rows)
    return 0


def cmd_simulate(args) -> int:
    cfg = _settings(args)
    params = _params(cfg)
    setup = _setup(cfg)
    (name, pulse), = _pulse_sources({"pulses": [cfg["pulses"][0] if cfg["pulses"] else "rrc"]}, params)
    pulse = PrototypePulse(pulse.G, setup.params_for(params), pulse.metadata)
    spec = setup.channel
    ch = draw_channel(spec.P, spec.gamma, spec.f_D_normalized, params.M, int(cfg["seed"]), setup.mu)
    report = link_report(pulse, ch, sigma2_n=setup.sigma2_n, sigma2_a=setup.sigma2_a).to_dict()
    stats = average_capacity(pulse, setup, int(cfg["realizations"]), int(cfg["seed"]), workers=int(cfg["threads"]))
    report["pulse_name"] = name
    report["mean_rate_bps"] = stats.mean_rate
    report["std_rate_bps"] = stats.std_rate
    report["n_realizations"] = stats.n_realizations
    text = dumps(report)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _common(sub):
    sub.add_argument("--config", help="TOML or JSON file with default settings")
    sub.add_argument("--params", help="K,N,M")
    sub.add_argument("--mu", type=int, help="cyclic prefix length (default 8)")
    sub.add_argument("--seed", type=int, help="random seed (default 0)")
    sub.add_argument("--threads", type=int, help="worker threads (default 1)")
    sub.add_argument("--out", help="output path")


def _channel_flags(sub):
    sub.add_argument("--fd", type=float, help="normalized Doppler f_D*T (default 2e-4)")
    sub.add_argument("--realizations", type=int, help="Monte-Carlo channel draws (default 200)")
    sub.add_argument("--snr-db", type=float, dest="snr_db", help="signal to noise ratio in dB (default 40)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbfmt", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    d = subs.add_parser("design", help="design an orthogonal prototype pulse")
    _common(d)
    _channel_flags(d)
    d.add_argument("--metric", choices=["ibob", "capacity"])
    d.add_argument("--pulse-mode", dest="pulse_mode", choices=["real", "complex"])
    d.add_argument("--restarts", type=int, help="random starting points (default 500)")
    d.add_argument("--band-limit", dest="band_limit", type=int, help="allowed nonzero bins Q2 (default Q)")
    d.add_argument("--batch", type=int, help="channel draws in the capacity objective (default 8)")
    d.add_argument("--max-iter", dest="max_iter", type=int, help="optimizer iterations per restart")
    d.add_argument("--trace", help="restart trace CSV path")
    d.set_defaults(func=cmd_design)

    c = subs.add_parser("check", help="certify a pulse file")
    c.add_argument("pulse")
    c.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    c.set_defaults(func=cmd_check)

    e = subs.add_parser("extend", help="reuse a confined pulse for scaled parameters")
    e.add_argument("pulse")
    e.add_argument("--mode", choices=["length", "resample"], required=True)
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_extend)

    s = subs.add_parser("sweep", help="mean rate against normalized Doppler")
    _common(s)
    _channel_flags(s)
    s.add_argument("--fd-grid", dest="fd_grid", help="comma separated f_D*T values")
    s.add_argument("--pulse", dest="pulses", action="append", help="'rrc' or a pulse file; repeatable")
    s.set_defaults(func=cmd_sweep)

    m = subs.add_parser("simulate", help="link report for one pulse")
    _common(m)
    _channel_flags(m)
    m.add_argument("--pulse", dest="pulses", action="append", help="'rrc' or a pulse file")
    m.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    np.seterr(over="ignore")
    handler = args.func
    del args.func, args.verbose, args.command
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
