"""Design IBOB-optimal and capacity-optimal pulses for a filter bank and save them as JSON.

Usage: python3 scripts/design_pulses.py --params 8,12,360 --restarts 50 --outdir pulses/
"""

import argparse
from pathlib import Path

from cbfmt.filterbank import FilterBankParams, save_pulse
from cbfmt.metrics import design_capacity_pulse, ibob_db, standard_setup
from cbfmt.orthogonality import check_gnc
from cbfmt.pulse_design import DesignSpec, design_pulse


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--params", default="8,12,360", help="K,N,M")
    parser.add_argument("--restarts", type=int, default=50, help="random starts for the IBOB design")
    parser.add_argument("--capacity-restarts", type=int, default=1)
    parser.add_argument("--capacity-batch", type=int, default=8, help="channel draws per objective evaluation")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--outdir", default="pulses")
    args = parser.parse_args()

    dims = tuple(int(v) for v in args.params.split(","))
    params = FilterBankParams(*dims)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tag = "_".join(map(str, dims))

    ibob = design_pulse(DesignSpec(params, "ibob", "real", n_starting_points=args.restarts, seed=args.seed), ibob_db)
    save_pulse(ibob.pulse, outdir / f"ibob_{tag}.json")
    print(f"ibob design {dims}: {ibob.objective_value:.2f} dB, "
          f"orthogonal={check_gnc(ibob.pulse).is_orthogonal}")

    setup = standard_setup()
    spec = DesignSpec(params, "capacity", "real", n_starting_points=args.capacity_restarts, seed=args.seed,
                      channel_model=setup, max_iter=40)
    cap = design_capacity_pulse(spec, setup, batch_size=args.capacity_batch)
    save_pulse(cap.pulse, outdir / f"capacity_{tag}.json")
    print(f"capacity design {dims}: batch objective {cap.objective_value:.2f} Mbps, "
          f"orthogonal={check_gnc(cap.pulse).is_orthogonal}")


if __name__ == "__main__":
    main()
