"""Print RRC in-band to out-of-band ratios and mean achievable rates next to the reference values.

Usage: python3 scripts/reproduce_tables.py [--realizations 200] [--seed 0]
"""

import argparse

from cbfmt.filterbank import FilterBankParams
from cbfmt.metrics import average_capacity, ibob_db, standard_setup
from cbfmt.pulse_design import rrc_pulse

IBOB_REFERENCE = {
    (8, 8, 360): 20.62, (8, 9, 360): 45.33, (8, 12, 360): 56.88,
    (10, 10, 330): 19.24, (10, 11, 330): 34.15, (10, 15, 330): 52.59,
    (12, 12, 468): 19.98, (12, 13, 468): 34.79, (12, 18, 468): 54.94,
}
RATE_REFERENCE = {(8, 8, 360): 96.57e6, (10, 15, 330): 100.30e6, (8, 12, 360): 92.21e6}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--realizations", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'K,N,M':>14} {'IBOB dB':>9} {'reference':>10} {'diff':>7}")
    for dims, ref in IBOB_REFERENCE.items():
        value = ibob_db(rrc_pulse(FilterBankParams(*dims)))
        print(f"{str(dims):>14} {value:9.2f} {ref:10.2f} {value - ref:+7.2f}")

    setup = standard_setup()
    print(f"\n{'K,N,M':>14} {'rate Mbps':>10} {'SE':>6} {'reference':>10} {'rel':>7}")
    for dims, ref in RATE_REFERENCE.items():
        stats = average_capacity(rrc_pulse(FilterBankParams(*dims)), setup, args.realizations, seed=args.seed)
        print(f"{str(dims):>14} {stats.mean_rate / 1e6:10.2f} {stats.standard_error / 1e6:6.2f} "
              f"{ref / 1e6:10.2f} {stats.mean_rate / ref - 1:+7.1%}")


if __name__ == "__main__":
    main()
