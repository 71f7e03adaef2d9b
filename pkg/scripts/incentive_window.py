"""Run all four dynamics with incentives switched on only inside a time window."""

import argparse
import sys

from drmech import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/window")
    ap.add_argument("--window", default="2,4")
    ap.add_argument("--t-end", default="6")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    argv = ["simulate", "--out", args.out, "--incentive-window", args.window, "--t-end", args.t_end,
            "--seed", args.seed, "--record-every", "50"]
    sys.exit(cli.main(argv + (["--svg"] if args.svg else [])))


if __name__ == "__main__":
    main()
