"""Chain records on the unit cube: record counts against (log n)/d and (log n)/d^2."""
import argparse
import sys

from conpart.experiments import chain_record_clt
from conpart.rng import RandomStream


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--n-list", default="10000,100000,1000000")
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    rep = chain_record_clt(args.d, [int(v) for v in args.n_list.split(",")], args.reps,
                           RandomStream(args.seed), threads=args.threads)
    for e in rep.entries:
        print(f"d {args.d} n {e['n']:>8}: mean ratio {e['mean_ratio']:.4f} var ratio {e['var_ratio']:.4f}",
              file=sys.stderr)
    text = rep.to_json()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
