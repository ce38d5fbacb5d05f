"""The two shape-(3,3,2) partitions of [8] under rho = (1,2,1,...): exact and empirical."""
import argparse
import sys

from conpart.experiments import DEMO_MODEL, equal_probability_demo
from conpart.models import parse_model
from conpart.rng import RandomStream


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default=None, help="default: the fixed-H model that maximises hit rates")
    ap.add_argument("--samples", type=int, default=10**7)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    model = parse_model(args.model) if args.model else DEMO_MODEL
    rep = equal_probability_demo(RandomStream(args.seed), args.samples, model)
    e = rep.entries[0]
    print(f"exact {e.get('exact', 'n/a')}; hits {e['hits']}; ratio {e['ratio']:.4f} +- {e['ratio_se']:.4f}",
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
