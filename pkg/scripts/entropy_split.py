"""Gate entropy for Many vs Few test batches, Sigmoid gate against APA gate."""

import argparse

from apa.cli import entropy_table
from apa.experiments import default_toy, run_toy


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--imbalance", type=float, default=100.0)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--blocks", type=int, default=2)
    args = p.parse_args(argv)

    print(f"{'gate':<8} {'seed':>4} {'split':<5} {'layer':>5} {'entropy':>9} {'variance':>10}")
    for gate in ("sigmoid", "apa"):
        for seed in range(args.seeds):
            report, _ = run_toy(default_toy(args.imbalance, gate=gate, blocks=args.blocks).with_seed(seed))
            for r in entropy_table(report, "groups", 128):
                print(f"{gate:<8} {seed:>4} {r['split']:<5} {r['layer']:>5} {r['entropy']:9.4f} {r['variance']:10.2e}")


if __name__ == "__main__":
    main()
