"""Run the appendix check suite and print one line per check.

Example: python3 scripts/validate_appendix.py --draws 200000
"""
import argparse
import sys

from curstat.appendix import SuiteConfig, run_suite, suite_passed


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=1_000_000)
    args = p.parse_args(argv)
    results = run_suite(SuiteConfig(seed=args.seed, draws=args.draws))
    for r in results:
        print(r.line())
    ok = suite_passed(results)
    print("all gating checks passed" if ok else "some gating checks FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
