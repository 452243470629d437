"""Run the desk-scale convergence studies and write one JSON record per study.

    python scripts/convergence_studies.py [--out results/convergence.jsonl] [--only SUBSTRING]

Each record holds levels, L2 errors, wall-clock seconds and step counts; the
summary line compares the least-squares order and the largest-N error with
the published table.
"""
import argparse
import json
import sys
from pathlib import Path

from sgcdg.cli import run_study
from sgcdg.problems import STUDIES


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", default="results/convergence.jsonl")
    ap.add_argument("--only", action="append", default=[],
                    help="run studies whose key contains this text (repeatable)")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    todo = [s for s in STUDIES if not args.only or any(o in s.key for o in args.only)]
    with out.open("a", encoding="utf-8") as fh:
        for study in todo:
            res = run_study(study)
            fh.write(json.dumps(res.as_dict()) + "\n")
            fh.flush()
            N = res.levels[-1]
            pub = study.published.get(N)
            rel = f"{res.errors[-1] / pub - 1:+.1%}" if pub else "n/a"
            print(f"{study.key}: errors {['%.3e' % e for e in res.errors]} order {res.order:.2f} "
                  f"N={N} vs published {rel} time {sum(res.seconds) / 60:.1f} min", flush=True)


if __name__ == "__main__":
    sys.exit(main())
