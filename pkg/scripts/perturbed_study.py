#!/usr/bin/env python3
"""Convergence study on randomly perturbed quadrilateral meshes.

Interior vertices are shifted by O(h^2) so elements stay asymptotically
parallelogram; optimal orders should survive the perturbation.
"""

import argparse
import sys

from qncfem.cli import StudyConfig, StudyError, format_table, run_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=("r", "er", "rplus"), default="er")
    ap.add_argument("--variant", choices=("standard", "tilde"),
                    default="standard")
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--amplitude", type=float, default=0.2)
    args = ap.parse_args(argv)

    config = StudyConfig(
        family=args.family,
        variant=args.variant,
        m=args.order,
        levels=args.levels,
        min_level=2,
        mesh_kind="perturbed",
        seed=args.seed,
        amplitude=args.amplitude,
        max_iter_factor=400.0,
    )
    try:
        rows = run_study(config)
    except StudyError as err:
        print(f"error: {err}", file=sys.stderr)
        if err.rows:
            print(format_table(err.rows))
        return 1
    print(format_table(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
