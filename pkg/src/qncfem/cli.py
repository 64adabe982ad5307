"""Convergence-study harness and command line interface.

Subcommands:
    run     solve the Poisson model problem over a mesh hierarchy and print
            an error/order table (optionally CSV)
    verify  run the reference-element property checks
    mesh    generate and save a mesh file
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import refelem
from .mesh import perturbed_mesh, save_mesh, uniform_rect_mesh
from .refelem import Family, Poly2D, build_reference_element
from .solve import SolverError, assemble, error_norms, solve
from .space import build_global_space

__all__ = [
    "StudyConfig",
    "StudyRow",
    "StudyError",
    "default_problem",
    "run_study",
    "emit",
    "main",
]


class StudyError(Exception):
    def __init__(self, msg, rows):
        super().__init__(msg)
        self.rows = rows


def default_problem():
    """Exact solution u = 16 (x - x^6)(y - y^2) on the unit square, with its
    gradient and the matching Poisson source f = -Laplacian(u)."""

    def u(x, y):
        return 16.0 * (x - x**6) * (y - y**2)

    def grad_u(x, y):
        return (
            16.0 * (1.0 - 6.0 * x**5) * (y - y**2),
            16.0 * (x - x**6) * (1.0 - 2.0 * y),
        )

    def f(x, y):
        return 16.0 * (30.0 * x**4 * (y - y**2) + 2.0 * (x - x**6))

    return u, grad_u, f


@dataclass
class StudyConfig:
    family: str = "er"  # "r" | "er" | "rplus"
    variant: str = "standard"
    m: int = 3
    dof_mode: str = "point"
    levels: int = 5
    mesh_kind: str = "uniform"  # "uniform" | "perturbed"
    seed: int = 0
    amplitude: float = 0.2
    rel_tol: float = 1e-13
    quad_order: int | None = None
    csv_path: str | None = None
    min_level: int = 1
    max_iter_factor: float = 40.0

    def family_obj(self) -> Family:
        tag = {"r": "R", "er": "ER", "rplus": "RPlus"}[self.family]
        return Family(tag, self.variant)


@dataclass
class StudyRow:
    level: int
    l2_err: float
    l2_order: float
    h1_err: float
    h1_order: float
    ndof: int
    iterations: int
    seconds: float


def _mesh_for_level(config: StudyConfig, level: int):
    n = 2 ** (level - 1)
    if config.mesh_kind == "uniform" or n < 2:
        return uniform_rect_mesh(n)
    return perturbed_mesh(n, seed=config.seed, amplitude=config.amplitude)


def run_study(config: StudyConfig, problem=None) -> list[StudyRow]:
    """Solve the model problem per refinement level; stop early at machine
    accuracy.  Raises StudyError with the partial table on solver failure."""
    u, grad_u, f = problem if problem is not None else default_problem()
    family = config.family_obj()
    rows: list[StudyRow] = []
    # reference scale for the early-stopping test
    mref = uniform_rect_mesh(8)
    sref = build_global_space(mref, family, config.m, config.dof_mode)
    u_norm = error_norms(sref, np.zeros(sref.n_free), u,
                         lambda x, y: (np.zeros_like(x), np.zeros_like(x)))[0]

    prev: StudyRow | None = None
    for level in range(config.min_level, config.levels + 1):
        t0 = time.perf_counter()
        mesh = _mesh_for_level(config, level)
        space = build_global_space(mesh, family, config.m, config.dof_mode)
        system = assemble(space, f, config.quad_order)
        system.rel_tol = config.rel_tol
        system.max_iter_factor = config.max_iter_factor
        try:
            coeffs, report = solve(system)
        except SolverError as err:
            raise StudyError(f"level {level}: {err}", rows) from err
        eq = None if config.quad_order is None else config.quad_order + 1
        l2, h1 = error_norms(space, coeffs, u, grad_u, eq)
        l2o = np.log2(prev.l2_err / l2) if prev is not None and l2 > 0 else 0.0
        h1o = np.log2(prev.h1_err / h1) if prev is not None and h1 > 0 else 0.0
        row = StudyRow(
            level=level,
            l2_err=l2,
            l2_order=float(l2o),
            h1_err=h1,
            h1_order=float(h1o),
            ndof=space.n_free,
            iterations=report.iterations,
            seconds=time.perf_counter() - t0,
        )
        rows.append(row)
        prev = row
        if l2 < 1e-14 * u_norm:
            break
    return rows


def format_table(rows: list[StudyRow]) -> str:
    lines = [
        "level        L2 error  rate       H1 error  rate     ndof  iters   sec"
    ]
    for r in rows:
        lines.append(
            f"{r.level:5d}  {r.l2_err:14.9f}  {r.l2_order:4.1f}  "
            f"{r.h1_err:13.8f}  {r.h1_order:4.1f}  {r.ndof:7d}  "
            f"{r.iterations:5d}  {r.seconds:5.1f}"
        )
    return "\n".join(lines)


def emit(rows: list[StudyRow], fmt: str = "text", path=None) -> str:
    """Render rows as text or CSV; write to path if given."""
    if not rows:
        raise ValueError("no rows to emit")
    if fmt == "text":
        out = format_table(rows) + "\n"
    elif fmt == "csv":
        lines = ["level,l2_err,l2_order,h1_err,h1_order,ndof,iters,seconds"]
        for r in rows:
            lines.append(
                f"{r.level},{r.l2_err:.12g},{r.l2_order:.12g},"
                f"{r.h1_err:.12g},{r.h1_order:.12g},{r.ndof},"
                f"{r.iterations},{r.seconds:.12g}"
            )
        out = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(out)
    return out


def _verify(args) -> int:
    """Reference-element property suite: unisolvency ranks, relation weights
    vs the Lagrange oracle, and relation residuals on random polynomials."""
    rng = np.random.default_rng(0)
    ok = True

    def report(name, passed, detail=""):
        nonlocal ok
        ok = ok and passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")

    for tag, orders in (("R", (1, 3, 5, 7)), ("ER", (1, 3, 5, 7)),
                        ("RPlus", (2, 4, 6))):
        for m in orders:
            ref = build_reference_element(Family(tag), m)
            rank = np.linalg.matrix_rank(ref.vandermonde)
            report(f"unisolvency {tag} m={m}", rank == ref.dim,
                   f"rank {rank} / dim {ref.dim}")
            if ref.constraint is not None:
                _, _, vt = np.linalg.svd(ref.vandermonde.T)
                null = vt[-1]
                w = np.zeros(len(ref.dofs))
                w[: len(ref.constraint)] = ref.constraint
                cos = abs(np.dot(null, w)) / np.linalg.norm(null) / np.linalg.norm(w)
                report(f"null vector {tag} m={m}", 1 - cos < 1e-10,
                       f"cosine distance {1 - cos:.2e}")

    for m in (1, 3, 5, 7):
        gamma = refelem.constraint_weights(Family("R"), m)[:m]
        oracle = refelem.constraint_weights_oracle(m)
        cos = np.dot(gamma, oracle) / np.linalg.norm(gamma) / np.linalg.norm(oracle)
        report(f"gamma oracle m={m}", abs(1 - cos) < 1e-12, f"1-cos {1 - cos:.2e}")
        res = max(
            refelem.verify_relation(m, Family("R"),
                                    Poly2D(rng.standard_normal((m + 1, m + 1))))
            for _ in range(100)
        )
        report(f"relation residual R m={m}", res < 1e-12, f"max {res:.2e}")
    for m in (2, 4, 6):
        basis = refelem.build_shape_space(Family("RPlus"), m)
        res = 0.0
        for _ in range(100):
            v = Poly2D.zero()
            for c, b in zip(rng.standard_normal(len(basis)), basis):
                v = v + c * b
            res = max(res, refelem.verify_relation(m, Family("RPlus"), v))
        report(f"relation residual RPlus m={m}", res < 1e-12, f"max {res:.2e}")
    return 0 if ok else 1


def _run(args) -> int:
    config = StudyConfig(
        family=args.family,
        variant=args.variant,
        m=args.order,
        dof_mode=args.dof_mode,
        levels=args.levels,
        mesh_kind=args.mesh,
        seed=args.seed,
        amplitude=args.amplitude,
        rel_tol=args.tol,
        quad_order=args.quad,
        csv_path=args.csv,
        max_iter_factor=args.iter_factor,
    )
    try:
        rows = run_study(config)
    except StudyError as err:
        if err.rows:
            print(emit(err.rows, "text"), end="")
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(emit(rows, "text"), end="")
    if config.csv_path:
        emit(rows, "csv", config.csv_path)
    return 0


def _mesh_cmd(args) -> int:
    if args.kind == "uniform":
        mesh = uniform_rect_mesh(args.n)
    else:
        mesh = perturbed_mesh(args.n, seed=args.seed, amplitude=args.amplitude)
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {len(mesh.vertices)} vertices, "
          f"{mesh.n_elements} quads")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qncfem",
        description="Nonconforming quadrilateral finite elements: "
                    "Poisson convergence studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a convergence study")
    p_run.add_argument("--family", choices=("r", "er", "rplus"), default="er")
    p_run.add_argument("--variant", choices=("standard", "tilde"),
                       default="standard")
    p_run.add_argument("--order", type=int, default=3, metavar="M")
    p_run.add_argument("--dof-mode", choices=("point", "moment"),
                       default="point")
    p_run.add_argument("--levels", type=int, default=5, metavar="L")
    p_run.add_argument("--mesh", choices=("uniform", "perturbed"),
                       default="uniform")
    p_run.add_argument("--seed", type=int, default=0, metavar="S")
    p_run.add_argument("--amplitude", type=float, default=0.2, metavar="A")
    p_run.add_argument("--tol", type=float, default=1e-13, metavar="T")
    p_run.add_argument("--iter-factor", type=float, default=40.0, metavar="F",
                       help="CG iteration budget is F * sqrt(ndof)")
    p_run.add_argument("--quad", type=int, default=None, metavar="Q")
    p_run.add_argument("--csv", default=None, metavar="PATH")
    p_run.set_defaults(func=_run)

    p_ver = sub.add_parser("verify", help="reference-element property suite")
    p_ver.set_defaults(func=_verify)

    p_mesh = sub.add_parser("mesh", help="generate and save a mesh")
    p_mesh.add_argument("--kind", choices=("uniform", "perturbed"),
                        default="uniform")
    p_mesh.add_argument("--n", type=int, default=4)
    p_mesh.add_argument("--seed", type=int, default=0)
    p_mesh.add_argument("--amplitude", type=float, default=0.2)
    p_mesh.add_argument("--out", required=True)
    p_mesh.set_defaults(func=_mesh_cmd)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as err:
        parser.exit(2, f"qncfem: error: {err}\n")


if __name__ == "__main__":
    sys.exit(main())
