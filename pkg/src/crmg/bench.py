"""Condition-number experiments for the 2D square and 3D cube jump problems.

Every (epsilon, level) cell builds the hierarchy, runs PCG with the V-cycle
from a zero initial guess and f = 1, and estimates the spectrum of ``BA``.

Examples
--------
Reproduce the 2D table::

    python -m crmg --dim 2 --levels 0-4 --out table2d.csv

and the 3D one (five Gauss-Seidel sweeps, tolerance 1e-12)::

    python -m crmg --dim 3 --levels 0-2 --out table3d.csv
"""

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import dataclass, field

from . import krylov, sparse
from .mgcycle import MgConfig, MgPreconditioner, build_hierarchy

log = logging.getLogger(__name__)

CSV_HEADER = [
    "dim", "epsilon", "level", "cr_dofs", "pcg_iterations", "cond", "eff_cond_1",
    "lambda_min", "lambda_2", "lambda_max", "wall_time_s",
]

DEFAULT_EPS = {2: (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5), 3: (1.0, 1e-1, 1e-3, 1e-5, 1e-7)}
DEFAULT_LEVELS = {2: 4, 3: 2}
DEFAULT_SWEEPS = {2: 1, 3: 5}
DEFAULT_TOL = {2: 1e-7, 3: 1e-12}
# 3D level 3 has ~400k faces; it runs only when explicitly allowed
LARGE_LEVEL = {2: 7, 3: 3}


@dataclass
class ExperimentSpec:
    dim: int = 2
    epsilons: tuple = DEFAULT_EPS[2]
    levels: tuple = tuple(range(DEFAULT_LEVELS[2] + 1))
    smoother: str = "gauss-seidel"
    sweeps: int = 1
    omega: float = 0.7
    tol: float = 1e-7
    maxit: int = 500
    seed: int = 0
    dense_limit: int = 3000
    lanczos_steps: int = 300
    allow_large: bool = False
    record_time: bool = True

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if not self.levels or any(j < 0 for j in self.levels):
            raise ValueError("levels must be nonnegative")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")

    @classmethod
    def standard(cls, dim, **overrides):
        """Reference setting for ``dim``: sweeps, tolerance, contrasts and levels."""
        kw = dict(
            dim=dim,
            epsilons=DEFAULT_EPS[dim],
            levels=tuple(range(DEFAULT_LEVELS[dim] + 1)),
            sweeps=DEFAULT_SWEEPS[dim],
            tol=DEFAULT_TOL[dim],
        )
        kw.update(overrides)
        return cls(**kw)

    @property
    def config(self):
        return MgConfig(self.smoother, self.sweeps, self.omega)


@dataclass
class ResultRow:
    dim: int
    epsilon: float
    level: int
    cr_dofs: int
    pcg_iterations: int = 0
    K: float = float("nan")
    K_1: float = float("nan")
    lambda_min: float = float("nan")
    lambda_2: float = float("nan")
    lambda_max: float = float("nan")
    wall_time_seconds: float = 0.0
    status: str = "ok"
    converged: bool = True
    m0_detected: int = 0
    # not written to CSV
    spectrum: object = field(default=None, repr=False, compare=False)

    @property
    def ok(self):
        return self.status == "ok"

    def csv_values(self):
        return [
            self.dim, repr(float(self.epsilon)), self.level, self.cr_dofs, self.pcg_iterations,
            repr(float(self.K)), repr(float(self.K_1)), repr(float(self.lambda_min)),
            repr(float(self.lambda_2)), repr(float(self.lambda_max)), repr(float(self.wall_time_seconds)),
        ]


def run_cell(spec, eps, level):
    """One (epsilon, level) cell; failures are recorded in ``status``."""
    if level >= LARGE_LEVEL[spec.dim] and not spec.allow_large:
        log.warning("dim=%d level=%d skipped; pass --allow-large to run it", spec.dim, level)
        return ResultRow(spec.dim, eps, level, 0, status="skipped: level above desk-scale limit")
    try:
        H = build_hierarchy(spec.dim, level, eps)
        A = H.finest
        B = MgPreconditioner(H, spec.config)
        start = time.perf_counter()
        result = krylov.pcg(A, B, H.rhs, tol=spec.tol, maxit=spec.maxit)
        elapsed = time.perf_counter() - start
        report = krylov.lanczos_spectrum(A, B, steps=spec.lanczos_steps, seed=spec.seed)
    except MemoryError:
        log.error("dim=%d eps=%g level=%d: out of memory", spec.dim, eps, level)
        return ResultRow(spec.dim, eps, level, 0, status="skipped: out of memory")
    return ResultRow(
        dim=spec.dim,
        epsilon=eps,
        level=level,
        cr_dofs=A.shape[0],
        pcg_iterations=result.iterations,
        K=report.K,
        K_1=report.K_1,
        lambda_min=report.lambda_min,
        lambda_2=report.lambda_2,
        lambda_max=report.lambda_max,
        wall_time_seconds=elapsed if spec.record_time else 0.0,
        status="ok" if result.converged else "failed: pcg did not converge",
        converged=result.converged and report.converged,
        m0_detected=report.m0_detected,
        spectrum=report,
    )


def run_experiment(spec):
    rows = []
    for eps in spec.epsilons:
        for level in spec.levels:
            row = run_cell(spec, eps, level)
            log.info(
                "dim=%d eps=%-7g level=%d dofs=%-7d its=%-3d K=%-10.4g K1=%.3g",
                row.dim, row.epsilon, row.level, row.cr_dofs, row.pcg_iterations, row.K, row.K_1,
            )
            rows.append(row)
    return rows


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_values())


def read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                dim=int(rec["dim"]),
                epsilon=float(rec["epsilon"]),
                level=int(rec["level"]),
                cr_dofs=int(rec["cr_dofs"]),
                pcg_iterations=int(rec["pcg_iterations"]),
                K=float(rec["cond"]),
                K_1=float(rec["eff_cond_1"]),
                lambda_min=float(rec["lambda_min"]),
                lambda_2=float(rec["lambda_2"]),
                lambda_max=float(rec["lambda_max"]),
                wall_time_seconds=float(rec["wall_time_s"]),
            ))
    return rows


def format_table(rows):
    """Table text with ``K (iterations)`` and ``K_1`` lines per epsilon."""
    levels = sorted({r.level for r in rows})
    epsilons = list(dict.fromkeys(r.epsilon for r in rows))
    cells = {(r.epsilon, r.level): r for r in rows}
    width = 15
    lines = [f"{'eps':>8} | {'levels':<6} || " + " | ".join(f"{j:^{width}}" for j in levels)]
    lines.append("-" * len(lines[0]))
    for eps in epsilons:
        k_line, k1_line = [], []
        for j in levels:
            r = cells.get((eps, j))
            if r is None or not r.ok:
                k_line.append(f"{'--':^{width}}")
                k1_line.append(f"{'--':^{width}}")
            else:
                k_line.append(f"{f'{r.K:.3g} ({r.pcg_iterations})':>{width}}")
                k1_line.append(f"{f'{r.K_1:.3g}':>{width}}")
        lines.append(f"{eps:>8g} | {'K':<6} || " + " | ".join(k_line))
        lines.append(f"{'':>8} | {'K_1':<6} || " + " | ".join(k1_line))
    return "\n".join(lines) + "\n"


def emit_table(rows, path, fmt="csv"):
    if fmt == "csv":
        write_csv(rows, path)
    elif fmt == "text":
        with open(path, "w") as fh:
            fh.write(format_table(rows))
    else:
        raise ValueError(f"unknown table format {fmt!r}")


def spectrum(spec, eps, level):
    """Spectrum of ``BA``: dense oracle when it fits, Lanczos Ritz values otherwise."""
    H = build_hierarchy(spec.dim, level, eps)
    A = H.finest
    B = MgPreconditioner(H, spec.config)
    if A.shape[0] <= spec.dense_limit:
        return krylov.dense_ba_spectrum(A, B, dense_limit=spec.dense_limit)
    return krylov.lanczos_spectrum(A, B, steps=spec.lanczos_steps, seed=spec.seed)


def dump_spectrum(spec, eps, level, path):
    report = spectrum(spec, eps, level)
    krylov.export_eigenvalues(path, report.eigenvalues)
    return report


def export_matrices(spec, eps, level, directory):
    """Matrix Market files for every operator and prolongation, plus the load vector."""
    os.makedirs(directory, exist_ok=True)
    H = build_hierarchy(spec.dim, level, eps)
    tag = f"d{spec.dim}_eps{eps:g}_J{level}"
    paths = []
    for j, A in enumerate(H.operators):
        name = "A_cr" if j == H.n_levels - 1 else f"A_{j}"
        paths.append(os.path.join(directory, f"{tag}_{name}.mtx"))
        sparse.write_matrix_market(paths[-1], A)
    for j, P in enumerate(H.prolongations, start=1):
        paths.append(os.path.join(directory, f"{tag}_P_{j}.mtx"))
        sparse.write_matrix_market(paths[-1], P)
    paths.append(os.path.join(directory, f"{tag}_rhs.txt"))
    sparse.write_vector(paths[-1], H.rhs)
    return paths


# --------------------------------------------------------------------------
# command line


def _float_list(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _levels(text):
    """``'4'`` means 0..4; ``'1-3'`` a range; ``'0,2'`` an explicit list."""
    text = text.strip()
    if "," in text:
        return tuple(int(t) for t in text.split(","))
    if "-" in text:
        lo, hi = text.split("-")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(range(int(text) + 1))


def make_parser():
    p = argparse.ArgumentParser(
        prog="crmg-bench",
        description="V-cycle preconditioned CG for Crouzeix-Raviart jump-coefficient problems.",
    )
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--levels", type=_levels, help="finest levels J: '4' (=0..4), '1-3' or '0,2'")
    p.add_argument("--eps", type=_float_list, help="comma-separated coefficient contrasts")
    p.add_argument("--sweeps", type=int, help="smoothing sweeps before and after the coarse correction")
    p.add_argument("--smoother", choices=("gauss-seidel", "jacobi"), default="gauss-seidel")
    p.add_argument("--omega", type=float, default=0.7, help="Jacobi damping")
    p.add_argument("--tol", type=float, help="PCG relative residual tolerance")
    p.add_argument("--maxit", type=int, default=500)
    p.add_argument("--seed", type=int, default=0, help="Lanczos start-vector seed")
    p.add_argument("--out", help="table file; '.txt' selects the aligned text layout")
    p.add_argument("--format", choices=("csv", "text"), help="override the format implied by --out")
    p.add_argument("--dump-eigs", metavar="DIR", help="write the spectrum of BA for every cell to DIR")
    p.add_argument("--export-matrix", metavar="DIR", help="write Matrix Market operators for every cell to DIR")
    p.add_argument("--dense-limit", type=int, default=3000, help="largest n for the dense eigen-oracle")
    p.add_argument("--lanczos-steps", type=int, default=300)
    p.add_argument("--allow-large", action="store_true", help="run 3D level 3 (minutes, GBs)")
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall times (byte-reproducible CSV)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def spec_from_args(args):
    overrides = dict(
        smoother=args.smoother,
        omega=args.omega,
        maxit=args.maxit,
        seed=args.seed,
        dense_limit=args.dense_limit,
        lanczos_steps=args.lanczos_steps,
        allow_large=args.allow_large,
        record_time=not args.no_timing,
    )
    for name, value in (("levels", args.levels), ("epsilons", args.eps), ("sweeps", args.sweeps), ("tol", args.tol)):
        if value is not None:
            overrides[name] = value
    return ExperimentSpec.standard(args.dim, **overrides)


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = spec_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    rows = run_experiment(spec)
    fmt = args.format or ("text" if args.out and args.out.endswith(".txt") else "csv")
    try:
        if args.out:
            emit_table(rows, args.out, fmt)
        print(format_table(rows), end="")
        for row in rows:
            if not row.ok:
                continue
            if args.dump_eigs:
                os.makedirs(args.dump_eigs, exist_ok=True)
                path = os.path.join(args.dump_eigs, f"eigs_d{row.dim}_eps{row.epsilon:g}_J{row.level}.txt")
                dump_spectrum(spec, row.epsilon, row.level, path)
            if args.export_matrix:
                export_matrices(spec, row.epsilon, row.level, args.export_matrix)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if all(r.ok for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
