"""End-to-end pipeline and command line interface.

`daestruct analyze file.dae` runs structural analysis, witness-point
computation and degeneration detection with per-component index reduction;
`daestruct solve file.dae` additionally integrates every component and
writes one CSV trajectory per component.

Exit codes: 0 all components solved; 2 structural failure; 3 regularization
or consistent-point failure; 4 integration failure; 5 parse error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as ex
from .errors import (CountMismatch, DaeSyntaxError, DaestructError, EmptyRow,
                     InconsistentInitialPoint, InitRequired, NoConvergence,
                     NonPolynomialConstraint, NoPerfectMatching, NoSolution,
                     NotSquare, SingularTopBlock)
from .integrate import SolveConfig, dae_solve, split_system
from .parser import ParsedDae, parse
from .prolong import prolong
from .regularize import (detect_degeneration, point_values_from_witness,
                         regularize_loop)
from .report import render_report
from .structure import MINUS_INF, build_signature, solve_offsets
from .system import DaeSystem
from .witness import (WitnessPoint, WitnessSet, classify_components,
                      default_unknowns, witness_of_constraints)


@dataclass
class PipelineOptions:
    mode: str = "analyze"                # "analyze" | "solve"
    seed: int = 0
    tol_rank: float = 1e-8
    abstol: float = 1e-6
    reltol: float = 1e-3
    h: float = 1e-3
    method: str = "rk4"
    max_iir: int = 10
    tf: float | None = None
    workers: int = 1
    out_dir: Path = field(default_factory=lambda: Path("."))


@dataclass
class PipelineResult:
    report: str
    exit_code: int
    trajectory_files: list[Path]


def _fmt_sig(entries):
    return [["-inf" if v == MINUS_INF else v for v in row] for row in entries]


def _points_from_init(parsed: ParsedDae, constraints, t0):
    """Wrap the init block as a single-point witness set over the jets the
    constraints (or the init itself) mention."""
    sys = parsed.system
    name_to_ix = {n: j for j, n in enumerate(sys.var_names)}
    jets = set(default_unknowns([ex.substitute(c, t_value=ex.const(t0))
                                 for c in constraints]))
    for (name, order) in parsed.init:
        jets.add(ex.JetVar(name_to_ix[name], order))
    unknowns = tuple(sorted(jets, key=lambda v: (v.var_index, v.order)))
    coords = np.array([parsed.init.get((sys.var_names[v.var_index], v.order), 0.0)
                       for v in unknowns])
    residual = 0.0
    if constraints:
        b = ex.Binding(t=t0, values=dict(zip(unknowns, coords)))
        residual = max(abs(ex.evaluate(c, b)) for c in constraints)
    ws = WitnessSet(unknowns=unknowns,
                    points=[WitnessPoint(coords=coords, residual=float(residual))])
    return ws


def _random_point_set(constraints, sys: DaeSystem, t0, seed):
    rng = np.random.default_rng(seed)
    jets = default_unknowns([ex.substitute(c, t_value=ex.const(t0))
                             for c in constraints]) if constraints else \
        tuple(ex.JetVar(j, 0) for j in range(sys.n_vars))
    coords = rng.uniform(-1.0, 1.0, size=len(jets))
    return WitnessSet(unknowns=tuple(jets),
                      points=[WitnessPoint(coords=coords, residual=0.0)])


def run_pipeline(text: str, source_name: str, opts: PipelineOptions) -> PipelineResult:
    doc: dict = {"schema": 1, "input": Path(source_name).name,
                 "mode": opts.mode, "seed": opts.seed}

    try:
        parsed = parse(text, source_name)
    except (DaeSyntaxError, CountMismatch) as e:
        doc["error"] = f"parse error: {e}"
        doc["exit_code"] = 5
        return PipelineResult(render_report(doc), 5, [])

    sys_ = parsed.system
    t0, t_end = parsed.t_span
    if opts.tf is not None:
        t_end = opts.tf
    doc["system"] = {
        "variables": list(sys_.var_names),
        "n_equations": sys_.n_equations,
        "t_span": [t0, t_end],
        "parameters": dict(parsed.params),
    }

    try:
        sig = build_signature(sys_)
        off = solve_offsets(sig)
    except (NotSquare, EmptyRow, NoPerfectMatching) as e:
        doc["error"] = f"structural failure: {e}"
        doc["exit_code"] = 2
        return PipelineResult(render_report(doc), 2, [])

    ps = prolong(sys_, off)
    doc["structural"] = {
        "signature_matrix": _fmt_sig(sig.entries),
        "c": list(off.c),
        "d": list(off.d),
        "delta": off.delta,
        "transversal": list(off.transversal),
        "k_c": ps.k_c,
        "k_d": ps.k_d,
        "block_sizes": [len(b) for b in ps.blocks],
        "n_constraints": len(ps.algebraic_constraints()),
    }

    constraints = ps.algebraic_constraints()
    polynomial = all(ex.is_polynomial(c) for c in constraints)

    try:
        if parsed.init is not None:
            source = "init-block"
            ws = _points_from_init(parsed, constraints, t0)
        elif constraints and polynomial:
            source = "homotopy"
            ws = witness_of_constraints(constraints, t0, seed=opts.seed,
                                        workers=opts.workers)
        elif opts.mode == "analyze":
            source = "random"
            ws = _random_point_set(constraints, sys_, t0, opts.seed)
        else:
            raise InitRequired(
                "constraints are empty or non-polynomial: supply an init block")
    except (InitRequired, NonPolynomialConstraint, DaestructError) as e:
        doc["error"] = f"no usable points: {e}"
        doc["exit_code"] = 3
        return PipelineResult(render_report(doc), 3, [])

    if parsed.factors:
        ws = classify_components(ws, parsed.factors)

    rep = detect_degeneration(ps, ws, opts.tol_rank, t0=t0,
                              rng=np.random.default_rng(opts.seed + 17))
    doc["points"] = {
        "source": source,
        "count": len(ws.points),
        "paths_tracked": ws.n_paths,
        "paths_failed": ws.n_failed,
        "paths_diverged": ws.n_diverged,
        "items": [
            {
                "coords": {f"{sys_.var_names[v.var_index]}"
                           + "'" * v.order: float(c)
                           for v, c in zip(ws.unknowns, pt.coords)},
                "residual": pt.residual,
                "component": pt.component_id,
                "min_singular_value": pt.min_singular_value,
                "rank": verdict.rank,
                "verdict": verdict.verdict,
            }
            for pt, verdict in zip(ws.points, rep.points)
        ],
    }
    doc["degeneration"] = rep.global_verdict

    rng = np.random.default_rng(opts.seed + 1)
    components = []
    traj_files: list[Path] = []
    any_reg_failed = False
    any_int_failed = False
    stem = Path(source_name).stem

    for idx, pt in enumerate(ws.points):
        comp: dict = {"index": idx, "component": pt.component_id}
        pv = point_values_from_witness(ws, ps, pt)
        try:
            res = regularize_loop(sys_, pv, t0, tol=opts.tol_rank,
                                  eps=opts.tol_rank, rng=rng,
                                  max_rounds=opts.max_iir)
        except (NoSolution, DaestructError) as e:
            comp["status"] = "regularization-failed"
            comp["error"] = str(e)
            any_reg_failed = True
            components.append(comp)
            continue

        comp["iir_rounds"] = res.n_rounds
        comp["dof_trace"] = list(res.dof_trace)
        comp["rank_trace"] = [r.rank for r in res.rounds]
        if res.var_map:
            comp["new_symbols"] = {
                name: target + "'" * order
                for name, (target, order) in sorted(res.var_map.items())
            }
        if res.xi:
            comp["xi_values"] = {k: res.xi[k] for k in sorted(res.xi)}

        if opts.mode != "solve":
            comp["status"] = "analyzed"
            components.append(comp)
            continue

        try:
            ss = split_system(res.prolonged, res.carried, res.xi)
            cfg = SolveConfig(t0, t_end, h=opts.h, abstol=opts.abstol,
                              reltol=opts.reltol, method=opts.method)
            traj = dae_solve(ss, res.point, cfg,
                             original_vars=sys_.var_names)
        except (SingularTopBlock, NoConvergence, InconsistentInitialPoint,
                DaestructError) as e:
            comp["status"] = "integration-failed"
            comp["error"] = str(e)
            any_int_failed = True
            components.append(comp)
            continue

        fname = opts.out_dir / f"{stem}_component{idx}.csv"
        _write_csv(fname, traj)
        traj_files.append(fname)
        comp["status"] = "solved"
        comp["trajectory"] = fname.name
        comp["steps"] = len(traj)
        comp["max_constraint_residual"] = float(np.max(traj.residuals))
        components.append(comp)

    doc["components"] = components
    if any_reg_failed:
        code = 3
    elif any_int_failed:
        code = 4
    else:
        code = 0
    doc["exit_code"] = code
    return PipelineResult(render_report(doc), code, traj_files)


def _write_csv(path: Path, traj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("t," + ",".join(traj.var_names) + "\n")
        for k in range(len(traj)):
            row = [traj.times[k]] + list(traj.states[k])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="daestruct",
        description="Structural analysis and implicit index reduction "
                    "for polynomially nonlinear DAE systems")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("analyze", "structural analysis and degeneration "
                                    "detection only"),
                        ("solve", "full pipeline including integration")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help=".dae input file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-rank", type=float, default=1e-8)
        p.add_argument("--abstol", type=float, default=1e-6)
        p.add_argument("--reltol", type=float, default=1e-3)
        p.add_argument("--h", type=float, default=1e-3)
        p.add_argument("--method", choices=("euler", "rk4"), default="rk4")
        p.add_argument("--max-iir", type=int, default=10)
        p.add_argument("--tf", type=float, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out-dir", type=Path, default=Path("."))
    return ap


def main(argv=None) -> int:
    args = _build_argparser().parse_args(argv)
    try:
        text = Path(args.file).read_text()
    except OSError as e:
        print(f"daestruct: cannot read {args.file}: {e}", file=sys.stderr)
        return 5
    opts = PipelineOptions(mode=args.command, seed=args.seed,
                           tol_rank=args.tol_rank, abstol=args.abstol,
                           reltol=args.reltol, h=args.h, method=args.method,
                           max_iir=args.max_iir, tf=args.tf,
                           workers=args.workers, out_dir=args.out_dir)
    result = run_pipeline(text, args.file, opts)
    sys.stdout.write(result.report)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
