"""``cpl`` command line: reproducible experiments with ``key=value`` reports.

Every report starts with the configuration echo (``config.<name>=...``),
then the measured quantities, then ``status=PASS|FAIL`` and a short
``#``-prefixed summary. All randomness derives from ``--seed``.
Exit status: 0 on success, 1 on FAIL or contract violation, 2 on bad input.
"""
from __future__ import annotations

import argparse
import os
import random
import shlex
import sys
from pathlib import Path
from typing import Any, Callable

from . import gf2
from .cellprobe import (
    ContractViolation,
    DynamicDS,
    check_memoryless,
    check_query_nonadaptive,
    check_update_nonadaptive,
    parse_script,
    run_instrumented,
)
from .circuits import (
    LinearDS,
    NoFactorization,
    NotMatrixMultiplication,
    circuit_to_ds,
    compile_report,
    ds_to_circuit,
    dumps_circuit,
    exhaustive_factorize,
    greedy_cse_factorize,
    loads_circuit,
    mm_partition_audit,
    naive_mm_circuit,
    trivial_factorization,
)
from .encodings import disjointness_roundtrip, indexing_roundtrip, mm_column_roundtrip
from .gf2 import BitMatrix, ParseError
from .operators import analyze, grid_lines_instance, incidence_matrix, parse_geometry, prefix_sum_operator
from .problems import (
    CopyCellDS,
    DisjointnessInstance,
    DomainError,
    IndexingInstance,
    LinearCellProbe,
    disjointness_bitset,
    indexing_baseline_colcopy,
    indexing_baseline_register,
    prefix_sum_range_tree,
)

INDEXING = {"colcopy": indexing_baseline_colcopy, "register": indexing_baseline_register}
DISJOINTNESS = {"bitset": disjointness_bitset}
DS_NAMES = sorted([*INDEXING, *DISJOINTNESS, "prefix-sum", "copycell"])


class Report:
    def __init__(self, command: str, args: argparse.Namespace):
        self.lines: list[str] = []
        self.summary: list[str] = []
        self.ok = True
        self.argv = [command]
        skip = {"func", "command", "kind"}
        for key, value in sorted(vars(args).items()):
            if key in skip:
                continue
            self.lines.append(f"config.{key}={value}")
            if value is not None and value is not False:
                flag = "--" + key.replace("_", "-")
                self.argv += [flag] if value is True else [flag, str(value)]
        if getattr(args, "kind", None):
            self.lines.append(f"config.kind={args.kind}")
            self.argv.insert(1, args.kind)

    def put(self, key: str, value: Any) -> None:
        self.lines.append(f"{key}={value}")

    def note(self, text: str) -> None:
        self.summary.append(text)

    def fail(self, invariant: str, detail: str = "") -> None:
        if self.ok:
            self.put("violated", invariant)
            self.put("repro", "cpl " + " ".join(shlex.quote(a) for a in self.argv))
        self.ok = False
        if detail:
            self.note(detail)

    def render(self) -> str:
        out = list(self.lines)
        out.append(f"status={'PASS' if self.ok else 'FAIL'}")
        if self.summary:
            out.append("")
            out += [f"# {s}" for s in self.summary]
        return "\n".join(out) + "\n"


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("CPL_THREADS", "1"))


def _build_ds(args, rng: random.Random) -> DynamicDS:
    name = args.ds
    if name in INDEXING:
        inst = IndexingInstance.random(args.k, args.n, rng)
        return INDEXING[name](inst, args.w)
    if name in DISJOINTNESS:
        inst = DisjointnessInstance.random(args.n, rng)
        return DISJOINTNESS[name](inst, args.w)
    if name == "prefix-sum":
        initial = [rng.getrandbits(1) for _ in range(args.n)]
        return LinearCellProbe(prefix_sum_range_tree(args.n), initial=initial)
    if name == "copycell":
        return CopyCellDS(args.w)
    raise ValueError(f"unknown data structure {name!r}")


# -- subcommands -----------------------------------------------------------------------

def cmd_simulate(args) -> Report:
    rep = Report("simulate", args)
    rng = random.Random(args.seed)
    ds = _build_ds(args, rng)
    script = parse_script(args.script)
    res = run_instrumented(ds, script)
    rep.put("ops", len(script))
    rep.put("answers", ",".join(str(int(a)) for a in res.answers))
    rep.put("t_q_max", res.t_q_max)
    rep.put("t_q_avg", f"{res.t_q_avg:.4f}")
    rep.put("t_u_max", res.t_u_max)
    rep.put("t_u_avg", f"{res.t_u_avg:.4f}")
    rep.put("space", res.space)
    rep.put("w", ds.w)
    if args.trace:
        rep.lines += res.trace().splitlines()
    rep.note(f"{ds.name}: {len(script)} operations, {len(res.answers)} answers")
    return rep


def cmd_check(args) -> Report:
    rep = Report("check", args)
    ds = _build_ds(args, random.Random(args.seed))
    reports = []
    if args.which in ("query", "all"):
        reports.append(check_query_nonadaptive(ds, trials=args.trials, seed=args.seed))
    if args.which in ("update", "all"):
        reports.append(check_update_nonadaptive(ds, trials=args.trials, seed=args.seed))
    if args.which in ("memoryless", "all"):
        reports.append(check_memoryless(ds, trials=args.trials, seed=args.seed))
    for r in reports:
        rep.put(r.check, "PASS" if r.passed else "FAIL")
        if r.dependency is not None:
            u, cell, deps = r.dependency
            rep.put(f"{r.check}.update", u)
            rep.put(f"{r.check}.cell", cell)
            rep.put(f"{r.check}.depends_on", ",".join(map(str, deps)))
        if r.first_divergence is not None:
            rep.put(f"{r.check}.divergence", "%r/%d/%d" % r.first_divergence)
        if not r.passed:
            rep.fail(r.check, r.failures[0])
        rep.note(r.summary().splitlines()[0])
    return rep


def cmd_encode_verify(args) -> Report:
    rep = Report("encode-verify", args)
    rng = random.Random(args.seed)
    results = []
    if args.protocol == "indexing":
        if args.ds not in INDEXING:
            raise ValueError(f"indexing protocol needs --ds in {sorted(INDEXING)}")
        for _ in range(args.trials):
            inst = IndexingInstance.random(args.k, args.n, rng)
            results.append(indexing_roundtrip(INDEXING[args.ds], inst, args.w))
    elif args.protocol == "disjointness":
        if args.ds not in DISJOINTNESS:
            raise ValueError(f"disjointness protocol needs --ds in {sorted(DISJOINTNESS)}")
        for _ in range(args.trials):
            inst = DisjointnessInstance.random(args.n, rng)
            results.append(disjointness_roundtrip(DISJOINTNESS[args.ds], inst, args.w))
    else:
        circuit = loads_circuit(Path(args.circuit).read_text()) if args.circuit else naive_mm_circuit(args.d)
        ells = [args.ell] if args.ell else list(range(1, args.d + 1))
        for ell in ells:
            for _ in range(args.trials):
                m = BitMatrix.random(args.d, args.d, rng)
                results.append(mm_column_roundtrip(circuit, m, ell, seed=args.seed))
    lengths = sorted({r.length for r in results})
    rep.put("protocol", args.protocol)
    rep.put("runs", len(results))
    rep.put("length", lengths[0] if len(lengths) == 1 else f"{lengths[0]}..{lengths[-1]}")
    rep.put("bound", results[0].bound if results else 0)
    rep.put("lossless", sum(r.lossless for r in results))
    if args.protocol == "mm":
        rep.put("t_u_plus_t_q", ",".join(sorted({str(r.t_u + r.t_q) for r in results})))
    for r in results:
        if not r.passed:
            rep.fail("lossless-and-entropy", f"{r.params}: {r.verdict}")
            break
    if args.hex and results and results[0].message is not None:
        rep.put("message_hex", results[0].message.hex())
    rep.note(f"{args.protocol}: {len(results)} round trips, measured length >= entropy bound required")
    return rep


def cmd_compile(args) -> Report:
    rep = Report("compile", args)
    if args.to == "circuit":
        if args.prefix_sum:
            ds = prefix_sum_range_tree(args.prefix_sum)
        else:
            if not (args.V and args.Q):
                raise ValueError("compile --to circuit needs --V and --Q (or --prefix-sum N)")
            ds = LinearDS(gf2.read_matrix(args.V), gf2.read_matrix(args.Q))
        circuit = ds_to_circuit(ds)
        text = dumps_circuit(circuit)
        if args.output:
            Path(args.output).write_text(text)
        else:
            rep.lines += text.splitlines()
    else:
        if not args.circuit:
            raise ValueError("compile --to ds needs --circuit")
        circuit = loads_circuit(Path(args.circuit).read_text())
        ds = circuit_to_ds(circuit)
        if args.output:
            gf2.write_matrix(f"{args.output}.V.mat", ds.V)
            gf2.write_matrix(f"{args.output}.Q.mat", ds.Q)
    cr = compile_report(ds)
    rep.put("wires", cr.wires)
    rep.put("n", cr.n)
    rep.put("m", cr.m)
    rep.put("cells", ds.cells)
    rep.put("t_u_max", cr.max_t_u)
    rep.put("t_q_max", cr.max_t_q)
    rep.put("t_u_avg", cr.avg_t_u)
    rep.put("t_q_avg", cr.avg_t_q)
    rep.put("size_bound", cr.size_bound)
    if not cr.holds():
        rep.fail("wires <= n*t_u + m*t_q and averages <= s/n, s/m")
    rep.note(f"{cr.wires} wires <= {cr.size_bound}; averages {cr.avg_t_u} <= {cr.wires}/{cr.n}, "
             f"{cr.avg_t_q} <= {cr.wires}/{cr.m}")
    return rep


def cmd_factorize(args) -> Report:
    rep = Report("factorize", args)
    f = gf2.read_matrix(args.input)
    try:
        if args.mode == "exhaustive":
            fac = exhaustive_factorize(f, args.s_max, workers=args.threads)
        else:
            fac = greedy_cse_factorize(f)
    except NoFactorization as e:
        rep.fail("factorization within s_max", str(e))
        fac = e.trivial
        rep.note("trivial factorization (V = F, Q = I) reported instead")
    ds = fac.as_ds()
    tu, tq = ds.update_times(), ds.query_times()
    rep.lines.append(f"wires={fac.wires} s={fac.s}")
    rep.put("trivial_wires", trivial_factorization(f).wires)
    rep.put("t_u_max", max(tu, default=0))
    rep.put("t_q_max", max(tq, default=0))
    rep.put("t_u_avg", f"{sum(tu) / len(tu):.4f}" if tu else 0)
    rep.put("t_q_avg", f"{sum(tq) / len(tq):.4f}" if tq else 0)
    rep.put("t_u_times_t_q", f"{(sum(tu) / max(1, len(tu))) * (sum(tq) / max(1, len(tq))):.4f}")
    rep.lines.append("Q:")
    rep.lines += gf2.dumps(fac.Q).splitlines()
    rep.lines.append("V:")
    rep.lines += gf2.dumps(fac.V).splitlines()
    if args.output:
        gf2.write_matrix(f"{args.output}.Q.mat", fac.Q)
        gf2.write_matrix(f"{args.output}.V.mat", fac.V)
    return rep


def cmd_gen_operator(args) -> Report:
    rep = Report("gen-operator", args)
    if args.kind == "prefix-sum":
        mat = prefix_sum_operator(args.n)
    elif args.kind == "grid-lines":
        g = grid_lines_instance(args.p)
        mat = g.matrix
        rep.note(g.note)
    else:
        if not args.geometry:
            raise ValueError("gen-operator incidence needs --geometry")
        pts, rs = parse_geometry(Path(args.geometry).read_text())
        mat = incidence_matrix(pts, rs)
    rep.put("rows", mat.rows)
    rep.put("cols", mat.cols)
    rep.put("ones", gf2.total_weight(mat))
    if args.output:
        gf2.write_matrix(args.output, mat)
    else:
        rep.lines += gf2.dumps(mat).splitlines()
    return rep


def cmd_analyze(args) -> Report:
    rep = Report("analyze", args)
    if args.geometry:
        pts, rs = parse_geometry(Path(args.geometry).read_text())
        mat = incidence_matrix(pts, rs)
    elif args.input:
        mat = gf2.read_matrix(args.input)
    else:
        raise ValueError("analyze needs --input or --geometry")
    pr = analyze(mat, threshold=args.threshold, tol=args.tol, trials=args.trials, seed=args.seed)
    rep.lines += pr.lines()
    if pr.frobenius_gap > max(1, mat.cols) * args.tol:
        rep.fail("sum of eigenvalues = number of ones", f"gap {pr.frobenius_gap:.3e}")
    if pr.profile.duplicate_rows:
        rep.note(f"{len(pr.profile.duplicate_rows)} pairs of distinct ranges have identical rows")
    rep.note("discrepancy is exact for <= 22 columns, otherwise a sampled upper bound")
    return rep


def cmd_audit_mm(args) -> Report:
    rep = Report("audit-mm", args)
    circuit = loads_circuit(Path(args.circuit).read_text()) if args.circuit else naive_mm_circuit(args.d)
    audit = mm_partition_audit(circuit, args.d, seed=args.seed)
    for cw in audit.columns:
        rep.put(f"column.{cw.ell}", f"t_u={cw.t_u} t_q={cw.t_q} sum={cw.t_u + cw.t_q}")
    rep.put("column_sum", audit.column_sum)
    rep.put("size", audit.size)
    rep.put("d_cubed", args.d ** 3)
    rep.put("disjoint", audit.disjoint)
    rep.put("protocol_lossless", audit.protocol_lossless)
    if not audit.passed:
        rep.fail("per-column t_u + t_q >= d^2, disjoint column wires, s >= d^3, lossless column code")
    return rep


# -- parser -------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker count; default $CPL_THREADS or 1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        _common(p)
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "run a script against a data structure")
    p.add_argument("--ds", choices=DS_NAMES, required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--script", default="P", help="comma separated: P, U<x>, Q<x>")
    p.add_argument("--trace", action="store_true")

    p = add("check", cmd_check, "randomized non-adaptivity / memoryless checks")
    p.add_argument("--ds", choices=DS_NAMES, required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--which", choices=["query", "update", "memoryless", "all"], default="all")

    p = add("encode-verify", cmd_encode_verify, "run an encoding protocol end to end")
    p.add_argument("--protocol", choices=["indexing", "disjointness", "mm"], required=True)
    p.add_argument("--ds", default=None)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--circuit", default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--hex", action="store_true")

    p = add("compile", cmd_compile, "linear data structure <-> depth-2 linear circuit")
    p.add_argument("--to", choices=["circuit", "ds"], required=True)
    p.add_argument("--V", default=None)
    p.add_argument("--Q", default=None)
    p.add_argument("--prefix-sum", type=int, default=None)
    p.add_argument("--circuit", default=None)
    p.add_argument("--output", default=None)

    p = add("factorize", cmd_factorize, "minimum-wire factorization Q V = F")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=["exhaustive", "greedy"], default="greedy")
    p.add_argument("--s-max", type=int, default=2)
    p.add_argument("--output", default=None, help="prefix for <prefix>.Q.mat / <prefix>.V.mat")

    p = add("gen-operator", cmd_gen_operator, "write an operator matrix")
    p.add_argument("kind", choices=["prefix-sum", "grid-lines", "incidence"])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--geometry", default=None)
    p.add_argument("--output", default=None)

    p = add("analyze", cmd_analyze, "hardness-property report for an operator")
    p.add_argument("--input", default=None)
    p.add_argument("--geometry", default=None)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--trials", type=int, default=4096)

    p = add("audit-mm", cmd_audit_mm, "column-partition wire audit of a matrix-multiplication circuit")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--circuit", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.threads = _threads(args)
    try:
        rep = args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ContractViolation, DomainError, NotMatrixMultiplication) as e:
        print(f"status=FAIL\nviolated={type(e).__name__}\n# {e}")
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(rep.render())
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
