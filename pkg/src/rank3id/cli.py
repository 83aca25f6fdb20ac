"""Command-line front end: ``rank3id analyze | generate | verify``.

Exit codes of ``analyze``: 0 identifiable, 10 non-identifiable, 20 refused,
2 usage or parse error. ``verify`` exits 0 when every check passes, 1 when
one fails and 3 when the input is identifiable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np

from . import exact as qx
from .classifier import CaseLabel, classify, exit_code
from .concision import multilinear_rank
from .diagnostics import pair_invariants
from .families import (
    SamplingError,
    estimate_local_dim,
    gen_caso3,
    gen_caso4,
    gen_generic,
    gen_matrix3,
    gen_tangent222,
    gen_x11,
    sample_solution_set,
)
from .tensor import DenseTensor, check_shape, load_tensor

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NOTHING = 3


def canonical_json(obj) -> str:
    """Serialize with sorted keys and floats at 17 significant digits."""

    def enc(x):
        if isinstance(x, dict):
            return "{" + ", ".join(f"{json.dumps(str(k))}: {enc(x[k])}" for k in sorted(x)) + "}"
        if isinstance(x, (list, tuple)):
            return "[" + ", ".join(enc(v) for v in x) + "]"
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if x is None:
            return "null"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            x = float(x)
            if not math.isfinite(x):
                return "null"
            return format(x, ".17g")
        return json.dumps(x)

    return enc(obj)


def parse_shape(text: str) -> tuple:
    try:
        return check_shape(int(t) for t in text.lower().split("x"))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}: {err}") from None


def _to_exact(T: DenseTensor) -> DenseTensor:
    if T.exact is not None:
        return T
    flat = [qx.QI(Fraction(z.real), Fraction(z.imag)) for z in T.data.reshape(-1)]
    ent = np.empty(len(flat), dtype=object)
    ent[:] = flat
    return DenseTensor.from_exact(ent.reshape(T.shape))


# ---------------------------------------------------------------------------
# analyze


def analysis_report(T: DenseTensor, seed: int = 0, dim: bool = False) -> tuple[dict, int]:
    t0 = time.perf_counter()
    verdict = classify(T, seed)
    rep = verdict.rank_report
    out = {
        "digest": T.digest(),
        "shape": list(T.shape),
        "backend": T.backend,
        "concise_shape": list(verdict.concise_shape),
        "multilinear_rank": list(multilinear_rank(T)),
        "rank_report": None
        if rep is None
        else {
            "rank": rep.rank,
            "method": rep.method,
            "border_flag": rep.border_flag,
            "residual": rep.residual,
            "lower_bound": rep.lower_bound,
        },
        "verdict": verdict.to_json(),
    }
    if dim and verdict.witness is not None and verdict.rank and verdict.rank > 1:
        out["dimension"] = estimate_local_dim(T, verdict.witness).to_json()
    out["_elapsed"] = time.perf_counter() - t0
    return out, exit_code(verdict)


def _human(report: dict) -> str:
    v = report["verdict"]
    lines = [
        f"digest          {report['digest'][:16]}",
        f"shape           {tuple(report['shape'])}",
        f"concise shape   {tuple(report['concise_shape'])}",
        f"rank            {v['rank'] if v['rank'] is not None else 'unknown'}",
        f"label           {v['label']}",
    ]
    if v["dim"]:
        sign = "=" if v["dim"]["kind"] == "exact" else ">="
        lines.append(f"claimed dim     {sign} {v['dim']['value']}")
    if "dimension" in report:
        d = report["dimension"]
        lines.append(f"local dim       {d['dim']} (gap {d['gap_ratio']:.2e}{'' if d['reliable'] else ', unreliable'})")
    if v["flags"]:
        lines.append(f"flags           {', '.join(v['flags'])}")
    if "timing" in report:
        lines.append(f"time            {report['timing']:.3f} s")
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    try:
        T = load_tensor(args.path)
    except (OSError, ValueError, KeyError, TypeError) as err:
        print(f"error: cannot read tensor from {args.path}: {err}", file=sys.stderr)
        return EXIT_USAGE
    if T.is_zero():
        print("error: the zero tensor has no rank decomposition", file=sys.stderr)
        return EXIT_USAGE
    if args.exact:
        T = _to_exact(T)
    report, code = analysis_report(T, args.seed, args.dim)
    elapsed = report.pop("_elapsed")
    if args.timing:
        report["timing"] = elapsed
    print(canonical_json(report) if args.json else _human(report))
    return code


# ---------------------------------------------------------------------------
# generate

FIXED_SHAPES = {"matrix3": (3, 3), "tangent222": (2, 2, 2), "caso3": (3, 2, 2), "caso4": (3, 2, 2)}
CASES = ("matrix3", "tangent222", "caso3", "caso4", "x11", "generic-r2", "generic-r3")


def generate_instance(case: str, shape, seed: int):
    if case in FIXED_SHAPES:
        if shape is not None and tuple(shape) != FIXED_SHAPES[case]:
            raise ValueError(f"case {case} has fixed shape {FIXED_SHAPES[case]}")
        return {"matrix3": gen_matrix3, "tangent222": gen_tangent222, "caso3": gen_caso3, "caso4": gen_caso4}[case](seed)
    if shape is None:
        raise ValueError(f"case {case} needs --shape")
    if case == "x11":
        return gen_x11(shape, seed)
    if case in ("generic-r2", "generic-r3"):
        return gen_generic(int(case[-1]), shape, seed)
    raise ValueError(f"unknown case {case}")


def cmd_generate(args) -> int:
    try:
        inst = generate_instance(args.case, args.shape, args.seed)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    text = canonical_json(inst.to_json()) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def verify_report(T: DenseTensor, samples: int = 10, seed: int = 0) -> tuple[dict, int]:
    verdict = classify(T, seed, second_witness=False)
    out = {"digest": T.digest(), "verdict": verdict.to_json()}
    if verdict.label is CaseLabel.Refused:
        out["status"] = "refused"
        return out, exit_code(verdict)
    if verdict.identifiable:
        out["status"] = "nothing to verify"
        return out, EXIT_NOTHING
    try:
        found = sample_solution_set(T, samples, seed, verdict=verdict)
    except SamplingError as err:
        out["status"] = f"sampling failed: {err}"
        return out, EXIT_FAIL
    pairs = []
    if verdict.rank == 3:
        for a in range(len(found)):
            for b in range(a + 1, len(found)):
                r = pair_invariants(found[a], found[b])
                pairs.append({"i": a, "j": b, "intersection": r.intersection, "union": r.union, "line_violation": r.line_violation, "ok": r.ok})
    estimates = [estimate_local_dim(T, D) for D in [verdict.witness] + found]
    claim = verdict.dim_claim
    dims_ok = all(e.reliable and (claim is None or claim.accepts(e.dim)) for e in estimates)
    pairs_ok = all(p["ok"] for p in pairs)
    out.update(
        {
            "samples": len(found),
            "pairs": pairs,
            "pairs_ok": pairs_ok,
            "local_dim": estimates[0].dim,
            "gap_ratio": estimates[0].gap_ratio,
            "sample_dims": [e.dim for e in estimates[1:]],
            "dim_ok": dims_ok,
            "status": "pass" if (pairs_ok and dims_ok) else "fail",
        }
    )
    return out, EXIT_OK if (pairs_ok and dims_ok) else EXIT_FAIL


def cmd_verify(args) -> int:
    try:
        T = load_tensor(args.path)
    except (OSError, ValueError, KeyError, TypeError) as err:
        print(f"error: cannot read tensor from {args.path}: {err}", file=sys.stderr)
        return EXIT_USAGE
    if T.is_zero():
        print("error: the zero tensor has no rank decomposition", file=sys.stderr)
        return EXIT_USAGE
    report, code = verify_report(T, args.samples, args.seed)
    if args.json:
        print(canonical_json(report))
    else:
        print(f"label      {report['verdict']['label']}")
        print(f"status     {report['status']}")
        if "local_dim" in report:
            print(f"local dim  {report['local_dim']} (gap {report['gap_ratio']:.2e})")
            print(f"samples    {report['samples']}, pairs ok: {report['pairs_ok']}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rank3id", description="Identifiability of rank-2 and rank-3 tensors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify a tensor file")
    p.add_argument("path")
    p.add_argument("--exact", action="store_true", help="use exact Gaussian-rational arithmetic where possible")
    p.add_argument("--dim", action="store_true", help="estimate the local solution-set dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--timing", action="store_true", help="include wall time (makes output nondeterministic)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="write a witness tensor for a case")
    p.add_argument("case", choices=CASES)
    p.add_argument("--shape", type=parse_shape, default=None, help="e.g. 2x2x2x2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="sample decompositions and check the invariants")
    p.add_argument("path")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
