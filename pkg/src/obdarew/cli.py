"""Command line: rewrite, approx, expand, eval, check-insep.

Exit codes: 0 ok, 2 bad input, 3 expansion cap exceeded, 4 internal error.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import manifest as mf
from .errors import ObdaError, ValidationError

log = logging.getLogger("obdarew")


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from None


def _oracle(spec, cap):
    from .expansion import CachedDefault, unknown_oracle
    from .formats import parse_oracle
    if spec == "default":
        return CachedDefault(cap)
    if spec == "unknown":
        return unknown_oracle
    if spec.startswith("file:"):
        return parse_oracle(_read(spec[5:]))
    raise ValidationError(f"unknown oracle {spec!r}: use default, unknown or file:PATH")


def _oracle_path(spec):
    return spec[5:] if spec.startswith("file:") else None


def _facts(args_facts, args_csv):
    from .formats import parse_facts, read_facts_csv
    out = [parse_facts(_read(p)) for p in args_facts or []]
    for d in args_csv or []:
        if not Path(d).is_dir():
            raise ValidationError(f"{d} is not a directory")
        out.append(read_facts_csv(d))
    return out


def _spec(tbox, mapping, schema, horn=False):
    from .formats import load_tbox, parse_mapping, parse_schema, parse_tbox
    from .rewriter import ObdaSpec
    t = parse_tbox(_read(tbox)) if horn else load_tbox(_read(tbox))
    return ObdaSpec(t, parse_mapping(_read(mapping)), parse_schema(_read(schema)))


def _emit(out, files, manifest):
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)
    mf.write(manifest, d / "manifest.json")


def cmd_rewrite(a):
    from .formats import parse_lowlevel, serialize_mapping, serialize_tbox
    from .rewriter import compose_lowlevel, rew_obda
    spec = _spec(a.tbox, a.mapping, a.schema, horn=True)
    res = rew_obda(spec, k=a.k, max_lhs=a.max_lhs, omega=_oracle(a.oracle, a.cap), cap=a.cap,
                   entail_cap=a.entail_cap)
    files = {"tbox.dllite": serialize_tbox(res.tbox_r), "mapping.hl": serialize_mapping(res.mapping_c)}
    if a.lowlevel:
        ll = parse_lowlevel(_read(a.lowlevel))
        files["mapping.sql.txt"] = "".join(f"-- {h}\n{sql};\n\n" for h, sql in compose_lowlevel(res, ll))
    for w in res.manifest["warnings"]:
        log.warning(w)
    params = {"k": a.k, "max_lhs": a.max_lhs, "oracle": a.oracle, "cap": a.cap, "entail_cap": a.entail_cap}
    inputs = {"tbox": a.tbox, "mapping": a.mapping, "schema": a.schema, "lowlevel": a.lowlevel,
              "oracle": _oracle_path(a.oracle)}
    _emit(a.out, files, mf.build("rewrite", inputs, params, res.manifest))
    print(f"{res.manifest['label']}: {len(res.tbox_r.axioms)} axioms, {len(res.mapping_c)} assertions -> {a.out}")
    return 0


def cmd_approx(a):
    from .formats import parse_tbox, serialize_tbox
    from .rewriter import approximate_gsa, approximate_lsa
    t = parse_tbox(_read(a.tbox))
    tr = approximate_lsa(t) if a.mode == "lsa" else approximate_gsa(t)
    out = Path(a.out)
    out.write_text(serialize_tbox(tr))
    m = mf.build("approx", {"tbox": a.tbox}, {"mode": a.mode}, {"axioms": len(tr.axioms)})
    mf.write(m, a.manifest or out.with_name(out.name + ".manifest.json"))
    return 0


def cmd_expand(a):
    from .datalog import program_for
    from .expansion import Bounded, cut, is_db_defined, minimize
    from .formats import serialize_queries
    from .rewriter import compile_tbox
    spec = _spec(a.tbox, a.mapping, a.schema, horn=True)
    t3, info = compile_tbox(spec.tbox, a.max_lhs, a.entail_cap)
    p = program_for(t3, spec.mapping, spec.schema.view_arity)
    if a.predicate not in p.idb:
        raise ValidationError(f"{a.predicate} is not derived by any rule")
    verdicts = {}
    qs = cut(a.predicate, p, a.k, _oracle(a.oracle, a.cap), a.cap, verdicts)
    if not a.all:
        qs = minimize([q for q in qs if is_db_defined(q, p.edb)])
    text = serialize_queries(qs)
    sys.stdout.write(text)
    v = verdicts[a.predicate]
    log.info("%s: %s, %d queries", a.predicate, v, len(qs))
    params = {"predicate": a.predicate, "k": a.k, "max_lhs": a.max_lhs, "oracle": a.oracle, "cap": a.cap,
              "db_defined_only": not a.all}
    inputs = {"tbox": a.tbox, "mapping": a.mapping, "schema": a.schema, "oracle": _oracle_path(a.oracle)}
    res = {"exhaustive": info["exhaustive"], "verdicts": {a.predicate: str(v)}, "queries": len(qs),
           "bounded": isinstance(v, Bounded)}
    _emit(a.out, {"expansions.txt": text}, mf.build("expand", inputs, params, res))
    return 0


def cmd_eval(a):
    from .formats import parse_queries
    from .verify import certain_answers_spec
    spec = _spec(a.tbox, a.mapping, a.schema)
    instances = _facts(a.facts, a.facts_csv)
    if len(instances) != 1:
        raise ValidationError("eval takes exactly one instance (--facts or --facts-csv)")
    qs = parse_queries(_read(a.queries))
    lines = []
    incomplete = 0
    for q in qs:
        ans, complete = certain_answers_spec(spec, instances[0], q, a.depth, a.method)
        incomplete += not complete
        shown = " ".join("(" + ",".join(t) + ")" for t in sorted(ans))
        lines.append(f"{q}\t{len(ans)}\t{'complete' if complete else 'incomplete'}\t{shown}")
    text = "".join(x + "\n" for x in lines)
    sys.stdout.write(text)
    warnings = [f"{incomplete} queries incomplete at depth {a.depth}"] if incomplete else []
    inputs = {"tbox": a.tbox, "mapping": a.mapping, "schema": a.schema, "queries": a.queries,
              "facts": a.facts or a.facts_csv}
    _emit(a.out, {"answers.tsv": text},
          mf.build("eval", inputs, {"depth": a.depth, "method": a.method}, {"warnings": warnings}))
    return 0


def cmd_check_insep(a):
    from .formats import parse_queries
    from .verify import check_inseparable
    s1 = _spec(a.tbox1, a.mapping1, a.schema)
    s2 = _spec(a.tbox2, a.mapping2, a.schema)
    instances = _facts(a.facts, a.facts_csv)
    if not instances:
        raise ValidationError("check-insep needs at least one instance")
    qs = parse_queries(_read(a.queries)) if a.queries else None
    sigma = s1.tbox.sig
    if hasattr(s1.tbox, "fresh_registry"):
        fresh = set(s1.tbox.fresh_registry)
        from .syntax import Signature
        sigma = Signature(sigma.concepts - fresh, sigma.roles - fresh)
    rep = check_inseparable(s1, s2, sigma, instances, qs, a.depth, a.method)
    print(rep.table())
    warnings = [] if rep.depth_sufficient else [f"some answers incomplete at depth {a.depth}"]
    inputs = {"tbox1": a.tbox1, "mapping1": a.mapping1, "tbox2": a.tbox2, "mapping2": a.mapping2,
              "schema": a.schema, "queries": a.queries, "facts": a.facts or a.facts_csv}
    res = {"verdict": rep.verdict, "depth_sufficient": rep.depth_sufficient, "warnings": warnings}
    _emit(a.out, {"report.json": rep.to_json() + "\n", "report.txt": rep.table() + "\n"},
          mf.build("check-insep", inputs, {"depth": a.depth, "method": a.method}, res))
    return 0


def _positive(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {s}")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="obdarew", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    def rewrite_opts(p):
        p.add_argument("--k", type=_positive, default=5)
        p.add_argument("--max-lhs", type=_positive, default=3)
        p.add_argument("--oracle", default="default", help="default, unknown or file:PATH")
        p.add_argument("--cap", type=_positive, default=10_000, help="expansion trees per predicate")
        p.add_argument("--entail-cap", type=_positive, default=12, help="chase depth cap for entailment")

    def spec_opts(p, suffix=""):
        p.add_argument(f"--tbox{suffix}", required=True)
        p.add_argument(f"--mapping{suffix}", required=True)

    def facts_opts(p):
        p.add_argument("--facts", action="append", help="fact file, may repeat")
        p.add_argument("--facts-csv", action="append", help="directory of <pred>.csv files, may repeat")

    p = sub.add_parser("rewrite", parents=[common], help="compile a Horn spec into a DL-Lite_R spec")
    spec_opts(p)
    p.add_argument("--schema", required=True)
    p.add_argument("--lowlevel")
    rewrite_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("approx", parents=[common], help="LSA or GSA DL-Lite_R approximation of a TBox")
    p.add_argument("--mode", choices=("lsa", "gsa"), required=True)
    p.add_argument("--tbox", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("expand", parents=[common], help="dump the cut expansions of one predicate")
    spec_opts(p)
    p.add_argument("--schema", required=True)
    p.add_argument("--predicate", required=True)
    p.add_argument("--all", action="store_true", help="include expansions that are not DB-defined")
    rewrite_opts(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("eval", parents=[common], help="certain answers for a query file")
    spec_opts(p)
    p.add_argument("--schema", required=True)
    facts_opts(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--depth", type=_nonneg, default=8)
    p.add_argument("--method", choices=("auto", "chase", "datalog"), default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check-insep", parents=[common], help="compare certain answers of two specs on sample instances")
    spec_opts(p, "1")
    spec_opts(p, "2")
    p.add_argument("--schema", required=True)
    facts_opts(p)
    p.add_argument("--queries", help="default: all atomic queries over the first TBox")
    p.add_argument("--depth", type=_nonneg, default=8)
    p.add_argument("--method", choices=("chase", "auto"), default="chase")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_insep)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ObdaError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # anything else is a bug
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
