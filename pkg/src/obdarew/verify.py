"""Semantic oracle: virtual ABoxes, certain answers and the inseparability harness."""

import itertools
import json
from dataclasses import dataclass, field

from .chase import ABox, Chase, ChaseModel, PathElem, chase  # noqa: F401  (re-exported)
from .datalog import BOT, CQne, DatalogAtom, FactSet, answers, evaluate
from .errors import ValidationError
from .syntax import TBox

DEFAULT_DEPTH = 8


def virtual_abox(m, d):
    """A_{M,D}: every N(o) with o an answer to a source query for N."""
    arity = {}
    for a in m:
        for q in a.disjuncts:
            for at in q.atoms:
                if arity.setdefault(at.pred, len(at.args)) != len(at.args):
                    raise ValidationError(f"view {at.pred} used with two arities")
    for pred, tuples in d.items():
        n = arity.get(pred)
        for t in tuples:
            if n is not None and len(t) != n:
                raise ValidationError(f"fact {pred}{tuple(t)} has arity {len(t)}, mapping expects {n}")
    out = ABox()
    for a in m:
        for q in a.disjuncts:
            for t in answers(q, d):
                if len(t) == 1:
                    out.add_concept(a.head.pred, t[0])
                elif len(t) == 2:
                    out.add_role(a.head.pred, t[0], t[1])
                else:
                    raise ValidationError(f"mapping head {a.head} must be unary or binary")
    return out


def model_facts(model):
    f = FactSet()
    for a, ext in model.concepts.items():
        for e in ext:
            f.add(a, (e,))
    for p, ext in model.roles.items():
        for pair in ext:
            f.add(p, pair)
    return f


def _components_anchored(q):
    """Every connected component of q contains an answer variable."""
    parent = {v: v for v in q.vars()}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v
    for a in q.atoms:
        vs = list(a.args)
        for v in vs[1:]:
            parent[find(v)] = find(vs[0])
    anchored = {find(v) for v in q.answer_vars}
    return all(find(v) in anchored for v in q.vars())


def _query_complete(model, q, depth):
    if model.inconsistent or model.saturated_at_depth:
        return True
    return model.blocked and depth >= len(q.atoms) and bool(q.answer_vars) and _components_anchored(q)


def _check_query(t, q):
    sig = t.sig
    for a in q.atoms:
        if len(a.args) == 1 and a.pred in sig.concepts:
            continue
        if len(a.args) == 2 and a.pred in sig.roles:
            continue
        raise ValidationError(f"query atom {a} is not over the TBox signature")


def all_tuples(ind, n):
    return set(itertools.product(sorted(ind, key=str), repeat=n))


def certain_answers_cq(t, a, q, depth=DEFAULT_DEPTH, individuals=()):
    """(answers, complete) for q over ⟨t, a⟩, by homomorphisms into a chase fragment.

    The chase is deepened one level at a time and stops early once the
    fragment is known to be enough for q.
    """
    _check_query(t, q)
    ind = set(a.ind) | set(individuals)
    # blocked nodes are finite witnesses for AQs; general CQs need the plain chase
    ch = Chase(t, a, individuals, blocking=is_aq(q))
    model = None
    for d in range(0, depth + 1):
        ch.run(d)
        model = ch.model()
        if model.inconsistent:
            return all_tuples(ind, len(q.answer_vars)), True
        if _query_complete(model, q, d):
            break
    found = answers(q, model_facts(model))
    named = {tup for tup in found if all(isinstance(e, str) for e in tup)}
    return named, _query_complete(model, q, model.depth)


def is_aq(q):
    if len(q.atoms) != 1 or q.ineqs:
        return False
    (atom,) = q.atoms
    return tuple(atom.args) == tuple(q.answer_vars) and len(set(atom.args)) == len(atom.args)


_PROGRAMS = {}


def _aq_program(spec):
    from .rewriter import compile_tbox
    from .datalog import program_for
    key = id(spec)
    hit = _PROGRAMS.get(key)
    if hit is not None and hit[0] is spec:
        return hit[1], hit[2]
    t3, info = compile_tbox(spec.tbox, max_lhs=len(spec.tbox.sig.concepts))
    p = program_for(t3, spec.mapping, spec.schema.view_arity)
    complete = not info["unknown"]
    _PROGRAMS[key] = (spec, p, complete)
    return p, complete


def aq_answers_datalog(spec, d, q):
    """AQ answers via evaluate(Π_{T,M}, D)."""
    p, complete = _aq_program(spec)
    facts = evaluate(p, d)
    (atom,) = q.atoms
    if facts.get(BOT):
        ind = {c for (c,) in facts.get("__top_d", set())}
        return all_tuples(ind, len(atom.args)), True
    return set(facts.get(atom.pred, set())), complete


def certain_answers_spec(spec, d, q, depth=DEFAULT_DEPTH, method="auto"):
    """cert(q, P, D) = cert(q, ⟨T, A_{M,D}⟩).

    method: "chase", "datalog" (AQs over a Horn TBox only) or "auto".
    """
    fast = (method in ("auto", "datalog") and is_aq(q) and isinstance(spec.tbox, TBox)
            and not spec.tbox.has_atmost())
    if method == "datalog" and not fast:
        raise ValidationError("the Datalog path needs an atomic query over a Horn-ALCHI TBox")
    if fast:
        _check_query(spec.tbox, q)
        return aq_answers_datalog(spec, d, q)
    a = virtual_abox(spec.mapping, d)
    return certain_answers_cq(spec.tbox, a, q, depth)


def spec_consistent(spec, d, depth=DEFAULT_DEPTH):
    a = virtual_abox(spec.mapping, d)
    ch = Chase(spec.tbox, a)
    for k in range(0, depth + 1):
        ch.run(k)
        if ch.inconsistent:
            return False
        if not ch.truncated or ch.is_blocked():
            return True
    return not ch.inconsistent


def atomic_queries(sigma):
    out = []
    for c in sorted(sigma.concepts):
        out.append(CQne(("x",), frozenset([DatalogAtom(c, ("x",))])))
    for r in sorted(sigma.roles):
        out.append(CQne(("x", "y"), frozenset([DatalogAtom(r, ("x", "y"))])))
    return out


RELATIONS = ("equal", "output⊂input", "incomparable")


def relation(input_answers, output_answers):
    if input_answers == output_answers:
        return "equal"
    if output_answers < input_answers:
        return "output⊂input"
    return "incomparable"


@dataclass
class InsepReport:
    rows: list = field(default_factory=list)
    consistency: list = field(default_factory=list)

    @property
    def verdict(self):
        rels = {r["relation"] for r in self.rows if not r["inconclusive"]}
        if rels <= {"equal"}:
            return "equal"
        if rels <= {"equal", "output⊂input"}:
            return "output⊂input"
        return "incomparable"

    @property
    def depth_sufficient(self):
        return all(r["complete_input"] and r["complete_output"] for r in self.rows)

    def to_dict(self):
        return {"verdict": self.verdict, "depth_sufficient": self.depth_sufficient,
                "consistency": self.consistency, "rows": self.rows}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def table(self):
        lines = [f"{'inst':>4}  {'query':<32} {'relation':<14} {'input':<24} {'output':<24} complete"]
        for r in self.rows:
            rel = r["relation"] + ("?" if r["inconclusive"] else "")
            lines.append(f"{r['instance']:>4}  {r['query']:<32} {rel:<14} {_fmt(r['answers_input']):<24} "
                         f"{_fmt(r['answers_output']):<24} {r['complete_input']}/{r['complete_output']}")
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def _fmt(ans):
    s = "{" + ", ".join("(" + ",".join(t) + ")" for t in ans) + "}"
    return s if len(s) <= 24 else s[:21] + "..."


def check_inseparable(spec1, spec2, sigma, instances, queries=None, depth=DEFAULT_DEPTH, method="chase"):
    """Compare certain answers of spec1 (input) and spec2 (output) on samples."""
    queries = atomic_queries(sigma) if queries is None else list(queries)
    for q in queries:
        for a in q.atoms:
            if a.pred not in sigma.concepts and a.pred not in sigma.roles:
                raise ValidationError(f"query {q} is not over the given signature")
    rep = InsepReport()
    for i, d in enumerate(instances):
        rep.consistency.append({"instance": i, "input": spec_consistent(spec1, d, depth),
                                "output": spec_consistent(spec2, d, depth)})
        for q in queries:
            a1, c1 = certain_answers_spec(spec1, d, q, depth, method)
            a2, c2 = certain_answers_spec(spec2, d, q, depth, method if isinstance(spec2.tbox, TBox) else "chase")
            rel = relation(a1, a2)
            rep.rows.append({
                "instance": i,
                "query": str(q),
                "answers_input": [list(t) for t in sorted(a1)],
                "answers_output": [list(t) for t in sorted(a2)],
                "complete_input": c1,
                "complete_output": c2,
                "relation": rel,
                "inconclusive": rel != "equal" and not (c1 and c2),
            })
    return rep
