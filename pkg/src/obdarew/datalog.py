"""Datalog with guarded inequalities: translation of TBoxes and mappings, evaluation.

Facts are kept as {predicate: set of tuples}. Rule terms are always
variables; constants only occur in fact sets.
"""

from dataclasses import dataclass, field

from .errors import ValidationError
from .syntax import AtMost1, Atom, Bottom, CI, Exists, Forall, RI, RoleDisjoint

BOT = "__bot"
TOP = "__top_d"
EQ = "__eq"
RESERVED = {BOT: 0, TOP: 1, EQ: 2}


@dataclass(frozen=True)
class DatalogAtom:
    pred: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def vars(self):
        return set(self.args)

    def __str__(self):
        if not self.args and self.pred == BOT:
            return BOT
        return f"{self.pred}({','.join(map(str, self.args))})"


def _pairs(ineqs):
    out = set()
    for a, b in ineqs:
        if a == b:
            raise ValidationError(f"inequality {a} != {b} is unsatisfiable")
        out.add((a, b) if a < b else (b, a))
    return frozenset(out)


@dataclass(frozen=True)
class DatalogRule:
    head: DatalogAtom
    body: tuple
    ineqs: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "ineqs", _pairs(self.ineqs))
        bvars = set()
        for a in self.body:
            bvars |= a.vars()
        if not self.head.vars() <= bvars:
            raise ValidationError(f"unsafe rule: head variables {sorted(self.head.vars() - bvars)} not in body")
        for x, y in self.ineqs:
            if x not in bvars or y not in bvars:
                raise ValidationError(f"unguarded inequality {x} != {y}")

    def __str__(self):
        parts = [str(a) for a in self.body] + [f"{x} != {y}" for x, y in sorted(self.ineqs)]
        return f"{self.head} :- {', '.join(parts)}."


@dataclass
class DatalogProgram:
    rules: tuple
    edb: frozenset = frozenset()
    idb: frozenset = frozenset()
    arities: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rules = tuple(self.rules)
        heads = {r.head.pred for r in self.rules}
        self.idb = frozenset(self.idb) | heads
        body = {a.pred for r in self.rules for a in r.body}
        self.edb = (frozenset(self.edb) | body) - self.idb
        if frozenset(self.edb) & self.idb:
            raise ValidationError("EDB and IDB predicates overlap")
        ar = dict(self.arities)
        for r in self.rules:
            for a in (r.head,) + r.body:
                n = len(a.args)
                if ar.setdefault(a.pred, n) != n:
                    raise ValidationError(f"predicate {a.pred} used with arities {ar[a.pred]} and {n}")
        for p, n in RESERVED.items():
            if p in ar and ar[p] != n:
                raise ValidationError(f"reserved predicate {p} must have arity {n}")
        self.arities = ar

    def __str__(self):
        return "\n".join(str(r) for r in self.rules)

    def rules_for(self, pred):
        return [r for r in self.rules if r.head.pred == pred]


def union(*programs):
    rules, edb, idb, ar = [], set(), set(), {}
    seen = set()
    for p in programs:
        for r in p.rules:
            if r not in seen:
                seen.add(r)
                rules.append(r)
        edb |= p.edb
        idb |= p.idb
        ar.update(p.arities)
    return DatalogProgram(tuple(rules), frozenset(edb - idb), frozenset(idb), ar)


class FactSet(dict):
    """Map predicate -> set of constant tuples."""

    def add(self, pred, args):
        self.setdefault(pred, set()).add(tuple(args))

    def get_set(self, pred):
        return self.get(pred, set())

    def facts(self):
        return {(p, t) for p, s in self.items() for t in s}

    def copy(self):
        return FactSet({p: set(s) for p, s in self.items()})

    def count(self):
        return sum(len(s) for s in self.values())

    def constants(self):
        return {c for s in self.values() for t in s for c in t}

    def __eq__(self, other):
        if not isinstance(other, dict):
            return NotImplemented
        a = {p: s for p, s in self.items() if s}
        b = {p: s for p, s in other.items() if s}
        return a == b

    __hash__ = None


@dataclass(frozen=True)
class CQne:
    """A conjunctive query with inequalities."""
    answer_vars: tuple
    atoms: frozenset
    ineqs: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "answer_vars", tuple(self.answer_vars))
        object.__setattr__(self, "atoms", frozenset(self.atoms))
        object.__setattr__(self, "ineqs", _pairs(self.ineqs))
        if not self.atoms:
            raise ValidationError("a query needs at least one atom")
        vs = self.vars()
        if not set(self.answer_vars) <= vs:
            raise ValidationError(f"answer variables {sorted(set(self.answer_vars) - vs)} do not occur in an atom")
        for x, y in self.ineqs:
            if x not in vs or y not in vs:
                raise ValidationError(f"inequality {x} != {y} uses a variable not in any atom")

    def vars(self):
        out = set()
        for a in self.atoms:
            out |= a.vars()
        return out

    def preds(self):
        return {a.pred for a in self.atoms}

    def sorted_atoms(self):
        return sorted(self.atoms, key=lambda a: (a.pred, a.args))

    def body_str(self):
        parts = [str(a) for a in self.sorted_atoms()] + [f"{x} != {y}" for x, y in sorted(self.ineqs)]
        return ", ".join(parts)

    def __str__(self):
        return f"q({','.join(self.answer_vars)}) :- {self.body_str()}"


@dataclass(frozen=True)
class MappingAssertion:
    """φ ↝ N(x): `head` is the target atom, `disjuncts` the UCQ≠ source query."""
    head: DatalogAtom
    disjuncts: tuple

    def __post_init__(self):
        object.__setattr__(self, "disjuncts", tuple(self.disjuncts))
        if not self.disjuncts:
            raise ValidationError(f"mapping assertion for {self.head.pred} has an empty source query")
        for q in self.disjuncts:
            if tuple(q.answer_vars) != tuple(self.head.args):
                raise ValidationError(f"disjunct answer variables {q.answer_vars} differ from head {self.head}")

    def __str__(self):
        first, *rest = self.disjuncts
        lines = [f"{self.head} :- {first.body_str()}"]
        lines += [f"    | {q.body_str()}" for q in rest]
        return "\n".join(lines)


class Mapping(tuple):
    """An ordered collection of mapping assertions."""

    def __new__(cls, assertions=()):
        return super().__new__(cls, tuple(assertions))

    def heads(self):
        return {a.head.pred for a in self}

    def body_preds(self):
        return {at.pred for a in self for q in a.disjuncts for at in q.atoms}

    def split(self):
        """One assertion per disjunct."""
        return Mapping(MappingAssertion(a.head, (q,)) for a in self for q in a.disjuncts)

    def __str__(self):
        return "\n".join(str(a) for a in self)


# ---------------------------------------------------------------------------
# translations


def _role_atom(role, x, y):
    return DatalogAtom(role.base, (y, x) if role.inverted else (x, y))


def _skip_backward(t3):
    # A_{A1⊓…⊓An} ⊑ Aᵢ is redundant as a rule: A_{…} is only derived from
    # A1…An, so the rule would close a useless dependency cycle.
    out = set()
    for name, prov in t3.fresh_registry.items():
        if isinstance(prov, frozenset):
            out |= {CI(frozenset([name]), Atom(n)) for n in prov}
    return out


def translate_tbox(t3):
    """Π_T: one rule schema per axiom plus the ⊤_Δ/⊥ auxiliary rules."""
    rules = []
    skip = _skip_backward(t3)
    for ax in t3.sorted_axioms():
        if ax in skip:
            continue
        if isinstance(ax, CI):
            body = [DatalogAtom(n, ("x",)) for n in sorted(ax.lhs)]
            r = ax.rhs
            if isinstance(r, Exists):
                if len(r.filler) > 1:
                    raise ValidationError(f"not in normal form: {ax}")
                continue
            if not body and not isinstance(r, (Forall, AtMost1)):
                body = [DatalogAtom(TOP, ("x",))]
            if isinstance(r, Atom):
                rules.append(DatalogRule(DatalogAtom(r.name, ("x",)), body))
            elif isinstance(r, Bottom):
                rules.append(DatalogRule(DatalogAtom(BOT), body))
            elif isinstance(r, Forall):
                rules.append(DatalogRule(DatalogAtom(r.filler, ("y",)), body + [_role_atom(r.role, "x", "y")]))
            elif isinstance(r, AtMost1):
                b = list(body) + [_role_atom(r.role, "x", "y")]
                if r.filler is not None:
                    b.append(DatalogAtom(r.filler, ("y",)))
                b.append(_role_atom(r.role, "x", "z"))
                if r.filler is not None:
                    b.append(DatalogAtom(r.filler, ("z",)))
                rules.append(DatalogRule(DatalogAtom(EQ, ("y", "z")), b, {("y", "z")}))
                rules.append(DatalogRule(DatalogAtom(BOT), [DatalogAtom(EQ, ("y", "z"))]))
            else:
                raise ValidationError(f"not in normal form: {ax}")
        elif isinstance(ax, RI):
            rules.append(DatalogRule(_role_atom(ax.sup, "x", "y"), [_role_atom(ax.sub, "x", "y")]))
        elif isinstance(ax, RoleDisjoint):
            rules.append(DatalogRule(DatalogAtom(BOT), [_role_atom(ax.r1, "x", "y"), _role_atom(ax.r2, "x", "y")]))
        else:
            raise ValidationError(f"not in normal form: {ax}")
    concepts, roles = sorted(t3.sig.concepts), sorted(t3.sig.roles)
    for a in concepts:
        rules.append(DatalogRule(DatalogAtom(TOP, ("x",)), [DatalogAtom(a, ("x",))]))
    for p in roles:
        rules.append(DatalogRule(DatalogAtom(TOP, ("x",)), [DatalogAtom(p, ("x", "y"))]))
        rules.append(DatalogRule(DatalogAtom(TOP, ("y",)), [DatalogAtom(p, ("x", "y"))]))
    # ⊥ propagation is only instantiated when ⊥ has a rule; otherwise it is
    # dead code that would still put every predicate on a dependency cycle
    if any(r.head.pred == BOT for r in rules):
        for a in concepts:
            rules.append(DatalogRule(DatalogAtom(a, ("x",)), [DatalogAtom(BOT), DatalogAtom(TOP, ("x",))]))
        for p in roles:
            rules.append(DatalogRule(DatalogAtom(p, ("x", "y")),
                                     [DatalogAtom(BOT), DatalogAtom(TOP, ("x",)), DatalogAtom(TOP, ("y",))]))
    ar = {a: 1 for a in concepts}
    ar.update({p: 2 for p in roles})
    idb = set(concepts) | set(roles) | {TOP}
    if any(r.head.pred == BOT for r in rules):
        idb.add(BOT)
    if any(r.head.pred == EQ for r in rules):
        idb.add(EQ)
    return DatalogProgram(tuple(rules), frozenset(), frozenset(idb), ar)


def mapping_program(m, views=None):
    """Π_M: one rule per disjunct of every assertion."""
    rules = []
    edb = set()
    for a in m:
        for q in a.disjuncts:
            for at in q.atoms:
                if views is not None and at.pred not in views:
                    raise ValidationError(f"{at.pred} in the source query of {a.head.pred} is not a view")
                edb.add(at.pred)
            rules.append(DatalogRule(a.head, q.sorted_atoms(), q.ineqs))
    ar = {}
    if views is not None:
        ar.update({v: n for v, n in dict(views).items() if v in edb})
    return DatalogProgram(tuple(rules), frozenset(edb), frozenset(a.head.pred for a in m), ar)


def program_for(t3, m, views=None):
    """Π_{T,M} = Π_T ∪ Π_M."""
    pm = mapping_program(m, views)
    pt = translate_tbox(t3)
    clash = pm.edb & pt.idb
    if clash:
        raise ValidationError(f"view names clash with ontology names: {sorted(clash)}")
    return union(pt, pm)


# ---------------------------------------------------------------------------
# evaluation


def _plan(body, first):
    order = [first] if first is not None else []
    bound = set(body[first].args) if first is not None else set()
    rest = [i for i in range(len(body)) if i != first]
    while rest:
        # prefer atoms sharing variables with what is bound
        best = max(rest, key=lambda i: (len(set(body[i].args) & bound), -i))
        order.append(best)
        bound |= set(body[best].args)
        rest.remove(best)
    return order


def join(body, rels, ineqs=(), first=None, init=None, project=None):
    """Variable bindings matching `body` against the given relations.

    rels[i] is the set of tuples atom i ranges over.  Without `project` this
    is a lazy iterator of binding dicts.  With `project` (a tuple of
    variables) it returns the set of projected tuples, searching each one
    only until its first witness.
    """
    order = _plan(body, first)
    ineqs = list(ineqs)
    indexes = {}

    def index(i, positions):
        key = (i, positions)
        idx = indexes.get(key)
        if idx is None:
            idx = {}
            for t in rels[i]:
                idx.setdefault(tuple(t[p] for p in positions), []).append(t)
            indexes[key] = idx
        return idx

    def ok(b):
        for x, y in ineqs:
            if x in b and y in b and b[x] == b[y]:
                return False
        return True

    def extend(k, b):
        # candidate tuples for the k-th atom under b; yields after binding, then undoes
        i = order[k]
        args = body[i].args
        positions = tuple(p for p, v in enumerate(args) if v in b)
        key = tuple(b[args[p]] for p in positions)
        cands = index(i, positions).get(key, ()) if positions else rels[i]
        for t in cands:
            added = []
            good = True
            for p, v in enumerate(args):
                if v in b:
                    if b[v] != t[p]:
                        good = False
                        break
                else:
                    b[v] = t[p]
                    added.append(v)
            try:
                if good and ok(b):
                    yield
            finally:
                for v in added:
                    del b[v]

    def every(k, b):
        if k == len(order):
            yield dict(b)
            return
        for _ in extend(k, b):
            yield from every(k + 1, b)

    def exists(k, b):
        if k == len(order):
            return True
        return any(exists(k + 1, b) for _ in extend(k, b))

    b0 = dict(init or {})
    if project is None:
        return every(0, b0)
    results = set()

    def collect(k, b):
        if all(v in b for v in project):
            t = tuple(b[v] for v in project)
            if t not in results and exists(k, b):
                results.add(t)
            return
        for _ in extend(k, b):
            collect(k + 1, b)

    collect(0, b0)
    return results


def _check_arity(p, d):
    for pred, tuples in d.items():
        n = p.arities.get(pred)
        for t in tuples:
            if n is not None and len(t) != n:
                raise ValidationError(f"fact {pred}{t} has arity {len(t)}, expected {n}")


def evaluate(p, d, max_rounds=None):
    """Semi-naive bottom-up evaluation.

    With max_rounds=i the result holds exactly the facts with a derivation
    tree of depth <= i (one round = one parallel application of all rules).
    """
    _check_arity(p, d)
    full = FactSet({k: set(map(tuple, v)) for k, v in d.items()})
    old = FactSet()
    delta = full.copy()
    rounds = 0
    while True:
        if max_rounds is not None and rounds >= max_rounds:
            break
        new = FactSet()
        for r in p.rules:
            if rounds == 0:
                positions = [None]
            else:
                positions = [i for i, a in enumerate(r.body) if delta.get(a.pred)]
                if not positions:
                    continue
            for i in positions:
                rels = []
                for j, a in enumerate(r.body):
                    if i is None or j > i:
                        rels.append(full.get_set(a.pred))
                    elif j == i:
                        rels.append(delta.get_set(a.pred))
                    else:
                        rels.append(old.get_set(a.pred))
                for t in join(r.body, rels, r.ineqs, first=i, project=tuple(r.head.args)):
                    if t not in full.get_set(r.head.pred):
                        new.add(r.head.pred, t)
        rounds += 1
        if not new.count():
            break
        old = full.copy()
        for k, s in new.items():
            full.setdefault(k, set()).update(s)
        delta = new
    return full


def is_consistent(p, d):
    return not evaluate(p, d).get(BOT)


def answers(q, facts):
    """Evaluate a CQ≠ over a fact set; constants are compared as tokens."""
    body = q.sorted_atoms()
    rels = [facts.get(a.pred, set()) for a in body]
    return join(body, rels, q.ineqs, project=tuple(q.answer_vars))


def ucq_answers(qs, facts):
    out = set()
    for q in qs:
        out |= answers(q, facts)
    return out
