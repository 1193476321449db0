"""Expansion trees, the cutting operator, ET-mappings and monadization.

Tree depth counts nodes on the longest root-to-leaf path, the root alone
being depth 1; a depth-k tree therefore matches a derivation found in k
rounds of `datalog.evaluate`.
"""

import itertools
from dataclasses import dataclass

from .datalog import (CQne, DatalogAtom, DatalogProgram, DatalogRule,
                      Mapping, MappingAssertion, join, program_for)
from .errors import EnumerationCapError, ValidationError

DEFAULT_K = 5
DEFAULT_CAP = 10_000


@dataclass(frozen=True)
class Node:
    atom: DatalogAtom
    rule: DatalogRule
    children: tuple = ()

    def depth(self):
        return 1 + max((c.depth() for c in self.children), default=0)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class ExpansionTree:
    root: Node
    idb: frozenset

    @property
    def depth(self):
        return self.root.depth()


@dataclass(frozen=True)
class Bounded:
    ucq: tuple

    def __post_init__(self):
        object.__setattr__(self, "ucq", tuple(self.ucq))

    def __str__(self):
        return "bounded"


@dataclass(frozen=True)
class Unbounded:
    def __str__(self):
        return "unbounded"


@dataclass(frozen=True)
class Unknown:
    def __str__(self):
        return "unknown"


# ---------------------------------------------------------------------------
# enumeration


class _Fresh:
    def __init__(self):
        self.n = 0

    def __call__(self):
        self.n += 1
        return f"v{self.n}"


def _rename_atom(a, s):
    return DatalogAtom(a.pred, tuple(s[v] for v in a.args))


def _rename_rule(r, s):
    return DatalogRule(_rename_atom(r.head, s), tuple(_rename_atom(a, s) for a in r.body),
                       {(s[x], s[y]) for x, y in r.ineqs})


def _rename_node(node, s, fresh):
    def var(v):
        if v not in s:
            s[v] = fresh()
        return s[v]
    for a in (node.rule.head,) + node.rule.body:
        for v in a.args:
            var(v)
    return Node(_rename_atom(node.atom, s), _rename_rule(node.rule, s),
                tuple(_rename_node(c, s, fresh) for c in node.children))


def _head_vars(rule):
    args = rule.head.args
    if len(set(args)) != len(args):
        raise ValidationError(f"rule head with repeated variables is not supported: {rule}")
    return args


class _Enumerator:
    def __init__(self, p, cap):
        self.p = p
        self.cap = cap
        self.memo = {}
        self.fresh = _Fresh()
        self.by_head = {}
        for r in p.rules:
            self.by_head.setdefault(r.head.pred, []).append(r)

    def trees(self, pred, depth):
        """Trees with root pred(h0, …) of depth <= depth, as generic nodes."""
        key = (pred, depth)
        if key in self.memo:
            return self.memo[key]
        out = []
        if depth >= 1:
            head = tuple(f"h{i}" for i in range(self.p.arities.get(pred, 0)))
            for r in self.by_head.get(pred, []):
                s = dict(zip(_head_vars(r), head))
                local = itertools.count(1)
                for a in r.body:
                    for v in a.args:
                        if v not in s:
                            s[v] = f"w{next(local)}"
                inst = _rename_rule(r, s)
                idb_atoms = [a for a in inst.body if a.pred in self.p.idb]
                options = [self.trees(a.pred, depth - 1) for a in idb_atoms]
                if any(not o for o in options):
                    continue
                for combo in itertools.product(*options):
                    fresh = self.fresh
                    subs = []
                    try:
                        for a, sub in zip(idb_atoms, combo):
                            smap = dict(zip(sub.atom.args, a.args))
                            subs.append(_rename_node(sub, smap, fresh))
                    except ValidationError:
                        continue  # unifying the head made some x != x
                    out.append(Node(DatalogAtom(pred, head), inst, tuple(subs)))
                    if len(out) > self.cap:
                        raise EnumerationCapError(pred, self.cap)
        self.memo[key] = out
        return out


def expansions_upto(p, n, k, cap=DEFAULT_CAP):
    """All expansion trees for n of depth <= k."""
    if n not in p.idb:
        raise ValidationError(f"{n} is not an IDB predicate")
    if k < 1:
        raise ValidationError("k must be positive")
    en = _Enumerator(p, cap)
    return [ExpansionTree(_finalize(t), p.idb) for t in en.trees(n, k)]


def _finalize(node):
    # give generic head placeholders stable answer-variable names
    names = {}
    for i, v in enumerate(node.atom.args):
        names[v] = answer_var(i, len(node.atom.args))
    fresh = _Fresh()
    return _rename_node(node, names, fresh)


def answer_var(i, n):
    if n <= 2:
        return "xy"[i]
    return f"x{i + 1}"


def tree_to_query(t):
    atoms, ineqs = set(), set()
    for node in t.root.walk():
        for a in node.rule.body:
            if a.pred not in t.idb:
                atoms.add(a)
        ineqs |= node.rule.ineqs
    return CQne(t.root.atom.args, frozenset(atoms), frozenset(ineqs))


def is_db_defined(q, edb):
    return all(a.pred in edb for a in q.atoms)


# ---------------------------------------------------------------------------
# queries up to renaming


EXIST_NAMES = ["y", "z", "w", "v", "u", "t", "s"]


def canonical(q):
    """Rename variables deterministically: answer vars by position, then the rest."""
    names = {}
    for i, v in enumerate(q.answer_vars):
        names.setdefault(v, answer_var(i, len(q.answer_vars)))
    pool = [n for n in EXIST_NAMES if n not in names.values()]
    counter = itertools.count(1)

    def key(a):
        return (a.pred, tuple(names.get(v, "?") for v in a.args), a.args)

    for a in sorted(q.atoms, key=key):
        for v in a.args:
            if v not in names:
                names[v] = pool.pop(0) if pool else f"z{next(counter)}"
    return CQne(tuple(names[v] for v in q.answer_vars),
                frozenset(DatalogAtom(a.pred, tuple(names[v] for v in a.args)) for a in q.atoms),
                frozenset((names[x], names[y]) for x, y in q.ineqs))


def homomorphisms(src, dst, injective=False):
    """Variable maps src -> dst sending atoms into atoms and answer vars positionally."""
    body = src.sorted_atoms()
    facts = {}
    for a in dst.atoms:
        facts.setdefault(a.pred, set()).add(a.args)
    if len(src.answer_vars) != len(dst.answer_vars):
        return
    init = {}
    for v, w in zip(src.answer_vars, dst.answer_vars):
        if init.setdefault(v, w) != w:
            return
    rels = [facts.get(a.pred, set()) for a in body]
    for b in join(body, rels, (), init=init):
        if injective and len(set(b.values())) != len(b):
            continue
        if all(((b[x], b[y]) if b[x] < b[y] else (b[y], b[x])) in dst.ineqs for x, y in src.ineqs):
            yield b


def contained_in(q1, q2):
    """Sufficient test for q1 ⊆ q2: a homomorphism q2 -> q1 that respects inequalities."""
    if not q2.preds() <= q1.preds():
        return False
    return next(homomorphisms(q2, q1), None) is not None


def isomorphic(q1, q2):
    if len(q1.atoms) != len(q2.atoms) or len(q1.vars()) != len(q2.vars()) or len(q1.ineqs) != len(q2.ineqs):
        return False
    if sorted(a.pred for a in q1.atoms) != sorted(a.pred for a in q2.atoms):
        return False
    for b in homomorphisms(q1, q2, injective=True):
        if {(b[x], b[y]) if b[x] < b[y] else (b[y], b[x]) for x, y in q1.ineqs} == set(q2.ineqs):
            return True
    return False


def _qkey(q):
    return (len(q.atoms), str(q))


def dedupe(queries):
    """Canonical, duplicate-free (up to renaming) list, in a stable order."""
    buckets = {}
    out = []
    for q in sorted((canonical(q) for q in queries), key=_qkey):
        sig = (tuple(sorted(a.pred for a in q.atoms)), len(q.vars()), len(q.ineqs), len(q.answer_vars))
        same = buckets.setdefault(sig, [])
        if any(q == o or isomorphic(q, o) for o in same):
            continue
        same.append(q)
        out.append(q)
    return out


def core(q):
    """Drop atoms while the query stays equivalent (a retraction onto the rest)."""
    atoms = set(q.atoms)
    changed = True
    while changed:
        changed = False
        for a in sorted(atoms, key=str):
            rest = atoms - {a}
            kept = {v for b in rest for v in b.args}
            if not set(q.answer_vars) <= kept or any(x not in kept or y not in kept for x, y in q.ineqs):
                continue
            smaller = CQne(q.answer_vars, frozenset(rest), q.ineqs)
            if next(homomorphisms(q, smaller), None) is not None:
                atoms = rest
                changed = True
                break
    return q if len(atoms) == len(q.atoms) else canonical(CQne(q.answer_vars, frozenset(atoms), q.ineqs))


def minimize(queries):
    """Cores of the queries, minus those contained in another one."""
    qs = dedupe(core(q) for q in queries)
    keep = []
    for i, q in enumerate(qs):
        dominated = False
        for j, o in enumerate(qs):
            if i == j:
                continue
            if contained_in(q, o):
                # equivalent pair: keep the earlier one
                if contained_in(o, q) and i < j:
                    continue
                dominated = True
                break
        if not dominated:
            keep.append(q)
    return keep


# ---------------------------------------------------------------------------
# oracles and the cutting operator


def dependency_graph(p):
    import networkx as nx
    g = nx.DiGraph()
    g.add_nodes_from(p.idb)
    for r in p.rules:
        for a in r.body:
            if a.pred in p.idb:
                g.add_edge(r.head.pred, a.pred)
    return g


def on_cycle(p):
    import networkx as nx
    g = dependency_graph(p)
    cyclic = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(v, v) for v in comp):
            cyclic |= comp
    return g, cyclic


def depends_on_cycle(p, n, _cache=None):
    import networkx as nx
    g, cyclic = on_cycle(p) if _cache is None else _cache
    reach = nx.descendants(g, n) | {n}
    return bool(reach & cyclic)


def default_oracle(p, n, cap=DEFAULT_CAP, _cache=None):
    """Bounded with the full unfolding when n depends on no cycle, else Unknown."""
    if n not in p.idb:
        raise ValidationError(f"{n} is not an IDB predicate")
    if depends_on_cycle(p, n, _cache):
        return Unknown()
    trees = expansions_upto(p, n, len(p.idb) + 1, cap)
    return Bounded(tuple(dedupe(tree_to_query(t) for t in trees)))


def unknown_oracle(p, n):
    return Unknown()


class FileOracle:
    """Per-predicate answers read from an oracle file; unlisted predicates are Unknown."""

    def __init__(self, answers):
        self.answers = dict(answers)

    def __call__(self, p, n):
        return self.answers.get(n, Unknown())


class CachedDefault:
    """default_oracle with the dependency analysis shared across predicates."""

    def __init__(self, cap=DEFAULT_CAP):
        self.cap = cap
        self._prog = None
        self._cache = None

    def __call__(self, p, n):
        if self._prog is not p:
            self._prog = p
            self._cache = on_cycle(p)
        return default_oracle(p, n, self.cap, self._cache)


def cut(n, p, k, omega=None, cap=DEFAULT_CAP, verdict=None):
    """cut_k^Ω(n): the oracle's UCQ when n is bounded, else all expansions of depth <= k."""
    omega = omega if omega is not None else default_oracle
    ans = omega(p, n)
    if verdict is not None:
        verdict[n] = ans
    if isinstance(ans, Bounded):
        return dedupe(ans.ucq)
    return dedupe(tree_to_query(t) for t in expansions_upto(p, n, k, cap))


def et_mapping_cut(t3, m, k=DEFAULT_K, omega=None, views=None, cap=DEFAULT_CAP, verdicts=None,
                   extra=()):
    """The finite mapping cut_k^Ω(etm_{t3}(m)), one assertion per DB-defined expansion."""
    p = program_for(t3, m, views)
    omega = omega if omega is not None else CachedDefault(cap)
    verdicts = {} if verdicts is None else verdicts
    out = []
    targets = sorted(t3.sig.concepts) + sorted(t3.sig.roles) + list(extra)
    for n in targets:
        if n not in p.idb:
            continue
        qs = [q for q in cut(n, p, k, omega, cap, verdicts) if is_db_defined(q, p.edb)]
        for q in minimize(qs):
            out.append((n, q))
    return Mapping(MappingAssertion(DatalogAtom(n, q.answer_vars), (q,)) for n, q in out)


# ---------------------------------------------------------------------------
# monadization


def derivable(p):
    ok = set(p.edb)
    changed = True
    while changed:
        changed = False
        for r in p.rules:
            if r.head.pred not in ok and all(a.pred in ok for a in r.body):
                ok.add(r.head.pred)
                changed = True
    return ok


def monadize(p):
    """Monadic program with the same unary (and nullary) IDB facts.

    Rules not reachable from the EDB are pruned, binary IDB atoms in bodies
    are replaced by their (finite) unfoldings, and binary-headed rules dropped.
    """
    import networkx as nx
    ok = derivable(p)
    rules = [r for r in p.rules if all(a.pred in ok for a in r.body)]
    binary = {n for n in p.idb if p.arities.get(n) == 2}
    g = nx.DiGraph()
    g.add_nodes_from(binary)
    for r in rules:
        if r.head.pred in binary:
            for a in r.body:
                if a.pred in binary:
                    g.add_edge(r.head.pred, a.pred)
    if not nx.is_directed_acyclic_graph(g):
        cyc = nx.find_cycle(g)
        raise ValidationError(f"recursive role predicate {cyc[0][0]}: monadization needs nonrecursive roles")
    fresh = _Fresh()
    memo = {}

    def unfold(pred):
        # list of (head args, body atoms, ineqs) with binary IDB atoms expanded
        if pred in memo:
            return memo[pred]
        out = []
        for r in rules:
            if r.head.pred != pred:
                continue
            out.extend(_expand_body(r.head.args, r.body, r.ineqs))
        memo[pred] = out
        return out

    def _expand_body(head_args, body, ineqs):
        slots = []
        for a in body:
            if a.pred in binary:
                opts = []
                for h, b, i in unfold(a.pred):
                    s = dict(zip(h, a.args))
                    for at in b:
                        for v in at.args:
                            if v not in s:
                                s[v] = fresh()
                    opts.append(([_rename_atom(at, s) for at in b], {(s[x], s[y]) for x, y in i}))
                slots.append(opts)
            else:
                slots.append([([a], set())])
        res = []
        for combo in itertools.product(*slots):
            atoms, ineq = [], set(ineqs)
            for b, i in combo:
                atoms.extend(b)
                ineq |= i
            res.append((head_args, atoms, ineq))
        return res

    new, seen = [], set()
    for r in rules:
        if r.head.pred in binary:
            continue
        for h, b, i in _expand_body(r.head.args, r.body, r.ineqs):
            nr = DatalogRule(r.head, tuple(dict.fromkeys(b)), i)
            if nr not in seen:
                seen.add(nr)
                new.append(nr)
    idb = frozenset(n for n in p.idb if n not in binary)
    ar = {n: a for n, a in p.arities.items() if n not in binary or n in p.edb}
    return DatalogProgram(tuple(new), p.edb, idb, ar)
