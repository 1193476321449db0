"""Random small specs, instances and Datalog programs for property tests."""

import random

from obdarew.datalog import (CQne, DatalogAtom, DatalogProgram, DatalogRule,
                             FactSet, Mapping, MappingAssertion)
from obdarew.rewriter import ObdaSpec
from obdarew.syntax import (AtMost1, Atom, Bottom, CI, Exists, Forall, RI, Role,
                            Signature, TBox)


def random_tbox(rng, n_concepts=None, n_roles=None, n_axioms=None, acyclic=True,
                bottom=0.05, atmost=0.0, top=0.0):
    """Normal-form Horn-ALCHI(Q) TBox.

    With `acyclic`, atomic and universal CIs only point from lower to higher
    concept indexes and RIs from lower to higher role indexes, which keeps
    most generated Datalog programs nonrecursive.
    """
    nc = n_concepts or rng.randint(2, 6)
    nr = n_roles if n_roles is not None else rng.randint(1, 3)
    na = n_axioms or rng.randint(1, 8)
    cs = [f"A{i}" for i in range(nc)]
    rs = [f"P{i}" for i in range(nr)]
    axioms = set()
    for _ in range(na):
        kind = rng.random()
        role = Role(rng.choice(rs), rng.random() < 0.4) if rs else None
        if role is None or kind < 0.3:
            if nc < 2:
                continue
            j = rng.randint(1, nc - 1)
            lhs = rng.sample(cs[:j], rng.randint(1, min(2, j))) if acyclic else rng.sample(cs, rng.randint(1, 2))
            if rng.random() < bottom:
                axioms.add(CI(frozenset(lhs), Bottom()))
            else:
                tgt = cs[j] if acyclic else rng.choice(cs)
                if tgt not in lhs:
                    axioms.add(CI(frozenset(lhs), Atom(tgt)))
        elif kind < 0.6:
            lhs = frozenset() if rng.random() < top else frozenset(rng.sample(cs, rng.randint(1, min(2, nc))))
            filler = () if rng.random() < 0.2 else (rng.choice(cs),)
            if lhs:
                axioms.add(CI(lhs, Exists(role, filler)))
        elif kind < 0.85:
            j = rng.randint(1, nc - 1) if nc > 1 else 0
            pool = cs[:j] if acyclic and j else cs
            lhs = frozenset() if rng.random() < top else frozenset(rng.sample(pool, 1))
            tgt = cs[j] if acyclic else rng.choice(cs)
            axioms.add(CI(lhs, Forall(role, tgt)))
        elif rng.random() < atmost:
            axioms.add(CI(frozenset([rng.choice(cs)]), AtMost1(role, rng.choice([None, rng.choice(cs)]))))
        elif nr >= 2:
            i, j = sorted(rng.sample(range(nr), 2))
            axioms.add(RI(Role(rs[i]), Role(rs[j], rng.random() < 0.3)))
    return TBox(frozenset(axioms), Signature(cs, rs))


def random_mapping(rng, t, n_views=None, max_body=3):
    """Views V0..; every assertion body is a CQ with <= max_body view atoms."""
    nv = n_views or rng.randint(1, 4)
    arity = {f"V{i}": rng.choice([1, 1, 2]) for i in range(nv)}
    views = sorted(arity)
    targets = [(c, 1) for c in sorted(t.sig.concepts)] + [(r, 2) for r in sorted(t.sig.roles)]
    out = []
    for name, n in rng.sample(targets, rng.randint(1, len(targets))):
        head = ("x",) if n == 1 else ("x", "y")
        disjuncts = []
        for _ in range(rng.choice([1, 1, 2])):
            q = _random_body(rng, head, views, arity, max_body)
            if q is not None:
                disjuncts.append(q)
        if disjuncts:
            out.append(MappingAssertion(DatalogAtom(name, head), tuple(disjuncts)))
    return Mapping(out), Signature(views=arity)


def _random_body(rng, head, views, arity, max_body):
    pool = list(head) + ["z", "w"]
    for _ in range(20):
        atoms = set()
        for _ in range(rng.randint(1, max_body)):
            v = rng.choice(views)
            atoms.add(DatalogAtom(v, tuple(rng.choice(pool) for _ in range(arity[v]))))
        used = {x for a in atoms for x in a.args}
        if set(head) <= used:
            return CQne(head, frozenset(atoms))
    return None


def random_spec(rng, **kw):
    t = random_tbox(rng, **kw)
    m, schema = random_mapping(rng, t)
    return ObdaSpec(t, m, schema)


def random_instance(rng, schema, max_facts=15, n_consts=5):
    consts = [f"c{i}" for i in range(n_consts)]
    d = FactSet()
    for _ in range(rng.randint(0, max_facts)):
        v, n = rng.choice(schema.views)
        d.add(v, tuple(rng.choice(consts) for _ in range(n)))
    return d


def random_program(rng, max_rules=6, edb=("E", "F", "G"), idb=("A", "B", "C"), ineqs=True):
    """Safe Datalog≠ program over small fixed predicate sets."""
    ar = {"E": 1, "F": 2, "G": 2, "A": 1, "B": 2, "C": 1}
    rules = []
    for _ in range(rng.randint(1, max_rules)):
        head_pred = rng.choice(idb)
        hv = ("x",) if ar[head_pred] == 1 else ("x", "y")
        pool = list(hv) + ["z"]
        for _ in range(20):
            body = [DatalogAtom(p, tuple(rng.choice(pool) for _ in range(ar[p])))
                    for p in rng.choices(edb + idb, k=rng.randint(1, 3))]
            bv = {v for a in body for v in a.args}
            if set(hv) <= bv:
                ine = set()
                if ineqs and len(bv) >= 2 and rng.random() < 0.25:
                    ine.add(tuple(rng.sample(sorted(bv), 2)))
                rules.append(DatalogRule(DatalogAtom(head_pred, hv), tuple(body), frozenset(ine)))
                break
    return DatalogProgram(tuple(rules), arities=ar)


def random_facts(rng, preds, max_facts=12, n_consts=4):
    consts = [str(i) for i in range(n_consts)]
    d = FactSet()
    for _ in range(rng.randint(0, max_facts)):
        p, n = rng.choice(preds)
        d.add(p, tuple(rng.choice(consts) for _ in range(n)))
    return d


def rng_for(seed):
    return random.Random(seed)
