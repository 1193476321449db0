"""Normalization, entailment and the four TBox steps of the rewriting.

Entailment is decided by chasing a small ABox (the left-hand side asserted on
a fresh individual `a`) and reading the answer off the root. The chase is
deepened until every cut-off element is blocked or the depth budget runs out;
in the latter case the check is reported as unknown and treated as false.
"""

import hashlib
import logging
from dataclasses import dataclass
from itertools import combinations

from .chase import ABox, Chase, compile_rules
from .errors import ValidationError
from .syntax import (AtMost1, Atom, Bottom, CI, DLDisjoint, DLInclusion,
                     DLLiteTBox, Exists, ExistsRole, Forall, RI, Role,
                     RoleDisjoint, Signature, TBox, is_normal)

log = logging.getLogger(__name__)

DEFAULT_MAX_LHS = 3
DEFAULT_ENTAIL_CAP = 12

ROOT = "a"


# ---------------------------------------------------------------------------
# surface syntax, as produced by the parser before normalization


@dataclass(frozen=True)
class SName:
    name: str


@dataclass(frozen=True)
class STop:
    pass


@dataclass(frozen=True)
class SBot:
    pass


@dataclass(frozen=True)
class SAnd:
    args: tuple


@dataclass(frozen=True)
class SOr:
    args: tuple


@dataclass(frozen=True)
class SExists:
    role: Role
    filler: object = None


@dataclass(frozen=True)
class SForall:
    role: Role
    filler: object


@dataclass(frozen=True)
class SAtMost1:
    role: Role
    filler: object = None


@dataclass(frozen=True)
class SInclusion:
    lhs: object
    rhs: object


def surface_of(ax):
    """Surface form of a normal-form axiom (inverse of normalization on normal input)."""
    if not isinstance(ax, CI):
        return ax
    lhs = STop() if not ax.lhs else (
        SName(next(iter(ax.lhs))) if len(ax.lhs) == 1 else SAnd(tuple(SName(n) for n in sorted(ax.lhs))))
    r = ax.rhs
    if isinstance(r, Bottom):
        rhs = SBot()
    elif isinstance(r, Atom):
        rhs = SName(r.name)
    elif isinstance(r, Exists):
        f = None if not r.filler else (SName(r.filler[0]) if len(r.filler) == 1 else SAnd(tuple(SName(n) for n in r.filler)))
        rhs = SExists(r.role, f)
    elif isinstance(r, Forall):
        rhs = SForall(r.role, SName(r.filler))
    else:
        rhs = SAtMost1(r.role, None if r.filler is None else SName(r.filler))
    return SInclusion(lhs, rhs)


def _describe(c):
    return type(c).__name__[1:].lower()


def normalize_structural(raw_axioms, sig=None, fresh_prefix="_X"):
    """Bring surface axioms into normal form, introducing fresh concept names.

    An existential on the left is replaced by a fresh X with D ⊑ ∀R⁻.X; a
    conjunctive filler on the right by a fresh X with X ⊑ each conjunct.
    """
    out = []
    registry = {}
    used = set()
    if sig is not None:
        used |= set(sig.concepts) | set(sig.roles)
    for ax in raw_axioms:
        used |= _surface_names(ax)
    counter = [0]

    def fresh(origin):
        while True:
            counter[0] += 1
            name = f"{fresh_prefix}{counter[0]}"
            if name not in used:
                used.add(name)
                registry[name] = origin
                return name

    def lhs_names(c, origin):
        if isinstance(c, SName):
            return frozenset([c.name])
        if isinstance(c, STop):
            return frozenset()
        if isinstance(c, SAnd):
            acc = frozenset()
            for a in c.args:
                sub = lhs_names(a, origin)
                if sub is None:
                    return None
                acc |= sub
            return acc
        if isinstance(c, SBot):
            return None
        if isinstance(c, SExists):
            inner = lhs_names(c.filler if c.filler is not None else STop(), origin)
            if inner is None:
                return None
            x = fresh(origin)
            out.append(CI(inner, Forall(c.role.inverse(), x)))
            return frozenset([x])
        raise ValidationError(f"{_describe(c)} on the left-hand side is outside Horn-ALCHIQ ({origin})")

    def rhs(lhs, c, origin):
        if isinstance(c, SName):
            out.append(CI(lhs, Atom(c.name)))
        elif isinstance(c, SBot):
            out.append(CI(lhs, Bottom()))
        elif isinstance(c, STop):
            pass
        elif isinstance(c, SAnd):
            for a in c.args:
                rhs(lhs, a, origin)
        elif isinstance(c, SExists):
            f = c.filler
            if f is None or isinstance(f, STop):
                out.append(CI(lhs, Exists(c.role)))
            elif isinstance(f, SName):
                out.append(CI(lhs, Exists(c.role, (f.name,))))
            else:
                x = fresh(origin)
                out.append(CI(lhs, Exists(c.role, (x,))))
                rhs(frozenset([x]), f, origin)
        elif isinstance(c, SForall):
            if isinstance(c.filler, SName):
                out.append(CI(lhs, Forall(c.role, c.filler.name)))
            elif isinstance(c.filler, STop):
                pass
            else:
                raise ValidationError(f"universal restriction with complex filler is outside Horn-ALCHIQ ({origin})")
        elif isinstance(c, SAtMost1):
            if c.filler is None or isinstance(c.filler, STop):
                out.append(CI(lhs, AtMost1(c.role)))
            elif isinstance(c.filler, SName):
                out.append(CI(lhs, AtMost1(c.role, c.filler.name)))
            else:
                raise ValidationError(f"at-most restriction with complex filler is outside Horn-ALCHIQ ({origin})")
        else:
            raise ValidationError(f"{_describe(c)} on the right-hand side is outside Horn-ALCHIQ ({origin})")

    for ax in raw_axioms:
        if isinstance(ax, (CI, RI, RoleDisjoint)):
            if isinstance(ax, CI) and not is_normal(ax):
                ax = surface_of(ax)
            else:
                out.append(ax)
                continue
        if not isinstance(ax, SInclusion):
            raise ValidationError(f"not an axiom: {ax!r}")
        origin = _surface_str(ax)
        if _contains(ax.rhs, SOr) or _contains(ax.lhs, SOr):
            raise ValidationError(f"disjunction is outside Horn-ALCHIQ ({origin})")
        lhs = lhs_names(ax.lhs, origin)
        if lhs is None:
            continue
        rhs(lhs, ax.rhs, origin)

    base = sig if sig is not None else Signature()
    concepts, roles = set(base.concepts), set(base.roles)
    for ax in raw_axioms:
        if not isinstance(ax, SInclusion):
            continue
        for n, kind in _surface_sig(ax):
            (concepts if kind == "c" else roles).add(n)
    t = TBox(frozenset(out), Signature(concepts | set(registry), roles, base.views), registry)
    return t


def _contains(c, cls):
    if isinstance(c, cls):
        return True
    for attr in ("args",):
        if hasattr(c, attr):
            return any(_contains(a, cls) for a in getattr(c, attr))
    f = getattr(c, "filler", None)
    return f is not None and _contains(f, cls)


def _surface_sig(ax):
    out = []

    def walk(c):
        if isinstance(c, SName):
            out.append((c.name, "c"))
        elif isinstance(c, (SAnd, SOr)):
            for a in c.args:
                walk(a)
        elif isinstance(c, (SExists, SForall, SAtMost1)):
            out.append((c.role.base, "r"))
            if c.filler is not None:
                walk(c.filler)
    walk(ax.lhs)
    walk(ax.rhs)
    return out


def _surface_names(ax):
    if isinstance(ax, SInclusion):
        return {n for n, _ in _surface_sig(ax)}
    if isinstance(ax, CI):
        return ax.names() | ax.roles()
    if isinstance(ax, (RI, RoleDisjoint)):
        return ax.roles()
    return set()


def _surface_str(c):
    if isinstance(c, SInclusion):
        return f"{_surface_str(c.lhs)} <= {_surface_str(c.rhs)}"
    if isinstance(c, SName):
        return c.name
    if isinstance(c, STop):
        return "top"
    if isinstance(c, SBot):
        return "bot"
    if isinstance(c, SAnd):
        return " & ".join(_wrap(a) for a in c.args)
    if isinstance(c, SOr):
        return " or ".join(_wrap(a) for a in c.args)
    kw = {SExists: "exists", SForall: "forall", SAtMost1: "atmost1"}[type(c)]
    if c.filler is None:
        return f"{kw} {c.role}"
    return f"{kw} {c.role} . {_wrap(c.filler)}"


def _wrap(c):
    s = _surface_str(c)
    return f"({s})" if isinstance(c, (SAnd, SOr)) else s


# ---------------------------------------------------------------------------
# entailment


class Reasoner:
    """Chase-based entailment with a per-ABox cache.

    The depth budget defaults to |sig| * (fresh roles + 1), capped.
    Checks that hit the budget without blocking are recorded in `unknown`.
    """

    def __init__(self, t, cap=DEFAULT_ENTAIL_CAP, depth=None):
        self.tbox = t
        self.rules = compile_rules(t)
        fresh_roles = sum(1 for n in getattr(t, "fresh_registry", {}) if n in t.sig.roles)
        budget = depth if depth is not None else len(t.sig) * (fresh_roles + 1)
        self.max_depth = max(1, min(budget, cap))
        self.cache = {}
        self.unknown = []

    def chase_abox(self, concepts=(), roles=(), individuals=(ROOT,)):
        key = (frozenset(concepts), frozenset(roles), frozenset(individuals))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        abox = ABox()
        for name, c in concepts:
            abox.add_concept(name, c)
        for name, c, d in roles:
            abox.add_role(name, c, d)
        ch = Chase(self.rules, abox, individuals, blocking=True)
        complete = False
        for d in range(1, self.max_depth + 1):
            ch.run(d)
            if ch.inconsistent or not ch.truncated or ch.is_blocked():
                complete = True
                break
        self.cache[key] = (ch, complete)
        return ch, complete

    def root(self, lhs):
        return self.chase_abox([(n, ROOT) for n in lhs])

    def _result(self, holds, complete, what):
        if holds:
            return True
        if not complete:
            self.unknown.append(what)
            log.warning("entailment check undecided within depth %d: %s", self.max_depth, what)
        return False

    def _check_names(self, names, roles=()):
        sig = self.tbox.sig
        bad = [n for n in names if n not in sig.concepts] + [r for r in roles if r not in sig.roles]
        if bad:
            raise ValidationError(f"names outside the signature: {sorted(bad)}")

    def entails(self, ax):
        if isinstance(ax, CI):
            return self._entails_ci(ax)
        if isinstance(ax, RI):
            self._check_names((), (ax.sub.base, ax.sup.base))
            ch, complete = self.chase_abox(roles=[_edge(ax.sub, ROOT, "b")], individuals=(ROOT, "b"))
            return self._result(ch.inconsistent or "b" in ch.neighbours(ROOT, ax.sup), complete, str(ax))
        if isinstance(ax, RoleDisjoint):
            self._check_names((), (ax.r1.base, ax.r2.base))
            ch, complete = self.chase_abox(roles=[_edge(ax.r1, ROOT, "b"), _edge(ax.r2, ROOT, "b")],
                                           individuals=(ROOT, "b"))
            return self._result(ch.inconsistent, complete, str(ax))
        if isinstance(ax, DLInclusion):
            ch, complete = self.chase_abox(*_basic_abox([ax.lhs]))
            return self._result(ch.inconsistent or _basic_holds(ch, ax.rhs), complete, str(ax))
        if isinstance(ax, DLDisjoint):
            ch, complete = self.chase_abox(*_basic_abox([ax.b1, ax.b2]))
            return self._result(ch.inconsistent, complete, str(ax))
        raise ValidationError(f"cannot decide entailment of {ax!r}")

    def _entails_ci(self, ci):
        r = ci.rhs
        self._check_names(ci.names(), ci.roles())
        concepts = [(n, ROOT) for n in ci.lhs]
        if isinstance(r, (Atom, Bottom, Exists)):
            ch, complete = self.chase_abox(concepts)
            if ch.inconsistent:
                return True
            if isinstance(r, Atom):
                holds = r.name in ch.types[ROOT]
            elif isinstance(r, Bottom):
                holds = False
            else:
                holds = any(set(r.filler) <= ch.types[y] for y in ch.neighbours(ROOT, r.role))
            return self._result(holds, complete, str(ci))
        if isinstance(r, Forall):
            # counter-witness b: an r-neighbour of the root
            ch, complete = self.chase_abox(concepts, [_edge(r.role, ROOT, "b")], (ROOT, "b"))
            return self._result(ch.inconsistent or r.filler in ch.types["b"], complete, str(ci))
        if isinstance(r, AtMost1):
            extra = [] if r.filler is None else [(r.filler, "b1"), (r.filler, "b2")]
            ch, complete = self.chase_abox(concepts + extra,
                                           [_edge(r.role, ROOT, "b1"), _edge(r.role, ROOT, "b2")],
                                           (ROOT, "b1", "b2"))
            return self._result(ch.inconsistent, complete, str(ci))
        raise ValidationError(f"unknown concept {r!r}")


def _edge(role, x, y):
    return (role.base, y, x) if role.inverted else (role.base, x, y)


def _basic_abox(basics):
    concepts, roles, inds = [], [], [ROOT]
    for i, b in enumerate(basics):
        if isinstance(b, str):
            concepts.append((b, ROOT))
        else:
            w = f"b{i}"
            inds.append(w)
            roles.append(_edge(b.role, ROOT, w))
    return concepts, roles, tuple(inds)


def _basic_holds(ch, b):
    if isinstance(b, str):
        return b in ch.types[ROOT]
    return bool(ch.neighbours(ROOT, b.role))


def entails_ci(t, ci, reasoner=None):
    """t ⊨ ci, for a CI (also accepts role and DL-Lite axioms)."""
    if not isinstance(ci, (CI, RI, RoleDisjoint, DLInclusion, DLDisjoint)):
        raise ValidationError(f"not an axiom: {ci!r}")
    r = reasoner if reasoner is not None else Reasoner(t)
    return r.entails(ci)


# ---------------------------------------------------------------------------
# Step 1


def _lhs_candidates(t, max_lhs):
    concepts = sorted(t.sig.concepts)
    top = min(max_lhs, len(concepts))
    for size in range(0, top + 1):
        for lhs in combinations(concepts, size):
            yield frozenset(lhs)


def is_exhaustive(t, max_lhs):
    # without existentials the chase of a named ABox stays on named elements,
    # so Step 1 and the completion add nothing for any lhs size
    if not any(isinstance(a, CI) and isinstance(a.rhs, Exists) for a in t.axioms):
        return True
    return max_lhs >= len(t.sig.concepts)


def _all_roles(t):
    return [Role(p, inv) for p in sorted(t.sig.roles) for inv in (False, True)]


def _maximal(sets):
    uniq = set(sets)
    return sorted((s for s in uniq if not any(s < o for o in uniq)), key=lambda s: sorted(s))


def saturate_existential_cis(t, max_lhs=DEFAULT_MAX_LHS, reasoner=None):
    """Add every entailed ⊓Aᵢ ⊑ ∃R.(⊓A′ⱼ) with |lhs| <= max_lhs.

    One CI per maximal entailed filler set of each (lhs, R). Candidates
    subsumed by a present CI (smaller lhs, larger filler) are skipped.
    """
    if max_lhs < 1:
        raise ValidationError("max_lhs must be positive")
    r = reasoner if reasoner is not None else Reasoner(t)
    concepts = t.sig.concepts
    ex = [a for a in t.axioms if isinstance(a, CI) and isinstance(a.rhs, Exists)]
    added = []
    for lhs in _lhs_candidates(t, max_lhs):
        ch, complete = r.root(lhs)
        if ch.inconsistent:
            continue
        if not complete:
            r.unknown.append(f"existential fillers of {'&'.join(sorted(lhs)) or 'top'}")
        for role in _all_roles(t):
            fillers = [frozenset(ch.types[y] & concepts) for y in ch.neighbours(ROOT, role)]
            for f in _maximal(fillers):
                if any(a.lhs <= lhs and a.rhs.role == role and set(a.rhs.filler) >= f for a in ex):
                    continue
                ci = CI(lhs, Exists(role, tuple(f)))
                ex.append(ci)
                added.append(ci)
    return t.with_axioms(set(t.axioms) | set(added))


def _closure(lhs, atomic):
    cur = set(lhs)
    changed = True
    while changed:
        changed = False
        for a in atomic:
            if a.lhs <= cur:
                key = "__bot" if isinstance(a.rhs, Bottom) else a.rhs.name
                if key not in cur:
                    cur.add(key)
                    changed = True
    return cur


def saturate_atomic_cis(t, max_lhs=DEFAULT_MAX_LHS, reasoner=None):
    """Add entailed ⊓Aᵢ ⊑ B and ⊓Aᵢ ⊑ ⊥ not derivable on a single element.

    These capture consequences that reach a named individual only through
    anonymous elements, which the Datalog translation cannot see otherwise.
    """
    r = reasoner if reasoner is not None else Reasoner(t)
    atomic = [a for a in t.axioms if isinstance(a, CI) and isinstance(a.rhs, (Atom, Bottom))]
    added = []
    for lhs in _lhs_candidates(t, max_lhs):
        ch, complete = r.root(lhs)
        have = _closure(lhs, atomic)
        if "__bot" in have:
            continue
        if ch.inconsistent:
            new = [CI(lhs, Bottom())]
        else:
            new = [CI(lhs, Atom(n)) for n in sorted(ch.types[ROOT] - have)]
        atomic.extend(new)
        added.extend(new)
    return t.with_axioms(set(t.axioms) | set(added))


# ---------------------------------------------------------------------------
# Steps 2 and 3


def _lhs_hash(lhs):
    return hashlib.sha1("&".join(sorted(lhs)).encode()).hexdigest()[:6]


def norm_exists(t):
    """Replace ⊓Aᵢ ⊑ ∃R.(⊓A′ⱼ) by ⊓Aᵢ ⊑ ∃P, P ⊑ R and ∃P⁻ ⊑ A′ⱼ for a fresh P."""
    keep, todo = [], []
    for a in t.sorted_axioms():
        if isinstance(a, CI) and isinstance(a.rhs, Exists) and a.rhs.filler:
            todo.append(a)
        else:
            keep.append(a)
    used = set(t.sig.concepts) | set(t.sig.roles)
    registry, new_roles = {}, []
    k = 0
    for a in todo:
        k += 1
        name = f"_R{k}__{_lhs_hash(a.lhs)}"
        while name in used:
            k += 1
            name = f"_R{k}__{_lhs_hash(a.lhs)}"
        used.add(name)
        p = Role(name)
        registry[name] = str(a)
        new_roles.append(name)
        keep.append(CI(a.lhs, Exists(p)))
        keep.append(RI(p, a.rhs.role))
        for f in a.rhs.filler:
            keep.append(CI(frozenset(), Forall(p, f)))
    return t.with_axioms(keep, extra_roles=new_roles, registry=registry)


def and_name(lhs):
    return "_AND__" + "_".join(sorted(lhs))


def norm_and(t):
    """Add A_{A1⊓…⊓An} ≡ A1 ⊓ … ⊓ An for every conjunctive lhs."""
    conj = sorted({a.lhs for a in t.axioms if isinstance(a, CI) and len(a.lhs) >= 2}, key=lambda s: sorted(s))
    used = set(t.sig.concepts) | set(t.sig.roles)
    axioms = set(t.axioms)
    registry, names = {}, []
    for lhs in conj:
        name = and_name(lhs)
        if name in used and t.fresh_registry.get(name) != lhs:
            raise ValidationError(f"generated name {name} collides with an existing name")
        registry[name] = lhs
        names.append(name)
        axioms.add(CI(lhs, Atom(name)))
        for n in lhs:
            axioms.add(CI(frozenset([name]), Atom(n)))
    return t.with_axioms(axioms, extra_concepts=names, registry=registry)


# ---------------------------------------------------------------------------
# Step 4


def _basics(t):
    return sorted(t.sig.concepts) + [ExistsRole(r) for r in _all_roles(t)]


def dllite_closure(t3, reasoner=None, names=None):
    """All DL-Lite_R axioms over the signature entailed by t3, trivia N ⊑ N included.

    `names` restricts the candidate signature (used by the LSA baseline).
    """
    r = reasoner if reasoner is not None else Reasoner(t3)
    sig = t3.sig if names is None else names
    view = TBox(frozenset(), Signature(sig.concepts, sig.roles))
    basics = _basics(view)
    out = set()
    unsat = set()
    for b1 in basics:
        concepts, roles, inds = _basic_abox([b1])
        ch, complete = r.chase_abox(concepts, roles, inds)
        if ch.inconsistent:
            unsat.add(b1)
            out.add(DLDisjoint(b1, b1))
            for b2 in basics:
                if b2 != b1 or isinstance(b1, str):
                    out.add(DLInclusion(b1, b2))
                out.add(DLDisjoint(b1, b2))
            continue
        for b2 in basics:
            if b2 == b1:
                if isinstance(b1, str):
                    out.add(DLInclusion(b1, b1))
                continue
            if _basic_holds(ch, b2):
                out.add(DLInclusion(b1, b2))
            elif not complete:
                r._result(False, False, str(DLInclusion(b1, b2)))
    if r.rules.has_bottom:
        for i, b1 in enumerate(basics):
            for b2 in basics[i + 1:]:
                if b1 in unsat or b2 in unsat:
                    continue
                if r.entails(DLDisjoint(b1, b2)):
                    out.add(DLDisjoint(b1, b2))
    roles = [Role(p) for p in sorted(sig.roles)]
    all_roles = _all_roles(view)
    for r1 in roles:
        ch, complete = r.chase_abox(roles=[_edge(r1, ROOT, "b")], individuals=(ROOT, "b"))
        for r2 in all_roles:
            if ch.inconsistent or "b" in ch.neighbours(ROOT, r2):
                out.add(RI(r1, r2))
            if ch.inconsistent:
                out.add(RoleDisjoint(r1, r2))
    if r.rules.has_bottom:
        for r1 in roles:
            for r2 in all_roles:
                if r.entails(RoleDisjoint(r1, r2)):
                    out.add(RoleDisjoint(r1, r2))
    return DLLiteTBox(frozenset(out), Signature(sig.concepts, sig.roles))
