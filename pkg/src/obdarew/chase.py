"""Depth-bounded chase building a fragment of the canonical model.

Existentials reuse an existing neighbour (successor or predecessor) when one
already satisfies them; otherwise a path element root·w_... is created.
AtMost1 merges elements, and merging two distinct named individuals makes
the knowledge base inconsistent (UNA).
"""

import heapq
from dataclasses import dataclass, field

from .syntax import (AtMost1, Atom, Bottom, CI, DLDisjoint, DLInclusion,
                     DLLiteTBox, Exists, ExistsRole, Forall, RI, Role,
                     RoleDisjoint, TBox)


@dataclass(frozen=True)
class PathElem:
    root: str
    steps: tuple

    @property
    def depth(self):
        return len(self.steps)

    def __str__(self):
        return self.root + "".join("·w_" + s for s in self.steps)

    def __repr__(self):
        return f"PathElem({self})"


def elem_key(e):
    if isinstance(e, str):
        return (0, e, ())
    return (1, e.root, e.steps)


@dataclass
class ABox:
    concepts: dict = field(default_factory=dict)  # name -> set of constants
    roles: dict = field(default_factory=dict)  # name -> set of (c, d)

    @property
    def ind(self):
        out = set()
        for s in self.concepts.values():
            out |= s
        for s in self.roles.values():
            for c, d in s:
                out.add(c)
                out.add(d)
        return out

    def add_concept(self, name, c):
        self.concepts.setdefault(name, set()).add(c)

    def add_role(self, name, c, d):
        self.roles.setdefault(name, set()).add((c, d))

    def facts(self):
        out = set()
        for n, s in self.concepts.items():
            out |= {(n, (c,)) for c in s}
        for n, s in self.roles.items():
            out |= {(n, p) for p in s}
        return out

    def restrict(self, concepts, roles):
        return ABox({n: set(s) for n, s in self.concepts.items() if n in concepts and s},
                    {n: set(s) for n, s in self.roles.items() if n in roles and s})

    def __eq__(self, other):
        return isinstance(other, ABox) and self.facts() == other.facts()

    def __len__(self):
        return len(self.facts())


class RuleSet:
    """TBox compiled to chase rules.

    concept rules are (lhs names, lhs roles, rhs); an lhs role R asks for some
    R-neighbour, which is how DL-Lite's ∃R on the left is handled.
    """

    def __init__(self, tbox):
        self.concept_rules = []
        ris = []
        self.disjoint_roles = []
        roles = set(tbox.sig.roles)
        for ax in tbox.sorted_axioms():
            if isinstance(ax, CI):
                self.concept_rules.append((frozenset(ax.lhs), frozenset(), ax.rhs))
            elif isinstance(ax, DLInclusion):
                names, rls = _basic_lhs(ax.lhs)
                rhs = Atom(ax.rhs) if isinstance(ax.rhs, str) else Exists(ax.rhs.role)
                self.concept_rules.append((names, rls, rhs))
            elif isinstance(ax, DLDisjoint):
                n1, r1 = _basic_lhs(ax.b1)
                n2, r2 = _basic_lhs(ax.b2)
                self.concept_rules.append((n1 | n2, r1 | r2, Bottom()))
            elif isinstance(ax, RI):
                ris.append((ax.sub, ax.sup))
            elif isinstance(ax, RoleDisjoint):
                self.disjoint_roles.append((ax.r1, ax.r2))
            roles |= {r.base for r in _roles_of(ax)}
        self.roles = sorted(roles)
        all_roles = [Role(p, inv) for p in self.roles for inv in (False, True)]
        sups = {r: {r} for r in all_roles}
        changed = True
        while changed:
            changed = False
            for sub, sup in ris:
                for a, b in ((sub, sup), (sub.inverse(), sup.inverse())):
                    for r in all_roles:
                        if a in sups[r] and b not in sups[r]:
                            sups[r].add(b)
                            changed = True
        self.sups = {r: sorted(s) for r, s in sups.items()}
        self.has_atmost = any(isinstance(r[2], AtMost1) for r in self.concept_rules)
        self.has_bottom = bool(self.disjoint_roles) or any(
            isinstance(r[2], (Bottom, AtMost1)) for r in self.concept_rules)


def _basic_lhs(b):
    if isinstance(b, str):
        return frozenset([b]), frozenset()
    return frozenset(), frozenset([b.role])


def _roles_of(ax):
    if isinstance(ax, CI) and isinstance(ax.rhs, (Exists, Forall, AtMost1)):
        return [ax.rhs.role]
    if isinstance(ax, RI):
        return [ax.sub, ax.sup]
    if isinstance(ax, RoleDisjoint):
        return [ax.r1, ax.r2]
    if isinstance(ax, DLInclusion):
        return [b.role for b in (ax.lhs, ax.rhs) if isinstance(b, ExistsRole)]
    if isinstance(ax, DLDisjoint):
        return [b.role for b in (ax.b1, ax.b2) if isinstance(b, ExistsRole)]
    return []


def compile_rules(t):
    if isinstance(t, RuleSet):
        return t
    if not isinstance(t, (TBox, DLLiteTBox)):
        raise TypeError(f"expected a TBox, got {type(t).__name__}")
    return RuleSet(t)


@dataclass
class ChaseModel:
    elements: list
    concepts: dict
    roles: dict
    depth: int
    saturated_at_depth: bool
    blocked: bool
    merges: dict
    inconsistent: bool

    @property
    def complete(self):
        """Named-individual facts are final (saturated, or cut only at blocked elements)."""
        return self.saturated_at_depth or self.blocked

    def named(self):
        return [e for e in self.elements if isinstance(e, str)]

    def type_of(self, e):
        return {a for a, ext in self.concepts.items() if e in ext}

    def find(self, e):
        while e in self.merges:
            e = self.merges[e]
        return e


class Chase:
    """Incremental chase; `run(depth)` can be called with growing depths."""

    def __init__(self, tbox, abox, individuals=(), blocking=False):
        self.rules = compile_rules(tbox)
        # dynamic pairwise blocking; not combined with at-most merging
        self.blocking = blocking and not self.rules.has_atmost
        self.blocked = set()
        self.types = {}
        self.depth = {}
        self.parent = {}
        self.order = []
        self.out = {}
        self.inn = {}
        self.merged = {}
        self.inconsistent = False
        self.limit = 0
        self.truncated = set()
        self.any_merge = False
        self._pos = {}
        self._heap = []
        self._queued = set()
        for c in sorted(set(abox.ind) | set(individuals), key=elem_key):
            self._new(c, 0, None)
        for name in sorted(abox.concepts):
            for c in sorted(abox.concepts[name], key=elem_key):
                self.types[c].add(name)
        for name in sorted(abox.roles):
            for c, d in sorted(abox.roles[name], key=lambda p: (elem_key(p[0]), elem_key(p[1]))):
                self._add_role(Role(name), c, d)

    def _new(self, e, depth, parent):
        self.types[e] = set()
        self.depth[e] = depth
        self.parent[e] = parent
        self.out[e] = {}
        self.inn[e] = {}
        self._pos[e] = len(self.order)
        self.order.append(e)
        self._touch(e)

    def _add_role(self, role, x, y):
        added = False
        for s in self.rules.sups.get(role, [role]):
            a, b = (y, x) if s.inverted else (x, y)
            succ = self.out[a].setdefault(s.base, set())
            if b not in succ:
                succ.add(b)
                self.inn[b].setdefault(s.base, set()).add(a)
                self._touch(a)
                self._touch(b)
                added = True
        return added

    def neighbours(self, e, role):
        side = self.inn[e] if role.inverted else self.out[e]
        return side.get(role.base, ())

    def _holds_lhs(self, e, names, roles):
        ty = self.types[e]
        if not names <= ty:
            return False
        return all(self.neighbours(e, r) for r in roles)

    def _live(self):
        return [e for e in self.order if e not in self.merged]

    def _merge(self, x, y):
        """Merge y into x (or the other way round) after an AtMost1 clash."""
        self.any_merge = True
        named_x, named_y = isinstance(x, str), isinstance(y, str)
        if named_x and named_y:
            self.inconsistent = True
            return
        if named_y or (not named_x and self._pos[y] < self._pos[x]):
            x, y = y, x
        self.merged[y] = x
        self.types[x] |= self.types[y]
        self._touch(x)
        self.depth[x] = min(self.depth[x], self.depth[y])
        for p, succ in list(self.out[y].items()):
            for z in list(succ):
                self.inn[z][p].discard(y)
                z2 = x if z == y else z
                self.out[x].setdefault(p, set()).add(z2)
                self.inn[z2].setdefault(p, set()).add(x)
        for p, pred in list(self.inn[y].items()):
            for z in list(pred):
                if z == y:
                    continue
                self.out[z][p].discard(y)
                self.out[z].setdefault(p, set()).add(x)
                self.inn[x].setdefault(p, set()).add(z)
        self.out[y] = {}
        self.inn[y] = {}
        for e, par in list(self.parent.items()):
            if par == y:
                self.parent[e] = x
        self._touch_neighbours(x)

    def _touch(self, e):
        """Queue e for rule application."""
        i = self._pos[e]
        if i not in self._queued:
            self._queued.add(i)
            heapq.heappush(self._heap, i)

    def _touch_neighbours(self, e):
        for side in (self.out[e], self.inn[e]):
            for ys in side.values():
                for y in ys:
                    self._touch(y)

    def _type_changed(self, e):
        self._touch(e)
        if self.rules.has_atmost:
            # at-most rules of the neighbours read this element's type
            self._touch_neighbours(e)

    def _saturate(self):
        """Apply concept rules to queued elements until nothing changes."""
        rules = self.rules
        while self._heap and not self.inconsistent:
            i = heapq.heappop(self._heap)
            self._queued.discard(i)
            e = self.order[i]
            if e in self.merged:
                continue
            ty = self.types[e]
            start = len(ty)
            while True:
                n0 = len(ty)
                for names, rls, rhs in rules.concept_rules:
                    if not names <= ty or not all(self.neighbours(e, r) for r in rls):
                        continue
                    if isinstance(rhs, Atom):
                        ty.add(rhs.name)
                    elif isinstance(rhs, Bottom):
                        self.inconsistent = True
                        return
                    elif isinstance(rhs, Forall):
                        for y in self.neighbours(e, rhs.role):
                            if rhs.filler not in self.types[y]:
                                self.types[y].add(rhs.filler)
                                self._type_changed(y)
                    elif isinstance(rhs, AtMost1):
                        ys = sorted((y for y in self.neighbours(e, rhs.role)
                                     if rhs.filler is None or rhs.filler in self.types[y]),
                                    key=self._pos.__getitem__)
                        if len(ys) > 1:
                            self._merge(ys[0], ys[1])
                            if self.inconsistent:
                                return
                            break
                if e in self.merged or len(ty) == n0:
                    break
            if e not in self.merged and len(ty) != start and rules.has_atmost:
                self._touch_neighbours(e)
        for r1, r2 in rules.disjoint_roles:
            for e in self._live():
                if set(self.neighbours(e, r1)) & set(self.neighbours(e, r2)):
                    self.inconsistent = True
                    return

    def _unsatisfied(self, e):
        out = []
        for names, rls, rhs in self.rules.concept_rules:
            if isinstance(rhs, Exists) and self._holds_lhs(e, names, rls):
                need = set(rhs.filler)
                if not any(need <= self.types[y] for y in self.neighbours(e, rhs.role)):
                    out.append(rhs)
        return out

    def _blocked_set(self):
        """Anywhere pairwise blocking.

        An element is blocked when an earlier unblocked element has the same
        type, parent type and incoming roles, or when its parent is blocked.
        """
        seen = set()
        out = set()
        for e in sorted(self._live(), key=self._pos.__getitem__):
            if isinstance(e, str):
                continue
            p = self.parent[e]
            if p in out:
                out.add(e)
                continue
            key = (frozenset(self.types[e]), frozenset(self.types[p]), self._incoming(e))
            if key in seen:
                out.add(e)
            else:
                seen.add(key)
        return out

    def _generate(self):
        made = False
        self.truncated = set()
        self.blocked = self._blocked_set() if self.blocking else set()
        for e in self._live():
            if e in self.blocked:
                continue
            for rhs in self._unsatisfied(e):
                # an earlier child created in this pass may already serve
                if any(set(rhs.filler) <= self.types[y] for y in self.neighbours(e, rhs.role)):
                    continue
                if self.depth[e] >= self.limit:
                    self.truncated.add(e)
                    continue
                step = f"{rhs.role}" + ("." + "&".join(rhs.filler) if rhs.filler else "")
                if isinstance(e, str):
                    child = PathElem(e, (step,))
                else:
                    child = PathElem(e.root, e.steps + (step,))
                while child in self.types:
                    child = PathElem(child.root, child.steps[:-1] + (child.steps[-1] + "'",))
                self._new(child, self.depth[e] + 1, e)
                self.types[child] |= set(rhs.filler)
                self._add_role(rhs.role, e, child)
                made = True
        return made

    def run(self, depth):
        self.limit = max(self.limit, depth)
        while not self.inconsistent:
            self._saturate()
            if self.inconsistent:
                break
            if not self._generate():
                break
        return self

    def _incoming(self, e):
        p = self.parent[e]
        out = set()
        for base, succ in self.out[p].items():
            if e in succ:
                out.add(Role(base))
        for base, pred in self.inn[p].items():
            if e in pred:
                out.add(Role(base, True))
        return frozenset(out)

    def is_blocked(self):
        """Every cut-off element has an ancestor with the same type pair.

        Pairwise blocking: same type, same parent type, same incoming roles.
        Unravelling the blocked subtree then yields a model, so facts on the
        elements already present are final.
        """
        if self.inconsistent or self.any_merge:
            return False
        for e in self.truncated:
            if isinstance(e, str) or self.parent.get(e) is None:
                return False
            pe = self.parent[e]
            key = (frozenset(self.types[e]), frozenset(self.types[pe]), self._incoming(e))
            v = pe
            found = False
            while not isinstance(v, str) and self.parent.get(v) is not None:
                pv = self.parent[v]
                if (frozenset(self.types[v]), frozenset(self.types[pv]), self._incoming(v)) == key:
                    found = True
                    break
                v = pv
            if not found:
                return False
        return True

    def model(self):
        elements = self._live()
        concepts, roles = {}, {}
        for e in elements:
            for a in self.types[e]:
                concepts.setdefault(a, set()).add(e)
            for p, succ in self.out[e].items():
                for y in succ:
                    roles.setdefault(p, set()).add((e, y))
        return ChaseModel(
            elements=elements,
            concepts=concepts,
            roles=roles,
            depth=self.limit,
            saturated_at_depth=not self.inconsistent and not self.truncated and not self.blocked,
            blocked=(not self.truncated and bool(self.blocked)) if self.blocking else self.is_blocked(),
            merges=dict(self.merged),
            inconsistent=self.inconsistent,
        )


def chase(t, a, depth, individuals=()):
    """Chase `a` under `t`, generating path elements up to length `depth`."""
    return Chase(t, a, individuals).run(depth).model()
