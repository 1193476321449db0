"""Horn-ALCHIQ and DL-Lite_R syntax objects.

Everything here is immutable and hashable. Concept and role names are plain
strings; a concept conjunction on the left of an inclusion is a frozenset of
names, the empty set standing for top.
"""

import re
from dataclasses import dataclass, field

from .errors import ValidationError

NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


def check_name(name, what="name"):
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise ValidationError(f"invalid {what} {name!r}")
    return name


@dataclass(frozen=True, order=True)
class Role:
    base: str
    inverted: bool = False

    def inverse(self):
        return Role(self.base, not self.inverted)

    def __str__(self):
        return f"inv({self.base})" if self.inverted else self.base


@dataclass(frozen=True)
class Bottom:
    def __str__(self):
        return "bot"


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        return self.name


def _filler_str(filler):
    if len(filler) == 1:
        return filler[0]
    return "(" + " & ".join(filler) + ")"


@dataclass(frozen=True)
class Exists:
    """Qualified existential. `filler` is a sorted tuple of concept names.

    The empty tuple is top. Normal form only allows length <= 1; longer
    fillers exist transiently between Step 1 and Step 2 of the rewriting.
    """
    role: Role
    filler: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "filler", tuple(sorted(set(self.filler))))

    def __str__(self):
        if not self.filler:
            return f"exists {self.role}"
        return f"exists {self.role} . {_filler_str(self.filler)}"


@dataclass(frozen=True)
class Forall:
    role: Role
    filler: str

    def __str__(self):
        return f"forall {self.role} . {self.filler}"


@dataclass(frozen=True)
class AtMost1:
    role: Role
    filler: str = None  # None is top

    def __str__(self):
        if self.filler is None:
            return f"atmost1 {self.role}"
        return f"atmost1 {self.role} . {self.filler}"


def lhs_str(lhs):
    if not lhs:
        return "top"
    return " & ".join(sorted(lhs))


@dataclass(frozen=True)
class CI:
    lhs: frozenset
    rhs: object

    def __post_init__(self):
        object.__setattr__(self, "lhs", frozenset(self.lhs))

    def names(self):
        out = set(self.lhs)
        r = self.rhs
        if isinstance(r, Atom):
            out.add(r.name)
        elif isinstance(r, Exists):
            out.update(r.filler)
        elif isinstance(r, (Forall, AtMost1)) and r.filler is not None:
            out.add(r.filler)
        return out

    def roles(self):
        r = self.rhs
        if isinstance(r, (Exists, Forall, AtMost1)):
            return {r.role.base}
        return set()

    def __str__(self):
        return f"{lhs_str(self.lhs)} <= {self.rhs}"


def canonical_ri(sub, sup):
    # R1 <= R2 and inv(R1) <= inv(R2) are the same axiom
    if sub.inverted:
        return sub.inverse(), sup.inverse()
    return sub, sup


@dataclass(frozen=True)
class RI:
    sub: Role
    sup: Role

    def __post_init__(self):
        sub, sup = canonical_ri(self.sub, self.sup)
        object.__setattr__(self, "sub", sub)
        object.__setattr__(self, "sup", sup)

    def names(self):
        return set()

    def roles(self):
        return {self.sub.base, self.sup.base}

    def __str__(self):
        return f"{self.sub} <= {self.sup}"


@dataclass(frozen=True)
class RoleDisjoint:
    r1: Role
    r2: Role

    def __post_init__(self):
        a, b = self.r1, self.r2
        forms = [(a, b), (b, a), (a.inverse(), b.inverse()), (b.inverse(), a.inverse())]
        a, b = min(forms, key=lambda p: ((p[0].inverted, p[0].base), (p[1].inverted, p[1].base)))
        object.__setattr__(self, "r1", a)
        object.__setattr__(self, "r2", b)

    def names(self):
        return set()

    def roles(self):
        return {self.r1.base, self.r2.base}

    def __str__(self):
        return f"{self.r1} & {self.r2} <= bot"


# DL-Lite_R basic concepts: a concept name (str) or ExistsRole


@dataclass(frozen=True, order=True)
class ExistsRole:
    role: Role

    def __str__(self):
        return f"exists {self.role}"


def basic_key(b):
    if isinstance(b, str):
        return (0, b, False)
    return (1, b.role.base, b.role.inverted)


@dataclass(frozen=True)
class DLInclusion:
    lhs: object
    rhs: object

    def __str__(self):
        return f"{self.lhs} <= {self.rhs}"


@dataclass(frozen=True)
class DLDisjoint:
    b1: object
    b2: object

    def __post_init__(self):
        if basic_key(self.b2) < basic_key(self.b1):
            b1, b2 = self.b2, self.b1
            object.__setattr__(self, "b1", b1)
            object.__setattr__(self, "b2", b2)

    def __str__(self):
        if self.b1 == self.b2:
            return f"{self.b1} <= bot"
        return f"{self.b1} & {self.b2} <= bot"


def is_dllite(ax):
    """Membership test against the DL-Lite_R grammar."""
    basic = lambda b: isinstance(b, (str, ExistsRole))
    if isinstance(ax, DLInclusion):
        return basic(ax.lhs) and basic(ax.rhs)
    if isinstance(ax, DLDisjoint):
        return basic(ax.b1) and basic(ax.b2)
    if isinstance(ax, (RI, RoleDisjoint)):
        return True
    if isinstance(ax, CI):
        r = ax.rhs
        if len(ax.lhs) == 1 and isinstance(r, Atom):
            return True
        if len(ax.lhs) == 1 and isinstance(r, Exists) and not r.filler:
            return True
        if 1 <= len(ax.lhs) <= 2 and isinstance(r, Bottom):
            return True
    return False


def is_normal(ax):
    if isinstance(ax, CI):
        r = ax.rhs
        if isinstance(r, Exists):
            return len(r.filler) <= 1
        return isinstance(r, (Bottom, Atom, Forall, AtMost1))
    return isinstance(ax, (RI, RoleDisjoint))


@dataclass(frozen=True)
class Signature:
    concepts: frozenset = frozenset()
    roles: frozenset = frozenset()
    views: tuple = ()  # sorted (name, arity) pairs

    def __post_init__(self):
        object.__setattr__(self, "concepts", frozenset(self.concepts))
        object.__setattr__(self, "roles", frozenset(self.roles))
        views = self.views
        if isinstance(views, dict):
            views = views.items()
        object.__setattr__(self, "views", tuple(sorted(views)))
        for n in self.concepts:
            check_name(n, "concept name")
        for n in self.roles:
            check_name(n, "role name")
        for n, a in self.views:
            check_name(n, "view name")
            if a not in (1, 2):
                raise ValidationError(f"view {n} must have arity 1 or 2, got {a}")
        vnames = {n for n, _ in self.views}
        clash = (self.concepts & self.roles) | (self.concepts & vnames) | (self.roles & vnames)
        if clash:
            raise ValidationError(f"names used in more than one category: {sorted(clash)}")

    @property
    def view_arity(self):
        return dict(self.views)

    def union(self, other):
        views = dict(self.views)
        views.update(dict(other.views))
        return Signature(self.concepts | other.concepts, self.roles | other.roles, views)

    def __len__(self):
        return len(self.concepts) + len(self.roles)


def axioms_signature(axioms):
    concepts, roles = set(), set()
    for ax in axioms:
        if isinstance(ax, (DLInclusion, DLDisjoint)):
            for b in (getattr(ax, "lhs", None), getattr(ax, "rhs", None),
                      getattr(ax, "b1", None), getattr(ax, "b2", None)):
                if isinstance(b, str):
                    concepts.add(b)
                elif isinstance(b, ExistsRole):
                    roles.add(b.role.base)
            continue
        concepts |= ax.names()
        roles |= ax.roles()
    return concepts, roles


def sort_axioms(axioms):
    return sorted(axioms, key=lambda a: (type(a).__name__ not in ("CI", "DLInclusion", "DLDisjoint"), str(a)))


@dataclass
class TBox:
    axioms: frozenset
    sig: Signature = None
    fresh_registry: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axioms = frozenset(self.axioms)
        concepts, roles = axioms_signature(self.axioms)
        if self.sig is None:
            self.sig = Signature(concepts, roles)
        else:
            missing = (concepts - self.sig.concepts) | (roles - self.sig.roles)
            if missing:
                self.sig = Signature(self.sig.concepts | concepts, self.sig.roles | roles, self.sig.views)
        for name in self.fresh_registry:
            if name not in self.sig.concepts and name not in self.sig.roles:
                raise ValidationError(f"fresh name {name} not in signature")

    def sorted_axioms(self):
        return sort_axioms(self.axioms)

    def with_axioms(self, axioms, extra_concepts=(), extra_roles=(), registry=None):
        reg = dict(self.fresh_registry)
        if registry:
            reg.update(registry)
        sig = Signature(self.sig.concepts | set(extra_concepts), self.sig.roles | set(extra_roles), self.sig.views)
        return TBox(frozenset(axioms), sig, reg)

    def has_atmost(self):
        return any(isinstance(a, CI) and isinstance(a.rhs, AtMost1) for a in self.axioms)

    def __eq__(self, other):
        return isinstance(other, TBox) and self.axioms == other.axioms and self.sig == other.sig

    def __str__(self):
        return "\n".join(str(a) for a in self.sorted_axioms())


@dataclass
class DLLiteTBox:
    axioms: frozenset
    sig: Signature = None

    def __post_init__(self):
        self.axioms = frozenset(self.axioms)
        bad = [a for a in self.axioms if not is_dllite(a)]
        if bad:
            raise ValidationError(f"not a DL-Lite_R axiom: {bad[0]}")
        concepts, roles = axioms_signature(self.axioms)
        if self.sig is None:
            self.sig = Signature(concepts, roles)
        elif not (concepts <= self.sig.concepts and roles <= self.sig.roles):
            self.sig = Signature(self.sig.concepts | concepts, self.sig.roles | roles, self.sig.views)

    def sorted_axioms(self):
        return sort_axioms(self.axioms)

    def __eq__(self, other):
        return isinstance(other, DLLiteTBox) and self.axioms == other.axioms and self.sig == other.sig

    def __str__(self):
        return "\n".join(str(a) for a in self.sorted_axioms())
