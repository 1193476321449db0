"""Line-oriented text formats: TBoxes, mappings, facts, queries, schemas,
low-level view definitions and oracle answer files.

Every parser raises ValidationError with a `line:col` prefix. Serializers
emit the same grammar, so parse(serialize(x)) == x.
"""

import csv
import re
from pathlib import Path

from .datalog import CQne, DatalogAtom, FactSet, Mapping, MappingAssertion
from .dl import (SAnd, SAtMost1, SBot, SExists, SForall, SInclusion, SName, SOr,
                 STop, normalize_structural)
from .errors import ValidationError
from .expansion import Bounded, FileOracle, Unknown
from .syntax import (DLDisjoint, DLInclusion, DLLiteTBox, ExistsRole, RI, Role,
                     RoleDisjoint, Signature)

KEYWORDS = {"top", "bot", "exists", "forall", "atmost1", "inv", "or", "concept", "role"}

_TOKEN = re.compile(r"\s*(?:(<=|:-|!=|:=)|([A-Za-z0-9_]+)|('[^']*')|(\S))")


class Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Tok({self.kind}, {self.text!r})"


def _err(line, col, msg):
    return ValidationError(f"{line}:{col}: {msg}")


def tokenize(text, line=1):
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        op, name, quoted, other = m.groups()
        col = m.start(m.lastindex) + 1
        if op:
            out.append(Tok("op", op, line, col))
        elif name:
            out.append(Tok("name", name, line, col))
        elif quoted:
            out.append(Tok("name", quoted[1:-1], line, col))
        else:
            out.append(Tok("op", other, line, col))
        pos = m.end()
    out.append(Tok("eol", "", line, len(text) + 1))
    return out


def _strip_comment(s):
    i = s.find("#")
    return s if i < 0 else s[:i]


def _lines(text):
    for i, raw in enumerate(text.splitlines(), 1):
        s = _strip_comment(raw)
        if s.strip():
            yield i, s


class Cursor:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    @property
    def cur(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text):
        return self.cur.kind != "eol" and self.cur.text == text

    def take(self):
        t = self.cur
        if t.kind != "eol":
            self.i += 1
        return t

    def expect(self, text):
        t = self.cur
        if t.text != text or t.kind == "eol":
            raise _err(t.line, t.col, f"expected {text!r}, found {t.text or 'end of line'!r}")
        return self.take()

    def name(self, what="name"):
        t = self.cur
        if t.kind != "name" or t.text in KEYWORDS:
            raise _err(t.line, t.col, f"expected {what}, found {t.text or 'end of line'!r}")
        return self.take().text

    def end(self):
        t = self.cur
        if t.kind != "eol":
            raise _err(t.line, t.col, f"unexpected {t.text!r}")


def _check_user(name, tok, allow_fresh):
    if not allow_fresh and not name[0].isalpha():
        raise _err(tok.line, tok.col, f"identifier {name!r} must start with a letter (leading '_' and digits are reserved)")


# ---------------------------------------------------------------------------
# TBox


def _role(c):
    if c.at("inv"):
        c.take()
        c.expect("(")
        base = c.name("role name")
        c.expect(")")
        return Role(base, True)
    return Role(c.name("role name"))


def _concept(c):
    args = [_conj(c)]
    while c.at("or"):
        c.take()
        args.append(_conj(c))
    return args[0] if len(args) == 1 else SOr(tuple(args))


def _conj(c):
    args = [_unary(c)]
    while c.at("&"):
        c.take()
        args.append(_unary(c))
    return args[0] if len(args) == 1 else SAnd(tuple(args))


def _unary(c):
    t = c.cur
    if c.at("top"):
        c.take()
        return STop()
    if c.at("bot"):
        c.take()
        return SBot()
    if c.at("("):
        c.take()
        inner = _concept(c)
        c.expect(")")
        return inner
    for kw, cls in (("exists", SExists), ("forall", SForall), ("atmost1", SAtMost1)):
        if c.at(kw):
            c.take()
            r = _role(c)
            if c.at("."):
                c.take()
                return cls(r, _unary(c))
            if cls is SForall:
                raise _err(c.cur.line, c.cur.col, "forall needs a filler: forall R . C")
            return cls(r)
    if t.kind == "name" and t.text not in KEYWORDS:
        return SName(c.take().text)
    raise _err(t.line, t.col, f"expected a concept, found {t.text or 'end of line'!r}")


def _scan_roles(toks):
    """Names used in role position on this line."""
    out = []
    for i, t in enumerate(toks):
        if t.text in ("exists", "forall", "atmost1", "inv") and t.kind == "name":
            j = i + 2 if t.text == "inv" else i + 1
            if toks[j].text == "inv":
                continue
            if toks[j].kind == "name" and toks[j].text not in KEYWORDS:
                out.append(toks[j])
    return out


def _is_role_expr(c, roles):
    t = c.cur
    if t.text == "inv" and c.peek().text == "(":
        return True
    return t.kind == "name" and t.text in roles


def _parse_lines(text):
    """Shared first pass: tokens per line, declared names, role-position names."""
    lines = []
    decl = {"concept": {}, "role": {}}
    used_roles = {}
    for no, s in _lines(text):
        toks = tokenize(s, no)
        first = toks[0]
        if first.text in ("concept", "role") and not any(t.text == "<=" for t in toks):
            c = Cursor(toks[1:])
            while c.cur.kind != "eol":
                tok = c.cur
                decl[first.text].setdefault(c.name(f"{first.text} name"), tok)
            continue
        for t in _scan_roles(toks):
            used_roles.setdefault(t.text, t)
        lines.append(toks)
    return lines, decl, used_roles


def _parse_axioms(text, allow_fresh):
    lines, decl, used_roles = _parse_lines(text)
    roles = dict(decl["role"])
    for n, t in used_roles.items():
        roles.setdefault(n, t)
    surface, where = [], []
    concept_use = dict(decl["concept"])
    for toks in lines:
        where.append(toks[0])
        c = Cursor(toks)
        if _is_role_expr(c, roles):
            r1 = _role(c)
            if c.at("&"):
                c.take()
                r2 = _role(c)
                c.expect("<=")
                c.expect("bot")
                c.end()
                surface.append(RoleDisjoint(r1, r2))
            else:
                c.expect("<=")
                if not _is_role_expr(c, roles):
                    t = c.cur
                    raise _err(t.line, t.col, f"role {r1} included in non-role {t.text!r}")
                r2 = _role(c)
                c.end()
                surface.append(RI(r1, r2))
            continue
        lhs = _concept(c)
        c.expect("<=")
        rhs = _concept(c)
        c.end()
        surface.append(SInclusion(lhs, rhs))
        for t in toks:
            if t.kind == "name" and t.text not in KEYWORDS and t.text not in roles:
                concept_use.setdefault(t.text, t)
    for n, t in concept_use.items():
        if n in roles:
            raise _err(t.line, t.col, f"{n!r} is used both as a concept and as a role")
        _check_user(n, t, allow_fresh)
    for n, t in roles.items():
        _check_user(n, t, allow_fresh)
    return surface, where, set(concept_use), set(roles)


def parse_tbox(text, allow_fresh=False):
    """Parse a Horn-ALCHIQ TBox in surface syntax and normalize it."""
    surface, where, concepts, roles = _parse_axioms(text, allow_fresh)
    sig = Signature(concepts, roles)
    try:
        return normalize_structural(surface, sig)
    except ValidationError as e:
        # locate the offending axiom for the message
        for ax, t in zip(surface, where):
            try:
                normalize_structural([ax], sig)
            except ValidationError:
                raise _err(t.line, t.col, str(e)) from None
        raise


def _basic(c):
    if isinstance(c, SName):
        return c.name
    if isinstance(c, SExists) and (c.filler is None or isinstance(c.filler, STop)):
        return ExistsRole(c.role)
    return None


def parse_dllite(text, allow_fresh=True):
    surface, where, concepts, roles = _parse_axioms(text, allow_fresh)
    out = []
    for ax, t in zip(surface, where):
        if isinstance(ax, (RI, RoleDisjoint)):
            out.append(ax)
            continue
        lhs, rhs = ax.lhs, ax.rhs
        if isinstance(rhs, SBot):
            parts = lhs.args if isinstance(lhs, SAnd) else (lhs,)
            bs = [_basic(p) for p in parts]
            if len(bs) in (1, 2) and None not in bs:
                out.append(DLDisjoint(bs[0], bs[-1]))
                continue
        else:
            b1, b2 = _basic(lhs), _basic(rhs)
            if b1 is not None and b2 is not None:
                out.append(DLInclusion(b1, b2))
                continue
        raise _err(t.line, t.col, f"not a DL-Lite_R axiom: {ax}")
    return DLLiteTBox(frozenset(out), Signature(concepts, roles))


def load_tbox(text, allow_fresh=True):
    """DL-Lite_R when every axiom fits the grammar, otherwise Horn-ALCHIQ."""
    try:
        return parse_dllite(text, allow_fresh)
    except ValidationError:
        return parse_tbox(text, allow_fresh)


def serialize_tbox(t):
    lines = []
    if t.sig.concepts:
        lines.append("concept " + " ".join(sorted(t.sig.concepts)))
    if t.sig.roles:
        lines.append("role " + " ".join(sorted(t.sig.roles)))
    lines += [str(a) for a in t.sorted_axioms()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# atoms, queries, mappings


def _atom(c):
    t = c.cur
    pred = c.name("predicate")
    c.expect("(")
    args = []
    if not c.at(")"):
        args.append(c.name("term"))
        while c.at(","):
            c.take()
            args.append(c.name("term"))
    c.expect(")")
    return DatalogAtom(pred, tuple(args)), t


def _body(c):
    """Atoms and inequalities up to end of line; a trailing '.' is allowed."""
    atoms, ineqs = [], []
    while True:
        if c.cur.kind == "name" and c.peek().text == "!=":
            x = c.name("variable")
            c.take()
            ineqs.append((x, c.name("variable")))
        else:
            atoms.append(_atom(c)[0])
        if c.at(","):
            c.take()
            continue
        break
    if c.at("."):
        c.take()
    c.end()
    return atoms, ineqs


def _cq(head_args, atoms, ineqs, tok):
    try:
        return CQne(tuple(head_args), frozenset(atoms), frozenset(ineqs))
    except ValidationError as e:
        raise _err(tok.line, tok.col, str(e)) from None


def parse_query(line, no=1):
    c = Cursor(tokenize(line, no))
    head, tok = _atom(c)
    c.expect(":-")
    atoms, ineqs = _body(c)
    if len(set(head.args)) != len(head.args):
        raise _err(tok.line, tok.col, "repeated answer variable")
    return _cq(head.args, atoms, ineqs, tok)


def parse_queries(text):
    return [parse_query(s, no) for no, s in _lines(text)]


def serialize_queries(qs):
    return "".join(f"{q}\n" for q in qs)


def parse_mapping(text):
    groups = []
    for no, s in _lines(text):
        toks = tokenize(s, no)
        c = Cursor(toks)
        if c.at("|"):
            if not groups:
                raise _err(no, toks[0].col, "continuation line without an assertion")
            c.take()
            atoms, ineqs = _body(c)
            head, tok = groups[-1][0], groups[-1][1]
            groups[-1][2].append(_cq(head.args, atoms, ineqs, toks[0]))
            continue
        head, tok = _atom(c)
        c.expect(":-")
        atoms, ineqs = _body(c)
        if len(set(head.args)) != len(head.args) or len(head.args) not in (1, 2):
            raise _err(tok.line, tok.col, f"mapping head {head} must have one or two distinct variables")
        groups.append((head, tok, [_cq(head.args, atoms, ineqs, tok)]))
    return Mapping(MappingAssertion(h, tuple(qs)) for h, _, qs in groups)


def serialize_mapping(m):
    return "".join(f"{a}\n" for a in m)


# ---------------------------------------------------------------------------
# facts


def parse_facts(text):
    f = FactSet()
    arity = {}
    for no, s in _lines(text):
        c = Cursor(tokenize(s, no))
        while c.cur.kind != "eol":
            atom, tok = _atom(c)
            if arity.setdefault(atom.pred, len(atom.args)) != len(atom.args):
                raise _err(tok.line, tok.col, f"{atom.pred} used with arities {arity[atom.pred]} and {len(atom.args)}")
            f.add(atom.pred, atom.args)
            if c.at("."):
                c.take()
    return f


def _const(c):
    return c if re.fullmatch(r"[A-Za-z0-9_]+", c) else f"'{c}'"


def serialize_facts(f):
    lines = []
    for p in sorted(f):
        for t in sorted(f[p]):
            lines.append(f"{p}({','.join(_const(c) for c in t)}).")
    return "".join(x + "\n" for x in lines)


def read_facts_csv(directory):
    """One `<predicate>.csv` per predicate, one tuple per row, no header."""
    f = FactSet()
    for path in sorted(Path(directory).glob("*.csv")):
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if row:
                    f.add(path.stem, tuple(x.strip() for x in row))
    return f


def write_facts_csv(f, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for p in sorted(f):
        with open(d / f"{p}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for t in sorted(f[p]):
                w.writerow(t)


# ---------------------------------------------------------------------------
# schema, low-level definitions, oracle files


def parse_schema(text):
    """`name/arity` entries, whitespace or comma separated."""
    views = {}
    for no, s in _lines(text):
        c = Cursor(tokenize(s, no))
        while c.cur.kind != "eol":
            tok = c.cur
            name = c.name("view name")
            c.expect("/")
            a = c.take()
            if a.text not in ("1", "2"):
                raise _err(a.line, a.col, f"view arity must be 1 or 2, got {a.text!r}")
            if name in views:
                raise _err(tok.line, tok.col, f"view {name} declared twice")
            views[name] = int(a.text)
            if c.at(","):
                c.take()
    return Signature(views=views)


def serialize_schema(sig):
    return "".join(f"{n}/{a}\n" for n, a in sig.views)


_LL_HEAD = re.compile(r"^([A-Za-z0-9_]+)\(([^)]*)\)\s*:=\s?(.*)$")


def parse_lowlevel(text):
    """`V(COL1,COL2) := query text`; lines not starting a definition continue the previous one."""
    out = {}
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        if raw.lstrip().startswith("#") or not raw.strip():
            continue
        m = _LL_HEAD.match(raw.strip())
        if m:
            name, cols, body = m.groups()
            cols = tuple(x.strip() for x in cols.split(",") if x.strip())
            if name in out:
                raise _err(no, 1, f"view {name} defined twice")
            out[name] = [cols, body.strip()]
            cur = name
        elif cur is None:
            raise _err(no, 1, "expected `V(COL,...) := query`")
        else:
            out[cur][1] += "\n" + raw.rstrip()
    return {k: (cols, body) for k, (cols, body) in out.items()}


def serialize_lowlevel(ll):
    return "".join(f"{n}({','.join(cols)}) := {body}\n" for n, (cols, body) in sorted(ll.items()))


def parse_oracle(text):
    """`P: bounded` followed by indented query lines, or `P: unknown`."""
    answers = {}
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        s = _strip_comment(raw)
        if not s.strip():
            continue
        if s[0].isspace():
            if cur is None or not isinstance(answers[cur], list):
                raise _err(no, 1, "query line outside a bounded entry")
            answers[cur].append(parse_query(s.strip(), no))
            continue
        m = re.fullmatch(r"\s*([A-Za-z0-9_]+)\s*:\s*(bounded|unknown)\s*", s)
        if not m:
            raise _err(no, 1, "expected `predicate: bounded` or `predicate: unknown`")
        cur, kind = m.groups()
        answers[cur] = [] if kind == "bounded" else Unknown()
    return FileOracle({n: Bounded(tuple(v)) if isinstance(v, list) else v for n, v in answers.items()})


def serialize_oracle(oracle):
    lines = []
    for n in sorted(oracle.answers):
        v = oracle.answers[n]
        if isinstance(v, Bounded):
            lines.append(f"{n}: bounded")
            lines += [f"    {q}" for q in v.ucq]
        else:
            lines.append(f"{n}: unknown")
    return "".join(x + "\n" for x in lines)
