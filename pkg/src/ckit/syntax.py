"""ASTs, concrete syntax, parser and pretty-printer for processes, contracts and conditions.

This is the single source of AST definitions for the whole toolkit. All nodes
are immutable (frozen dataclasses), freely shareable and hashable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Union


class ParseError(ValueError):
    """Syntax or well-formedness error, with source position when available."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"{line}:{col}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# Names
# ---------------------------------------------------------------------------

class Kind(Enum):
    PORT = "port"
    VAR = "var"
    CONST = "const"
    OPAQUE = "opaque"


@dataclass(frozen=True)
class Name:
    kind: Kind
    ident: str

    def __str__(self) -> str:
        return "*" if self.kind is Kind.OPAQUE else self.ident

    def is_opaque(self) -> bool:
        return self.kind is Kind.OPAQUE


OPAQUE = Name(Kind.OPAQUE, "*")

# Reserved client-success port; always visible, never synchronizes.
END_PORT = "e"


def port(ident: str) -> Name:
    return Name(Kind.PORT, ident)


def var(ident: str) -> Name:
    return Name(Kind.VAR, ident)


def const(ident: str) -> Name:
    return Name(Kind.CONST, ident)


# ---------------------------------------------------------------------------
# Conditions  M ::= true | false | m=n | m!=n | M /\ M | M \/ M
# ---------------------------------------------------------------------------

class Condition:
    __slots__ = ()

    def __str__(self) -> str:
        return print_condition(self)


@dataclass(frozen=True)
class TrueCond(Condition):
    pass


@dataclass(frozen=True)
class FalseCond(Condition):
    pass


@dataclass(frozen=True)
class Eq(Condition):
    lhs: Name
    rhs: Name


@dataclass(frozen=True)
class Neq(Condition):
    lhs: Name
    rhs: Name


@dataclass(frozen=True)
class And(Condition):
    left: Condition
    right: Condition


@dataclass(frozen=True)
class Or(Condition):
    left: Condition
    right: Condition


TRUE = TrueCond()
FALSE = FalseCond()


def conj(left: Condition, right: Condition) -> Condition:
    """Conjunction with unit elision, so transition labels print like the atoms."""
    if left == TRUE:
        return right
    if right == TRUE:
        return left
    return And(left, right)


def disj_all(parts: Iterable[Condition]) -> Condition:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def cond_vars(m: Condition) -> frozenset[Name]:
    """Free data variables of a condition (conditions have no bound names)."""
    match m:
        case Eq(lhs, rhs) | Neq(lhs, rhs):
            return frozenset(n for n in (lhs, rhs) if n.kind is Kind.VAR)
        case And(l, r) | Or(l, r):
            return cond_vars(l) | cond_vars(r)
        case _:
            return frozenset()


def cond_names(m: Condition) -> frozenset[Name]:
    """All names (variables and constants) occurring in a condition; opaque excluded."""
    match m:
        case Eq(lhs, rhs) | Neq(lhs, rhs):
            return frozenset(n for n in (lhs, rhs) if not n.is_opaque())
        case And(l, r) | Or(l, r):
            return cond_names(l) | cond_names(r)
        case _:
            return frozenset()


def cond_consts(m: Condition) -> frozenset[Name]:
    return frozenset(n for n in cond_names(m) if n.kind is Kind.CONST)


def print_condition(m: Condition) -> str:
    def go(c: Condition, parent: str) -> str:
        match c:
            case TrueCond():
                return "true"
            case FalseCond():
                return "false"
            case Eq(lhs, rhs):
                return f"{lhs} = {rhs}"
            case Neq(lhs, rhs):
                return f"{lhs} != {rhs}"
            case And(l, r):
                s = f"{go(l, 'and')} /\\ {go(r, 'and')}"
                return f"({s})" if parent == "or" else s
            case Or(l, r):
                s = f"{go(l, 'or')} \\/ {go(r, 'or')}"
                return f"({s})" if parent == "and" else s
        raise TypeError(f"not a condition: {c!r}")

    return go(m, "top")


# ---------------------------------------------------------------------------
# Processes
# ---------------------------------------------------------------------------

class Process:
    __slots__ = ()

    def __str__(self) -> str:
        return print_process(self)


@dataclass(frozen=True)
class Nil(Process):
    pass


@dataclass(frozen=True)
class TauP(Process):
    cont: Process


@dataclass(frozen=True)
class Output(Process):
    subject: Name  # PORT or OPAQUE
    payload: tuple[Name, ...]  # VAR | CONST | OPAQUE
    cont: Process


@dataclass(frozen=True)
class Branch:
    subject: Name  # PORT or OPAQUE
    binders: tuple[Name, ...]  # VARs, pairwise distinct
    cont: Process


@dataclass(frozen=True)
class Sum(Process):
    """Input-guarded external choice; a single input prefix is a unary sum."""

    branches: tuple[Branch, ...]


@dataclass(frozen=True)
class If(Process):
    lhs: Name
    rhs: Name
    then_branch: Process
    else_branch: Process


@dataclass(frozen=True)
class Par(Process):
    parts: tuple[Process, ...]  # len >= 2, flattened, Nil-free


NIL = Nil()


def par_of(parts: Iterable[Process]) -> Process:
    """Parallel composition normalized up to the | monoid laws (0 units dropped)."""
    flat: list[Process] = []
    for p in parts:
        if isinstance(p, Par):
            flat.extend(p.parts)
        elif not isinstance(p, Nil):
            flat.append(p)
    if not flat:
        return NIL
    if len(flat) == 1:
        return flat[0]
    return Par(tuple(flat))


def input_prefix(subject: Name, binders: tuple[Name, ...], cont: Process) -> Sum:
    return Sum((Branch(subject, binders, cont),))


def end_process(cont: Process = NIL) -> Sum:
    """The client success action: a nullary input guard on the reserved port e."""
    return input_prefix(port(END_PORT), (), cont)


def free_data_vars(p: Process) -> frozenset[Name]:
    match p:
        case Nil():
            return frozenset()
        case TauP(cont):
            return free_data_vars(cont)
        case Output(_, payload, cont):
            here = frozenset(n for n in payload if n.kind is Kind.VAR)
            return here | free_data_vars(cont)
        case Sum(branches):
            out: frozenset[Name] = frozenset()
            for b in branches:
                out |= free_data_vars(b.cont) - frozenset(b.binders)
            return out
        case If(lhs, rhs, t, e):
            here = frozenset(n for n in (lhs, rhs) if n.kind is Kind.VAR)
            return here | free_data_vars(t) | free_data_vars(e)
        case Par(parts):
            out = frozenset()
            for q in parts:
                out |= free_data_vars(q)
            return out
    raise TypeError(f"not a process: {p!r}")


def free_names(p: Process) -> frozenset[Name]:
    """All free names: subjects, payload values, condition sides; opaque excluded."""
    match p:
        case Nil():
            return frozenset()
        case TauP(cont):
            return free_names(cont)
        case Output(subject, payload, cont):
            here = frozenset(n for n in (subject, *payload) if not n.is_opaque())
            return here | free_names(cont)
        case Sum(branches):
            out: frozenset[Name] = frozenset()
            for b in branches:
                subj = frozenset() if b.subject.is_opaque() else frozenset({b.subject})
                out |= subj | (free_names(b.cont) - frozenset(b.binders))
            return out
        case If(lhs, rhs, t, e):
            here = frozenset(n for n in (lhs, rhs) if not n.is_opaque())
            return here | free_names(t) | free_names(e)
        case Par(parts):
            out = frozenset()
            for q in parts:
                out |= free_names(q)
            return out
    raise TypeError(f"not a process: {p!r}")


def bound_vars(p: Process) -> frozenset[Name]:
    match p:
        case Nil():
            return frozenset()
        case TauP(cont):
            return bound_vars(cont)
        case Output(_, _, cont):
            return bound_vars(cont)
        case Sum(branches):
            out: frozenset[Name] = frozenset()
            for b in branches:
                out |= frozenset(b.binders) | bound_vars(b.cont)
            return out
        case If(_, _, t, e):
            return bound_vars(t) | bound_vars(e)
        case Par(parts):
            out = frozenset()
            for q in parts:
                out |= bound_vars(q)
            return out
    raise TypeError(f"not a process: {p!r}")


def is_closed(p: Process) -> bool:
    return not free_data_vars(p)


def apply_name(mapping: dict[Name, Name], n: Name) -> Name:
    return mapping.get(n, n)


def substitute(p: Process, mapping: dict[Name, Name]) -> Process:
    """Substitution on free data variables.

    Relies on the bound-name convention (binders distinct from free names);
    shadowed binders stop the substitution, and capture is rejected.
    """
    if not mapping:
        return p
    match p:
        case Nil():
            return p
        case TauP(cont):
            return TauP(substitute(cont, mapping))
        case Output(subject, payload, cont):
            return Output(subject, tuple(apply_name(mapping, n) for n in payload),
                          substitute(cont, mapping))
        case Sum(branches):
            out = []
            for b in branches:
                inner = {k: v for k, v in mapping.items() if k not in b.binders}
                for v in inner.values():
                    if v in b.binders:
                        raise ValueError(f"substitution would capture binder {v}")
                out.append(Branch(b.subject, b.binders, substitute(b.cont, inner)))
            return Sum(tuple(out))
        case If(lhs, rhs, t, e):
            return If(apply_name(mapping, lhs), apply_name(mapping, rhs),
                      substitute(t, mapping), substitute(e, mapping))
        case Par(parts):
            return par_of(substitute(q, mapping) for q in parts)
    raise TypeError(f"not a process: {p!r}")


def alpha_equiv(p: Process, q: Process) -> bool:
    """Structural equality up to renaming of bound variables."""

    def go(a: Process, b: Process, ren: dict[Name, Name]) -> bool:
        if type(a) is not type(b):
            return False
        match a, b:
            case (Nil(), Nil()):
                return True
            case (TauP(c1), TauP(c2)):
                return go(c1, c2, ren)
            case (Output(s1, pay1, c1), Output(s2, pay2, c2)):
                return (s1 == s2 and len(pay1) == len(pay2)
                        and all(ren.get(m, m) == n for m, n in zip(pay1, pay2))
                        and go(c1, c2, ren))
            case (Sum(bs1), Sum(bs2)):
                if len(bs1) != len(bs2):
                    return False
                for b1, b2 in zip(bs1, bs2):
                    if b1.subject != b2.subject or len(b1.binders) != len(b2.binders):
                        return False
                    inner = dict(ren)
                    inner.update(zip(b1.binders, b2.binders))
                    if not go(b1.cont, b2.cont, inner):
                        return False
                return True
            case (If(l1, r1, t1, e1), If(l2, r2, t2, e2)):
                return (ren.get(l1, l1) == l2 and ren.get(r1, r1) == r2
                        and go(t1, t2, ren) and go(e1, e2, ren))
            case (Par(ps1), Par(ps2)):
                return len(ps1) == len(ps2) and all(
                    go(x, y, ren) for x, y in zip(ps1, ps2))
        return False

    return go(p, q, {})


def process_size(p: Process) -> int:
    match p:
        case Nil():
            return 1
        case TauP(cont):
            return 1 + process_size(cont)
        case Output(_, _, cont):
            return 1 + process_size(cont)
        case Sum(branches):
            return 1 + sum(process_size(b.cont) for b in branches)
        case If(_, _, t, e):
            return 1 + process_size(t) + process_size(e)
        case Par(parts):
            return 1 + sum(process_size(q) for q in parts)
    raise TypeError(f"not a process: {p!r}")


def rename_binders_apart(p: Process, used: set[str]) -> Process:
    """Give every binder a globally unique ident, avoiding names in `used`.

    Establishes the paper's bound-name convention as a post-condition of
    parsing: binders are pairwise distinct and disjoint from free names.
    """

    def fresh(base: str) -> Name:
        if base not in used:
            used.add(base)
            return var(base)
        i = 2
        while f"{base}{i}" in used:
            i += 1
        used.add(f"{base}{i}")
        return var(f"{base}{i}")

    def go(q: Process, ren: dict[Name, Name]) -> Process:
        match q:
            case Nil():
                return q
            case TauP(cont):
                return TauP(go(cont, ren))
            case Output(subject, payload, cont):
                return Output(subject, tuple(ren.get(n, n) for n in payload), go(cont, ren))
            case Sum(branches):
                out = []
                for b in branches:
                    new_binders = tuple(fresh(v.ident) for v in b.binders)
                    inner = dict(ren)
                    inner.update(zip(b.binders, new_binders))
                    out.append(Branch(b.subject, new_binders, go(b.cont, inner)))
                return Sum(tuple(out))
            case If(lhs, rhs, t, e):
                return If(ren.get(lhs, lhs), ren.get(rhs, rhs), go(t, ren), go(e, ren))
            case Par(parts):
                return par_of(go(x, ren) for x in parts)
        raise TypeError(f"not a process: {q!r}")

    return go(p, {})


# ---------------------------------------------------------------------------
# Contracts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    """A contract action: a label with an optional ground payload and a polarity.

    The value-passing encoding folds a channel and a value tuple into a single
    action, so `order` and `order<k>` are distinct actions with the same name.
    """

    name: str
    payload: tuple[Name, ...] = ()
    is_output: bool = False

    def co(self) -> Action:
        return Action(self.name, self.payload, not self.is_output)

    def __str__(self) -> str:
        bar = "~" if self.is_output else ""
        if self.payload:
            inner = ",".join(str(v) for v in self.payload)
            return f"{bar}{self.name}<{inner}>"
        return f"{bar}{self.name}"


END_ACTION = Action(END_PORT, (), False)


class Contract:
    __slots__ = ()

    def __str__(self) -> str:
        return print_contract(self)


@dataclass(frozen=True)
class CNil(Contract):
    pass


@dataclass(frozen=True)
class Prefix(Contract):
    action: Action
    cont: Contract


@dataclass(frozen=True)
class External(Contract):
    parts: tuple[Contract, ...]  # len >= 2, no nested External at top


@dataclass(frozen=True)
class Internal(Contract):
    parts: tuple[Contract, ...]  # len >= 2, no nested Internal at top


CNIL = CNil()


def ext_of(parts: Iterable[Contract]) -> Contract:
    """External sum modulo associativity; the empty sum is 0."""
    flat: list[Contract] = []
    for c in parts:
        if isinstance(c, External):
            flat.extend(c.parts)
        else:
            flat.append(c)
    if not flat:
        return CNIL
    if len(flat) == 1:
        return flat[0]
    return External(tuple(flat))


def int_of(parts: Iterable[Contract]) -> Contract:
    """Internal choice modulo associativity; never empty by construction."""
    flat: list[Contract] = []
    for c in parts:
        if isinstance(c, Internal):
            flat.extend(c.parts)
        else:
            flat.append(c)
    if not flat:
        raise ValueError("empty internal choice")
    if len(flat) == 1:
        return flat[0]
    return Internal(tuple(flat))


def contract_actions(c: Contract) -> frozenset[Action]:
    match c:
        case CNil():
            return frozenset()
        case Prefix(action, cont):
            return frozenset({action}) | contract_actions(cont)
        case External(parts) | Internal(parts):
            out: frozenset[Action] = frozenset()
            for p in parts:
                out |= contract_actions(p)
            return out
    raise TypeError(f"not a contract: {c!r}")


def contract_names(c: Contract) -> frozenset[str]:
    return frozenset(a.name for a in contract_actions(c))


def mentions_end(c: Contract) -> bool:
    return any(a.name == END_PORT for a in contract_actions(c))


def contract_key(c: Contract):
    """Deterministic total order on contracts, used for canonical output."""
    match c:
        case CNil():
            return (0,)
        case Prefix(a, cont):
            return (1, a.name, tuple(str(v) for v in a.payload), a.is_output,
                    contract_key(cont))
        case External(parts):
            return (2, tuple(contract_key(p) for p in parts))
        case Internal(parts):
            return (3, tuple(contract_key(p) for p in parts))
    raise TypeError(f"not a contract: {c!r}")


def action_key(a: Action):
    return (a.name, tuple(str(v) for v in a.payload), a.is_output)


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

@dataclass
class Declarations:
    """Identifier table from a file header; namespaces are disjoint."""

    ports: dict[str, Optional[int]]  # ident -> payload arity (None until first use)
    consts: set[str]
    vars_: set[str]

    @staticmethod
    def empty() -> Declarations:
        return Declarations(ports={END_PORT: 0}, consts=set(), vars_=set())

    def add_port(self, ident: str, arity: Optional[int], line: int = 0, col: int = 0) -> None:
        self._check_free(ident, line, col)
        self.ports[ident] = arity

    def add_const(self, ident: str, line: int = 0, col: int = 0) -> None:
        self._check_free(ident, line, col)
        self.consts.add(ident)

    def add_var(self, ident: str, line: int = 0, col: int = 0) -> None:
        self._check_free(ident, line, col)
        self.vars_.add(ident)

    def _check_free(self, ident: str, line: int, col: int) -> None:
        if ident in self.ports or ident in self.consts or ident in self.vars_:
            raise ParseError(f"identifier {ident!r} declared twice", line, col)

    def classify(self, ident: str, line: int = 0, col: int = 0) -> Name:
        if ident in self.ports:
            return port(ident)
        if ident in self.consts:
            return const(ident)
        if ident in self.vars_:
            return var(ident)
        raise ParseError(f"undeclared identifier {ident!r}", line, col)

    def fix_arity(self, ident: str, arity: int, line: int = 0, col: int = 0) -> None:
        known = self.ports.get(ident)
        if known is None:
            self.ports[ident] = arity
        elif known != arity:
            raise ParseError(
                f"port {ident!r} used with arity {arity}, declared/used with {known}",
                line, col)

    def const_names(self) -> frozenset[Name]:
        return frozenset(const(c) for c in self.consts)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<intchoice>\(\+\))
  | (?P<assign>:=)
  | (?P<neq>!=)
  | (?P<zero>0)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()<>.,+|~*=!;])
""", re.VERBOSE)

KEYWORDS = {"if", "then", "else", "tau", "ports", "consts", "vars"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'kw', or the literal punctuation / '(+)' / ':=' / '!=' / 'nl' / 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str, keep_newlines: bool = False) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "nl":
            if keep_newlines:
                toks.append(Token("nl", "\n", line, col))
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(lexeme)
        else:
            if kind == "ident":
                tk = "kw" if lexeme in KEYWORDS else "ident"
                toks.append(Token(tk, lexeme, line, col))
            elif kind == "intchoice":
                toks.append(Token("(+)", lexeme, line, col))
            elif kind == "assign":
                toks.append(Token(":=", lexeme, line, col))
            elif kind == "neq":
                toks.append(Token("!=", lexeme, line, col))
            elif kind == "zero":
                toks.append(Token("0", lexeme, line, col))
            else:
                toks.append(Token(lexeme, lexeme, line, col))
            col += len(lexeme)
        pos = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or 'end of input'!r}",
                             t.line, t.col)
        return self.next()

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def at_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text == word

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if not self.at_kw(word):
            raise ParseError(f"expected {word!r}, found {t.text or 'end of input'!r}",
                             t.line, t.col)
        return self.next()


# ---------------------------------------------------------------------------
# Contract parser
# ---------------------------------------------------------------------------

def _parse_contract_action(ts: TokenStream) -> Action:
    is_output = False
    if ts.at("~"):
        ts.next()
        is_output = True
    t = ts.peek()
    if ts.at("ident"):
        name = ts.next().text
    elif ts.at("*"):
        ts.next()
        name = "*"
    else:
        raise ParseError(f"expected action name, found {t.text!r}", t.line, t.col)
    if name == END_PORT and is_output:
        raise ParseError("the reserved action e cannot appear under output polarity",
                         t.line, t.col)
    payload: tuple[Name, ...] = ()
    if ts.at("<"):
        ts.next()
        vals: list[Name] = []
        while not ts.at(">"):
            v = ts.peek()
            if ts.at("*"):
                ts.next()
                vals.append(OPAQUE)
            elif ts.at("ident"):
                vals.append(const(ts.next().text))
            else:
                raise ParseError(f"expected payload value, found {v.text!r}", v.line, v.col)
            if ts.at(","):
                ts.next()
        ts.expect(">")
        payload = tuple(vals)
    return Action(name, payload, is_output)


def _parse_contract_prefix(ts: TokenStream) -> Contract:
    if ts.at("("):
        ts.next()
        c = _parse_contract_choice(ts)
        ts.expect(")")
        return c
    if ts.at("0"):
        ts.next()
        return CNIL
    act = _parse_contract_action(ts)
    if ts.at("."):
        ts.next()
        return Prefix(act, _parse_contract_prefix(ts))
    return Prefix(act, CNIL)


def _parse_contract_ext(ts: TokenStream) -> Contract:
    parts = [_parse_contract_prefix(ts)]
    while ts.at("+"):
        ts.next()
        parts.append(_parse_contract_prefix(ts))
    return ext_of(parts)


def _parse_contract_choice(ts: TokenStream) -> Contract:
    parts = [_parse_contract_ext(ts)]
    while ts.at("(+)"):
        ts.next()
        parts.append(_parse_contract_ext(ts))
    return int_of(parts)


def parse_contract(text: str) -> Contract:
    """Parse a contract from text; internal choice `(+)` binds looser than `+`."""
    ts = TokenStream(tokenize(text))
    c = _parse_contract_choice(ts)
    t = ts.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return c


# ---------------------------------------------------------------------------
# Process parser
# ---------------------------------------------------------------------------

def _parse_value(ts: TokenStream, decls: Declarations) -> Name:
    t = ts.peek()
    if ts.at("*"):
        ts.next()
        return OPAQUE
    if ts.at("ident"):
        ts.next()
        n = decls.classify(t.text, t.line, t.col)
        if n.kind is Kind.PORT:
            raise ParseError(f"port {t.text!r} used as a data value", t.line, t.col)
        return n
    raise ParseError(f"expected value, found {t.text!r}", t.line, t.col)


def _parse_subject(ts: TokenStream, decls: Declarations) -> Name:
    t = ts.peek()
    if ts.at("*"):
        ts.next()
        return OPAQUE
    if ts.at("ident"):
        ts.next()
        n = decls.classify(t.text, t.line, t.col)
        if n.kind is not Kind.PORT:
            raise ParseError(f"{t.text!r} is not a port", t.line, t.col)
        return n
    raise ParseError(f"expected port, found {t.text!r}", t.line, t.col)


def _parse_guard(ts: TokenStream, decls: Declarations) -> Branch:
    """One input guard `x(v,...)` (or `*(v,...)`, or the bare success action `e`)."""
    t = ts.peek()
    subject = _parse_subject(ts, decls)
    if subject.kind is Kind.PORT and subject.ident == END_PORT and not ts.at("("):
        return Branch(subject, (), _parse_opt_cont(ts, decls))
    ts.expect("(")
    binders: list[Name] = []
    while not ts.at(")"):
        v = ts.peek()
        if ts.at("*"):
            raise ParseError("opaque cannot be used as a binder", v.line, v.col)
        ts.expect("ident")
        n = decls.classify(v.text, v.line, v.col)
        if n.kind is not Kind.VAR:
            raise ParseError(f"binder {v.text!r} is not a declared data variable",
                             v.line, v.col)
        if n in binders:
            raise ParseError(f"duplicate binder {v.text!r}", v.line, v.col)
        binders.append(n)
        if ts.at(","):
            ts.next()
    ts.expect(")")
    if subject.kind is Kind.PORT:
        if subject.ident == END_PORT and binders:
            raise ParseError("the reserved port e takes no payload", t.line, t.col)
        decls.fix_arity(subject.ident, len(binders), t.line, t.col)
    return Branch(subject, tuple(binders), _parse_opt_cont(ts, decls))


def _parse_opt_cont(ts: TokenStream, decls: Declarations) -> Process:
    if ts.at("."):
        ts.next()
        return _parse_prefixed(ts, decls)
    return NIL


def _parse_prefixed(ts: TokenStream, decls: Declarations) -> Process:
    t = ts.peek()
    if ts.at("("):
        ts.next()
        p = _parse_par(ts, decls)
        ts.expect(")")
        return p
    if ts.at("0"):
        ts.next()
        return NIL
    if ts.at_kw("tau"):
        ts.next()
        ts.expect(".")
        return TauP(_parse_prefixed(ts, decls))
    if ts.at_kw("if"):
        ts.next()
        lhs = _parse_value(ts, decls)
        ts.expect("=")
        rhs = _parse_value(ts, decls)
        ts.expect_kw("then")
        then_branch = _parse_prefixed(ts, decls)
        ts.expect_kw("else")
        else_branch = _parse_prefixed(ts, decls)
        return If(lhs, rhs, then_branch, else_branch)
    # Output `x!<...>` or input guard(s)
    if ts.at("ident") or ts.at("*"):
        save = ts.i
        subject = _parse_subject(ts, decls)
        if ts.at("!"):
            if subject.kind is Kind.PORT and subject.ident == END_PORT:
                raise ParseError("the reserved port e is input-only", t.line, t.col)
            ts.next()
            ts.expect("<")
            values: list[Name] = []
            while not ts.at(">"):
                values.append(_parse_value(ts, decls))
                if ts.at(","):
                    ts.next()
            ts.expect(">")
            if subject.kind is Kind.PORT:
                decls.fix_arity(subject.ident, len(values), t.line, t.col)
            return Output(subject, tuple(values), _parse_opt_cont(ts, decls))
        ts.i = save
        return Sum((_parse_guard(ts, decls),))
    raise ParseError(f"expected a process, found {t.text or 'end of input'!r}",
                     t.line, t.col)


def _parse_sum_or_prefixed(ts: TokenStream, decls: Declarations) -> Process:
    p = _parse_prefixed(ts, decls)
    if not ts.at("+"):
        return p
    if not isinstance(p, Sum):
        t = ts.peek()
        raise ParseError("only input guards can be summed", t.line, t.col)
    branches = list(p.branches)
    while ts.at("+"):
        t = ts.next()
        nxt = _parse_prefixed(ts, decls)
        if not isinstance(nxt, Sum):
            raise ParseError("only input guards can be summed", t.line, t.col)
        branches.extend(nxt.branches)
    return Sum(tuple(branches))


def _parse_par(ts: TokenStream, decls: Declarations) -> Process:
    parts = [_parse_sum_or_prefixed(ts, decls)]
    while ts.at("|"):
        ts.next()
        parts.append(_parse_sum_or_prefixed(ts, decls))
    return par_of(parts)


def parse_process(text: str, decls: Declarations) -> Process:
    """Parse a process; bound names are renamed apart so binders are unique."""
    ts = TokenStream(tokenize(text))
    p = _parse_par(ts, decls)
    t = ts.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    used = set(decls.ports) | set(decls.consts)
    used |= {n.ident for n in free_data_vars(p)}
    p = rename_binders_apart(p, used)
    return p


# ---------------------------------------------------------------------------
# File format: declaration header + `Name := term` lines
# ---------------------------------------------------------------------------

@dataclass
class SourceFile:
    decls: Declarations
    definitions: dict[str, Union[Process, Contract]]


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _parse_decl_stmt(stmt: str, decls: Declarations, line_no: int) -> None:
    stmt = stmt.strip()
    if not stmt:
        return
    m = re.match(r"(ports|consts|vars)\s+(.*)$", stmt, re.DOTALL)
    if not m:
        raise ParseError(f"bad declaration {stmt!r}", line_no, 1)
    kind, body = m.group(1), m.group(2)
    for item in body.split(","):
        item = item.strip()
        if not item:
            continue
        arity: Optional[int] = None
        if "/" in item:
            item, _, ar = item.partition("/")
            item = item.strip()
            arity = int(ar.strip())
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", item):
            raise ParseError(f"bad identifier {item!r} in declaration", line_no, 1)
        if kind == "ports":
            if item == END_PORT:
                continue  # predeclared
            decls.add_port(item, arity, line_no)
        elif kind == "consts":
            decls.add_const(item, line_no)
        else:
            decls.add_var(item, line_no)


def parse_file(text: str, term_kind: str = "process") -> SourceFile:
    """Parse a `.proc` or `.ctr` file: UTF-8, `#` comments, decls, definitions."""
    decls = Declarations.empty()
    definitions: dict[str, Union[Process, Contract]] = {}
    pending_decl = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if ":=" in line and not pending_decl:
            name, _, body = line.partition(":=")
            name = name.strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise ParseError(f"bad definition name {name!r}", line_no, 1)
            if name in definitions:
                raise ParseError(f"definition {name!r} repeated", line_no, 1)
            try:
                if term_kind == "process":
                    definitions[name] = parse_process(body, decls)
                else:
                    definitions[name] = parse_contract(body)
            except ParseError as exc:
                raise ParseError(f"in definition {name!r}: {exc}", line_no, 1) from exc
        else:
            pending_decl += " " + line
            while ";" in pending_decl:
                stmt, _, pending_decl = pending_decl.partition(";")
                _parse_decl_stmt(stmt, decls, line_no)
            pending_decl = pending_decl.strip()
    if pending_decl.strip():
        raise ParseError(f"unterminated declaration {pending_decl.strip()!r}")
    return SourceFile(decls, definitions)


# ---------------------------------------------------------------------------
# Printers
# ---------------------------------------------------------------------------

def _print_value(n: Name) -> str:
    return str(n)


def print_process(p: Process) -> str:
    """Text form that re-parses to an alpha-equivalent process."""

    def cont_str(cont: Process) -> str:
        if isinstance(cont, Nil):
            return ""
        return "." + prefixed(cont)

    def prefixed(q: Process) -> str:
        match q:
            case Nil():
                return "0"
            case TauP(cont):
                inner = prefixed(cont) if not isinstance(cont, Nil) else "0"
                return f"tau.{inner}"
            case Output(subject, payload, cont):
                vals = ",".join(_print_value(v) for v in payload)
                return f"{subject}!<{vals}>{cont_str(cont)}"
            case Sum(branches):
                if len(branches) == 1:
                    return branch(branches[0])
                return " + ".join(branch(b) for b in branches)
            case If(lhs, rhs, t, e):
                return (f"if {_print_value(lhs)}={_print_value(rhs)} "
                        f"then {prefixed(t)} else {prefixed(e)}")
            case Par(_):
                return f"({top(q)})"
        raise TypeError(f"not a process: {q!r}")

    def branch(b: Branch) -> str:
        if b.subject.kind is Kind.PORT and b.subject.ident == END_PORT and not b.binders:
            return f"e{cont_str(b.cont)}"
        binders = ",".join(v.ident for v in b.binders)
        return f"{b.subject}({binders}){cont_str(b.cont)}"

    def top(q: Process) -> str:
        if isinstance(q, Par):
            return " | ".join(prefixed(x) for x in q.parts)
        return prefixed(q)

    return top(p)


def print_contract(c: Contract) -> str:
    """Text form that re-parses to the same contract (modulo associativity)."""

    def prefix_level(d: Contract) -> str:
        match d:
            case CNil():
                return "0"
            case Prefix(action, cont):
                if isinstance(cont, CNil):
                    return str(action)
                return f"{action}.{prefix_level(cont)}"
            case _:
                return f"({top(d)})"

    def ext_level(d: Contract) -> str:
        if isinstance(d, External):
            return " + ".join(prefix_level(p) for p in d.parts)
        return prefix_level(d)

    def top(d: Contract) -> str:
        if isinstance(d, Internal):
            return " (+) ".join(ext_level(p) for p in d.parts)
        return ext_level(d)

    return top(c)
