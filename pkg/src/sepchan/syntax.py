"""Surface syntax: lexer, ASTs, parsers and pretty-printer.

Two file kinds share one header syntax:

    vars m, v : int;
    chans c : cap=1 dom=0..3;

A program file (``.ecsl``) follows the header with a parallel composition
of statements; a proof-outline file (``.spec``) interleaves conditions
``{ Gamma | gamma /\\ P }`` with the same statement syntax.

Operator survey (ASCII only):

    ||        parallel composition of programs
    ||@k      parallel composition of whole systems at level k
    @N        the action to the left happens at (is owned by) system N
    x := e    assignment        x := [e]   heap read     [e] := e  heap write
    send(e, c)                  x := receive(c)
    |->       points-to (RHS `-` leaves the cell value unconstrained)
    *  -*     separating conjunction / implication
    /\\ \\/ -> !                 boolean connectives (both languages)
    X U G F   temporal next / until / always / eventually (G, F desugar)
    c!m < c?v happens-before between action labels
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union


class SourceError(Exception):
    """Parse or name-resolution failure with a source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ------------------------------------------------------------------
# Tokens
# ------------------------------------------------------------------

KEYWORDS = {
    "vars", "chans", "int", "cap", "dom", "inf",
    "skip", "send", "receive", "if", "then", "else", "while", "do", "when",
    "true", "false", "emp", "full", "empty", "peek",
    "X", "U", "G", "F",
}

# Longest match first.
MULTI_OPS = ["|->", ":=", "..", "!=", "<=", ">=", "->", "-*", "/\\", "\\/", "||"]
SINGLE_OPS = "{}()[];,:@!?+-*=<>|"


@dataclass(frozen=True)
class Token:
    kind: str          # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    col: int
    value: int = 0     # for "int" tokens


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        matched = None
        for op in MULTI_OPS:
            if source.startswith(op, i):
                matched = op
                break
        if matched:
            toks.append(Token("op", matched, line, col))
            i += len(matched)
            col += len(matched)
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("int", source[i:j], line, col, value=int(source[i:j])))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            col += j - i
            i = j
            continue
        if ch in SINGLE_OPS:
            toks.append(Token("op", ch, line, col))
            i += 1
            col += 1
            continue
        raise SourceError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ------------------------------------------------------------------
# Expressions and boolean expressions
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" | "-"
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Lit, BinOp]


@dataclass(frozen=True)
class BTrue:
    pass


@dataclass(frozen=True)
class BFalse:
    pass


@dataclass(frozen=True)
class Cmp:
    op: str  # "=", "!=", "<", "<=", ">", ">="
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BAnd:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class BNot:
    arg: "BoolExpr"


BoolExpr = Union[BTrue, BFalse, Cmp, BAnd, BNot]


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Lit):
        return set()
    return expr_vars(e.left) | expr_vars(e.right)


def bool_vars(b: BoolExpr) -> set[str]:
    if isinstance(b, (BTrue, BFalse)):
        return set()
    if isinstance(b, Cmp):
        return expr_vars(b.left) | expr_vars(b.right)
    if isinstance(b, BAnd):
        return bool_vars(b.left) | bool_vars(b.right)
    return bool_vars(b.arg)


# ------------------------------------------------------------------
# Statements and parallel structure
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class HeapRead:
    target: str
    address: Expr


@dataclass(frozen=True)
class HeapWrite:
    address: Expr
    expr: Expr


@dataclass(frozen=True)
class Send:
    expr: Expr
    channel: str


@dataclass(frozen=True)
class Receive:
    target: str
    channel: str


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"


@dataclass(frozen=True)
class If:
    cond: BoolExpr
    then_body: "Stmt"
    else_body: "Stmt"


@dataclass(frozen=True)
class While:
    cond: BoolExpr
    body: "Stmt"


@dataclass(frozen=True)
class Owned:
    body: "Stmt"
    system: str


@dataclass(frozen=True)
class When:
    """Foreign-environment guard; legal in proof outlines only."""

    guard: "TemporalFormula"
    body: "Stmt"


Stmt = Union[Skip, Assign, HeapRead, HeapWrite, Send, Receive, Seq, If, While, Owned, When]


@dataclass(frozen=True)
class PLeaf:
    stmt: Stmt


@dataclass(frozen=True)
class PPar:
    left: "ParStruct"
    right: "ParStruct"


@dataclass(frozen=True)
class PNest:
    level: int
    left: "ParStruct"
    right: "ParStruct"


ParStruct = Union[PLeaf, PPar, PNest]


# ------------------------------------------------------------------
# Assertions
# ------------------------------------------------------------------

@dataclass(frozen=True)
class AEmp:
    pass


@dataclass(frozen=True)
class ABool:
    expr: BoolExpr


@dataclass(frozen=True)
class APointsTo:
    address: Expr
    value: Optional[Expr]  # None encodes the `-` wildcard


@dataclass(frozen=True)
class AAnd:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class AOr:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class ANot:
    arg: "Assertion"


@dataclass(frozen=True)
class AImplies:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class ASep:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class AWand:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class ABufFull:
    """Buffer predicate full(c); needed to state resource invariants."""

    channel: str


@dataclass(frozen=True)
class ABufEmpty:
    channel: str


@dataclass(frozen=True)
class ABufPeek:
    channel: str
    expr: Expr


Assertion = Union[AEmp, ABool, APointsTo, AAnd, AOr, ANot, AImplies, ASep, AWand,
                  ABufFull, ABufEmpty, ABufPeek]

A_TRUE = ABool(BTrue())


# ------------------------------------------------------------------
# Temporal formulas
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ActionLabel:
    """Reference to an action by its printed text, e.g. ``c!m0`` at ``N0``.

    A label with system=None matches an occurrence of the action under
    any system.
    """

    text: str
    system: Optional[str] = None

    def __str__(self) -> str:
        return self.text if self.system is None else f"{self.text}@{self.system}"


@dataclass(frozen=True)
class TTop:
    pass


@dataclass(frozen=True)
class TOccurred:
    label: ActionLabel


@dataclass(frozen=True)
class TBefore:
    first: ActionLabel
    second: ActionLabel


@dataclass(frozen=True)
class TNot:
    arg: "TemporalFormula"


@dataclass(frozen=True)
class TAnd:
    left: "TemporalFormula"
    right: "TemporalFormula"


@dataclass(frozen=True)
class TNext:
    arg: "TemporalFormula"


@dataclass(frozen=True)
class TUntil:
    left: "TemporalFormula"
    right: "TemporalFormula"


TemporalFormula = Union[TTop, TOccurred, TBefore, TNot, TAnd, TNext, TUntil]

T_TOP = TTop()


def t_false() -> TemporalFormula:
    return TNot(T_TOP)


def t_eventually(phi: TemporalFormula) -> TemporalFormula:
    return TUntil(T_TOP, phi)


def t_always(phi: TemporalFormula) -> TemporalFormula:
    return TNot(TUntil(T_TOP, TNot(phi)))


def positive_atoms(f: TemporalFormula) -> list[Union[TOccurred, TBefore]]:
    """Atoms in conjunctive positions; negative/modal contexts excluded."""
    if isinstance(f, (TOccurred, TBefore)):
        return [f]
    if isinstance(f, TAnd):
        return positive_atoms(f.left) + positive_atoms(f.right)
    return []


def formula_labels(f: TemporalFormula) -> set[ActionLabel]:
    if isinstance(f, TOccurred):
        return {f.label}
    if isinstance(f, TBefore):
        return {f.first, f.second}
    if isinstance(f, (TNot, TNext)):
        return formula_labels(f.arg)
    if isinstance(f, (TAnd, TUntil)):
        return formula_labels(f.left) | formula_labels(f.right)
    return set()


# ------------------------------------------------------------------
# Conditions and proof outlines
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """One bracketed condition: a foreign formula plus native groups.

    The native part is a separating conjunction of (temporal, spatial)
    pairs; a plain ``gamma /\\ P`` condition is the one-group case.
    """

    foreign: TemporalFormula
    groups: tuple[tuple[TemporalFormula, Assertion], ...]

    @property
    def native(self) -> TemporalFormula:
        out: TemporalFormula = self.groups[0][0]
        for g, _ in self.groups[1:]:
            out = TAnd(out, g)
        return out

    @property
    def assertion(self) -> Assertion:
        out = self.groups[0][1]
        for _, p in self.groups[1:]:
            out = ASep(out, p)
        return out


def plain_condition(assertion: Assertion,
                    foreign: TemporalFormula = T_TOP,
                    native: TemporalFormula = T_TOP) -> Condition:
    return Condition(foreign, ((native, assertion),))


TOP_CONDITION = plain_condition(A_TRUE)


@dataclass(frozen=True)
class OutlineLeaf:
    """A column of a proof outline: conditions around every statement.

    conds[i] is the non-empty stack of conditions directly before
    stmts[i]; conds[-1] follows the final statement.  Stacked conditions
    are consequence steps.
    """

    conds: tuple[tuple[Condition, ...], ...]
    stmts: tuple[Stmt, ...]

    def __post_init__(self):
        assert len(self.conds) == len(self.stmts) + 1


@dataclass(frozen=True)
class OutlineComp:
    """Composition of two sub-outlines with joint conditions."""

    kind: str  # "par" | "nest"
    level: Optional[int]
    left: "Outline"
    right: "Outline"
    pre: tuple[Condition, ...]
    post: tuple[Condition, ...]


Outline = Union[OutlineLeaf, OutlineComp]


def outline_pre(o: Outline) -> Condition:
    return o.conds[0][0] if isinstance(o, OutlineLeaf) else o.pre[0]


def outline_post(o: Outline) -> Condition:
    return o.conds[-1][-1] if isinstance(o, OutlineLeaf) else o.post[-1]


def outline_par_struct(o: Outline) -> ParStruct:
    """The program under an outline, with conditions erased."""
    if isinstance(o, OutlineLeaf):
        stmt: Optional[Stmt] = None
        for s in o.stmts:
            stmt = s if stmt is None else Seq(stmt, s)
        return PLeaf(stmt if stmt is not None else Skip())
    left = outline_par_struct(o.left)
    right = outline_par_struct(o.right)
    if o.kind == "par":
        return PPar(left, right)
    return PNest(o.level, left, right)


# ------------------------------------------------------------------
# Declarations
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelDecl:
    name: str
    capacity: int
    domain: tuple[int, int]  # inclusive lo..hi


@dataclass(frozen=True)
class Declarations:
    variables: tuple[str, ...]
    channels: tuple[ChannelDecl, ...]

    def channel(self, name: str) -> ChannelDecl:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_overrides(self, cap: Optional[int] = None,
                       domain: Optional[tuple[int, int]] = None) -> "Declarations":
        chans = tuple(
            ChannelDecl(c.name,
                        cap if cap is not None else c.capacity,
                        domain if domain is not None else c.domain)
            for c in self.channels)
        return Declarations(self.variables, chans)


@dataclass(frozen=True)
class ProgramFile:
    decls: Declarations
    body: ParStruct


@dataclass(frozen=True)
class SpecFile:
    decls: Declarations
    outline: Outline


# ------------------------------------------------------------------
# Parser
# ------------------------------------------------------------------

class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.pos = 0
        self.decls: Optional[Declarations] = None

    # -- token plumbing ------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            t = self.peek()
            got = t.text if t.kind != "eof" else "end of input"
            raise SourceError(f"expected {text!r}, found {got!r}", t.line, t.col)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise SourceError(f"expected {what}, found {t.text!r}", t.line, t.col)
        return self.next()

    def expect_int(self) -> Token:
        t = self.peek()
        if t.kind != "int":
            raise SourceError(f"expected integer, found {t.text!r}", t.line, t.col)
        return self.next()

    def error(self, message: str) -> SourceError:
        t = self.peek()
        return SourceError(message, t.line, t.col)

    # -- names ---------------------------------------------------------

    def check_var(self, tok: Token) -> str:
        if self.decls and tok.text not in self.decls.variables:
            raise SourceError(f"undeclared variable {tok.text!r}", tok.line, tok.col)
        return tok.text

    def check_chan(self, tok: Token) -> str:
        if self.decls and all(c.name != tok.text for c in self.decls.channels):
            raise SourceError(f"undeclared channel {tok.text!r}", tok.line, tok.col)
        return tok.text

    # -- header ----------------------------------------------------------

    def parse_header(self) -> Declarations:
        variables: list[str] = []
        channels: list[ChannelDecl] = []
        while self.at("vars") or self.at("chans"):
            if self.accept("vars"):
                while True:
                    variables.append(self.expect_ident("variable name").text)
                    if not self.accept(","):
                        break
                self.expect(":")
                self.expect("int")
                self.expect(";")
            else:
                self.expect("chans")
                while True:
                    name = self.expect_ident("channel name").text
                    self.expect(":")
                    self.expect("cap")
                    self.expect("=")
                    if self.at("inf"):
                        t = self.peek()
                        raise SourceError(
                            "unbounded channel capacity is not supported: "
                            "exploration is bounded, declare a finite cap",
                            t.line, t.col)
                    cap = self.expect_int().value
                    if cap < 1:
                        raise self.error("channel capacity must be at least 1")
                    self.expect("dom")
                    self.expect("=")
                    lo = self.expect_int().value
                    self.expect("..")
                    hi = self.expect_int().value
                    if hi < lo:
                        raise self.error("empty channel domain")
                    channels.append(ChannelDecl(name, cap, (lo, hi)))
                    if not self.accept(","):
                        break
                self.expect(";")
        seen: set[str] = set()
        for name in variables + [c.name for c in channels]:
            if name in seen:
                raise self.error(f"duplicate declaration of {name!r}")
            seen.add(name)
        self.decls = Declarations(tuple(variables), tuple(channels))
        return self.decls

    # -- expressions -----------------------------------------------------

    def parse_expr(self) -> Expr:
        left = self.parse_expr_atom()
        while self.at("+") or self.at("-"):
            op = self.next().text
            left = BinOp(op, left, self.parse_expr_atom())
        return left

    def parse_expr_atom(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Lit(t.value)
        if t.kind == "ident":
            self.next()
            return Var(self.check_var(t))
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        raise self.error(f"expected expression, found {t.text!r}")

    def parse_bool(self) -> BoolExpr:
        left = self.parse_bool_atom()
        while self.at("/\\"):
            self.next()
            left = BAnd(left, self.parse_bool_atom())
        return left

    def parse_bool_atom(self) -> BoolExpr:
        if self.accept("true"):
            return BTrue()
        if self.accept("false"):
            return BFalse()
        if self.accept("!"):
            return BNot(self.parse_bool_atom())
        if self.at("("):
            save = self.pos
            self.next()
            try:
                b = self.parse_bool()
                self.expect(")")
                return b
            except SourceError:
                self.pos = save
        left = self.parse_expr()
        t = self.peek()
        if t.text not in ("=", "!=", "<", "<=", ">", ">="):
            raise self.error("expected comparison operator")
        self.next()
        return Cmp(t.text, left, self.parse_expr())

    # -- statements -------------------------------------------------------

    def parse_stmt_seq(self) -> Stmt:
        stmt = self.parse_stmt()
        while self.accept(";"):
            stmt = Seq(stmt, self.parse_stmt())
        return stmt

    def parse_stmt(self) -> Stmt:
        if self.at("if"):
            self.next()
            cond = self.parse_bool()
            self.expect("then")
            then_body = self.parse_stmt()
            self.expect("else")
            else_body = self.parse_stmt()
            return If(cond, then_body, else_body)
        if self.at("while"):
            self.next()
            cond = self.parse_bool()
            self.expect("do")
            return While(cond, self.parse_stmt())
        if self.at("when"):
            self.next()
            guard = self.parse_temporal()
            self.expect("do")
            return When(guard, self.parse_stmt())
        if self.at("{"):
            self.next()
            body = self.parse_stmt_seq()
            self.expect("}")
            return self.maybe_owned(body)
        return self.maybe_owned(self.parse_atomic_stmt())

    def maybe_owned(self, stmt: Stmt) -> Stmt:
        if self.at("@"):
            self.next()
            system = self.expect_ident("system name").text
            return Owned(stmt, system)
        return stmt

    def parse_atomic_stmt(self) -> Stmt:
        if self.accept("skip"):
            return Skip()
        if self.at("send"):
            self.next()
            self.expect("(")
            expr = self.parse_expr()
            self.expect(",")
            chan = self.check_chan(self.expect_ident("channel name"))
            self.expect(")")
            return Send(expr, chan)
        if self.at("["):
            self.next()
            addr = self.parse_expr()
            self.expect("]")
            self.expect(":=")
            return HeapWrite(addr, self.parse_expr())
        t = self.peek()
        if t.kind == "ident":
            self.next()
            target = self.check_var(t)
            self.expect(":=")
            if self.at("receive"):
                self.next()
                self.expect("(")
                chan = self.check_chan(self.expect_ident("channel name"))
                self.expect(")")
                return Receive(target, chan)
            if self.at("["):
                self.next()
                addr = self.parse_expr()
                self.expect("]")
                return HeapRead(target, addr)
            return Assign(target, self.parse_expr())
        raise self.error(f"expected statement, found {t.text!r}")

    # -- parallel structure -------------------------------------------------

    def parse_par(self) -> ParStruct:
        left = self.parse_par_level()
        while self.at("||") and self.peek(1).text == "@":
            op = self.next()
            self.next()  # '@'
            level = self.expect_int().value
            right = self.parse_par_level()
            self.check_nest(left, right, level, op)
            left = PNest(level, left, right)
        return left

    def parse_par_level(self) -> ParStruct:
        left = self.parse_par_unit()
        while self.at("||") and self.peek(1).text != "@":
            op = self.next()
            right = self.parse_par_unit()
            for side in (left, right):
                if isinstance(side, PNest):
                    raise SourceError(
                        "program-level '||' cannot compose system-level '||@' groups",
                        op.line, op.col)
            left = PPar(left, right)
        return left

    def parse_par_unit(self) -> ParStruct:
        if self.at("("):
            self.next()
            inner = self.parse_par()
            self.expect(")")
            return inner
        return PLeaf(self.parse_stmt_seq())

    @staticmethod
    def top_nest_level(p: ParStruct) -> Optional[int]:
        return p.level if isinstance(p, PNest) else None

    def check_nest(self, left: ParStruct, right: ParStruct, level: int, tok: Token):
        for side in (left, right):
            inner = self.top_nest_level(side)
            if inner is not None and inner >= level:
                raise SourceError(
                    f"nest level {inner} must be strictly below enclosing level {level}",
                    tok.line, tok.col)

    # -- temporal formulas ----------------------------------------------------

    def parse_temporal(self) -> TemporalFormula:
        return self.parse_t_implies()

    def parse_t_implies(self) -> TemporalFormula:
        left = self.parse_t_or()
        if self.accept("->"):
            right = self.parse_t_implies()
            return TNot(TAnd(left, TNot(right)))
        return left

    def parse_t_or(self) -> TemporalFormula:
        left = self.parse_t_and()
        while self.accept("\\/"):
            right = self.parse_t_and()
            left = TNot(TAnd(TNot(left), TNot(right)))
        return left

    def parse_t_and(self) -> TemporalFormula:
        left = self.parse_t_until()
        while self.at("/\\"):
            self.next()
            left = TAnd(left, self.parse_t_until())
        return left

    def parse_t_until(self) -> TemporalFormula:
        left = self.parse_t_unary()
        if self.accept("U"):
            return TUntil(left, self.parse_t_until())
        return left

    def parse_t_unary(self) -> TemporalFormula:
        if self.accept("!"):
            return TNot(self.parse_t_unary())
        if self.accept("X"):
            return TNext(self.parse_t_unary())
        if self.accept("G"):
            return t_always(self.parse_t_unary())
        if self.accept("F"):
            return t_eventually(self.parse_t_unary())
        if self.accept("true"):
            return T_TOP
        if self.accept("false"):
            return t_false()
        if self.at("("):
            self.next()
            f = self.parse_temporal()
            self.expect(")")
            return f
        label = self.parse_wrapped_label()
        if self.accept("<"):
            return TBefore(label, self.parse_wrapped_label())
        return TOccurred(label)

    def parse_wrapped_label(self) -> ActionLabel:
        # accept the explicit occurred(...) spelling of an atom
        if self.peek().text == "occurred" and self.peek(1).text == "(":
            self.next()
            self.next()
            label = self.parse_action_label()
            self.expect(")")
            return label
        return self.parse_action_label()

    def parse_action_label(self) -> ActionLabel:
        t = self.peek()
        if t.kind == "kw" and t.text == "skip":
            self.next()
            return self.finish_label("skip")
        chan = self.expect_ident("action label")
        if self.accept("!"):
            msg = self.parse_expr_atom()
            return self.finish_label(f"{self.check_chan(chan)}!{pp_expr(msg)}")
        if self.accept("?"):
            var = self.expect_ident("variable name")
            return self.finish_label(f"{self.check_chan(chan)}?{self.check_var(var)}")
        raise self.error("expected '!' or '?' in action label")

    def finish_label(self, text: str) -> ActionLabel:
        system = None
        if self.accept("@"):
            system = self.expect_ident("system name").text
        return ActionLabel(text, system)

    # A formula in the native position must not consume the top-level
    # '/\' that separates it from the spatial assertion.

    def parse_t_pair_left(self) -> TemporalFormula:
        return self.parse_t_until()

    # -- assertions ----------------------------------------------------------

    def parse_assertion(self) -> Assertion:
        left = self.parse_a_or()
        if self.accept("->"):
            return AImplies(left, self.parse_assertion())
        return left

    def parse_a_or(self) -> Assertion:
        left = self.parse_a_and()
        while self.accept("\\/"):
            left = AOr(left, self.parse_a_and())
        return left

    def parse_a_and(self) -> Assertion:
        left = self.parse_a_sep()
        while self.at("/\\"):
            self.next()
            left = AAnd(left, self.parse_a_sep())
        return left

    def parse_a_sep(self) -> Assertion:
        left = self.parse_a_wand()
        while self.at("*"):
            self.next()
            left = ASep(left, self.parse_a_wand())
        return left

    def parse_a_wand(self) -> Assertion:
        left = self.parse_a_unary()
        if self.accept("-*"):
            return AWand(left, self.parse_a_wand())
        return left

    def parse_a_unary(self) -> Assertion:
        if self.accept("emp"):
            return AEmp()
        if self.accept("true"):
            return ABool(BTrue())
        if self.accept("false"):
            return ABool(BFalse())
        if self.accept("!"):
            return ANot(self.parse_a_unary())
        for kw, node in (("full", ABufFull), ("empty", ABufEmpty)):
            if self.at(kw):
                self.next()
                self.expect("(")
                chan = self.check_chan(self.expect_ident("channel name"))
                self.expect(")")
                return node(chan)
        if self.at("peek"):
            self.next()
            self.expect("(")
            chan = self.check_chan(self.expect_ident("channel name"))
            self.expect(")")
            self.expect("=")
            return ABufPeek(chan, self.parse_expr())
        # An atom is either a comparison / points-to headed by an
        # expression, or a parenthesised assertion.
        save = self.pos
        try:
            e = self.parse_expr()
            t = self.peek()
            if t.text == "|->":
                self.next()
                if self.at("-*"):
                    # The wildcard dash followed by a separating star
                    # lexes as the wand token; split it in place (the
                    # splice is stable under parser backtracking).
                    tk = self.peek()
                    self.toks[self.pos:self.pos + 1] = [
                        Token("op", "-", tk.line, tk.col),
                        Token("op", "*", tk.line, tk.col + 1),
                    ]
                if self.at("-"):
                    self.next()
                    return APointsTo(e, None)
                return APointsTo(e, self.parse_expr())
            if t.text in ("=", "!=", "<", "<=", ">", ">="):
                self.next()
                return ABool(Cmp(t.text, e, self.parse_expr()))
            raise self.error("expected '|->' or comparison")
        except SourceError:
            self.pos = save
        if self.accept("("):
            a = self.parse_assertion()
            self.expect(")")
            return a
        raise self.error(f"expected assertion, found {self.peek().text!r}")

    # -- conditions -------------------------------------------------------------

    def parse_condition(self) -> Condition:
        self.expect("{")
        foreign = self.parse_temporal()
        self.expect("|")
        groups = self.parse_native_groups()
        self.expect("}")
        return Condition(foreign, groups)

    def parse_native_groups(self) -> tuple[tuple[TemporalFormula, Assertion], ...]:
        if self.at("("):
            save = self.pos
            try:
                groups = [self.parse_paren_group()]
                while self.at("*"):
                    self.next()
                    groups.append(self.parse_paren_group())
                if self.at("}"):
                    return tuple(groups)
            except SourceError:
                pass
            self.pos = save
        save = self.pos
        try:
            native = self.parse_t_pair_left()
            self.expect("/\\")
            return ((native, self.parse_assertion()),)
        except SourceError:
            self.pos = save
        # a native condition may elide a trivial temporal part
        return ((T_TOP, self.parse_assertion()),)

    def parse_paren_group(self) -> tuple[TemporalFormula, Assertion]:
        self.expect("(")
        native = self.parse_t_pair_left()
        self.expect("/\\")
        assertion = self.parse_assertion()
        self.expect(")")
        return (native, assertion)

    # -- outlines ----------------------------------------------------------------

    def parse_outline(self) -> Outline:
        pre = self.parse_cond_stack()
        if self.at("("):
            node = self.parse_outline_comp(pre)
        else:
            node = self.parse_outline_leaf(pre)
        return node

    def parse_cond_stack(self) -> tuple[Condition, ...]:
        conds = [self.parse_condition()]
        while self.at("{"):
            conds.append(self.parse_condition())
        return tuple(conds)

    def parse_outline_comp(self, pre: tuple[Condition, ...]) -> Outline:
        self.expect("(")
        left = self.parse_outline()
        op = self.expect("||")
        kind, level = "par", None
        if self.accept("@"):
            kind, level = "nest", self.expect_int().value
        right = self.parse_outline()
        self.expect(")")
        post = self.parse_cond_stack()
        left_p = outline_par_struct(left)
        right_p = outline_par_struct(right)
        if kind == "par":
            for side in (left_p, right_p):
                if isinstance(side, PNest):
                    raise SourceError(
                        "program-level '||' cannot compose system-level '||@' groups",
                        op.line, op.col)
        else:
            self.check_nest(left_p, right_p, level, op)
        return OutlineComp(kind, level, left, right, pre, post)

    def parse_outline_leaf(self, pre: tuple[Condition, ...]) -> Outline:
        conds = [pre]
        stmts = []
        while True:
            stmts.append(self.parse_stmt())
            conds.append(self.parse_cond_stack())
            if not self.stmt_follows():
                break
        return OutlineLeaf(tuple(conds), tuple(stmts))

    def stmt_follows(self) -> bool:
        t = self.peek()
        if t.kind == "ident":
            return True
        return t.text in ("skip", "send", "if", "while", "when", "[")


def parse_program(text: str) -> ProgramFile:
    """Parse a program file; raises SourceError with line/column on failure."""
    p = Parser(text)
    decls = p.parse_header()
    body = p.parse_par()
    t = p.peek()
    if t.kind != "eof":
        raise SourceError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    reject_when(body)
    return ProgramFile(decls, body)


def parse_spec(text: str) -> SpecFile:
    """Parse a proof-outline file."""
    p = Parser(text)
    decls = p.parse_header()
    outline = p.parse_outline()
    t = p.peek()
    if t.kind != "eof":
        raise SourceError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return SpecFile(decls, outline)


def parse_condition_text(text: str, decls: Optional[Declarations] = None) -> Condition:
    """Parse a standalone condition, e.g. for CLI --pre/--post flags.

    Accepts either the braced ``{G | g /\\ P}`` form or a bare assertion.
    """
    p = Parser(text)
    p.decls = decls
    if p.at("{"):
        cond = p.parse_condition()
    else:
        cond = plain_condition(p.parse_assertion())
    t = p.peek()
    if t.kind != "eof":
        raise SourceError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return cond


def parse_temporal_text(text: str, decls: Optional[Declarations] = None) -> TemporalFormula:
    p = Parser(text)
    p.decls = decls
    f = p.parse_temporal()
    t = p.peek()
    if t.kind != "eof":
        raise SourceError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return f


def reject_when(p: ParStruct) -> None:
    for stmt in iter_leaf_stmts(p):
        for s in iter_atoms(stmt):
            if isinstance(s, When):
                raise SourceError("when-guards belong to proof outlines, "
                                  "not to program files", 1, 1)


def iter_leaf_stmts(p: ParStruct) -> Iterator[Stmt]:
    if isinstance(p, PLeaf):
        yield p.stmt
    else:
        yield from iter_leaf_stmts(p.left)
        yield from iter_leaf_stmts(p.right)


def iter_atoms(stmt: Stmt) -> Iterator[Stmt]:
    """All action-level statements in program order, unwrapping seq only."""
    if isinstance(stmt, Seq):
        yield from iter_atoms(stmt.first)
        yield from iter_atoms(stmt.second)
    else:
        yield stmt


# ------------------------------------------------------------------
# Pretty-printer
# ------------------------------------------------------------------

def pp_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        return str(e.value)
    left = pp_expr(e.left)  # left-assoc chains reparse identically
    right = pp_expr(e.right)
    if isinstance(e.right, BinOp):
        right = f"({right})"
    return f"{left} {e.op} {right}"


def pp_bool(b: BoolExpr) -> str:
    if isinstance(b, BTrue):
        return "true"
    if isinstance(b, BFalse):
        return "false"
    if isinstance(b, Cmp):
        return f"{pp_expr(b.left)} {b.op} {pp_expr(b.right)}"
    if isinstance(b, BAnd):
        left = pp_bool(b.left)
        right = pp_bool(b.right)
        if isinstance(b.right, BAnd):
            right = f"({right})"
        return f"{left} /\\ {right}"
    inner = pp_bool(b.arg)
    if isinstance(b.arg, (BAnd, Cmp)):
        inner = f"({inner})"
    return f"!{inner}"


def action_text(stmt: Stmt) -> str:
    """Canonical text of an atomic statement, as used in action labels."""
    if isinstance(stmt, Owned):
        return action_text(stmt.body)
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assign):
        return f"{stmt.target}:={pp_expr(stmt.expr)}"
    if isinstance(stmt, HeapRead):
        return f"{stmt.target}:=[{pp_expr(stmt.address)}]"
    if isinstance(stmt, HeapWrite):
        return f"[{pp_expr(stmt.address)}]:={pp_expr(stmt.expr)}"
    if isinstance(stmt, Send):
        return f"{stmt.channel}!{pp_expr(stmt.expr)}"
    if isinstance(stmt, Receive):
        return f"{stmt.channel}?{stmt.target}"
    raise ValueError(f"not an atomic statement: {stmt!r}")


def pp_stmt(stmt: Stmt) -> str:
    if isinstance(stmt, Seq):
        return f"{pp_stmt_block(stmt.first)}; {pp_stmt_block(stmt.second, right=True)}"
    if isinstance(stmt, If):
        return (f"if {pp_bool(stmt.cond)} then {pp_stmt_body(stmt.then_body)}"
                f" else {pp_stmt_body(stmt.else_body)}")
    if isinstance(stmt, While):
        return f"while {pp_bool(stmt.cond)} do {pp_stmt_body(stmt.body)}"
    if isinstance(stmt, When):
        return f"when {pp_temporal(stmt.guard)} do {pp_stmt_body(stmt.body)}"
    if isinstance(stmt, Owned):
        body = pp_stmt(stmt.body)
        if isinstance(stmt.body, (Seq, If, While, When)):
            body = "{ " + body + " }"
        return f"{body} @ {stmt.system}"
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assign):
        return f"{stmt.target} := {pp_expr(stmt.expr)}"
    if isinstance(stmt, HeapRead):
        return f"{stmt.target} := [{pp_expr(stmt.address)}]"
    if isinstance(stmt, HeapWrite):
        return f"[{pp_expr(stmt.address)}] := {pp_expr(stmt.expr)}"
    if isinstance(stmt, Send):
        return f"send({pp_expr(stmt.expr)}, {stmt.channel})"
    if isinstance(stmt, Receive):
        return f"{stmt.target} := receive({stmt.channel})"
    raise ValueError(f"unknown statement {stmt!r}")


def pp_stmt_block(stmt: Stmt, right: bool = False) -> str:
    # Sequences parse left-associatively; brace a seq in the right slot.
    if right and isinstance(stmt, Seq):
        return "{ " + pp_stmt(stmt) + " }"
    return pp_stmt(stmt)


def pp_stmt_body(stmt: Stmt) -> str:
    if isinstance(stmt, Seq):
        return "{ " + pp_stmt(stmt) + " }"
    return pp_stmt(stmt)


def pp_par(p: ParStruct) -> str:
    if isinstance(p, PLeaf):
        return pp_stmt(p.stmt)
    if isinstance(p, PPar):
        return f"{pp_par_side(p.left)} || {pp_par_side(p.right, right=True)}"
    return (f"{pp_nest_side(p.left, p.level)} ||@{p.level} "
            f"{pp_nest_side(p.right, p.level, right=True)}")


def pp_par_side(p: ParStruct, right: bool = False) -> str:
    if isinstance(p, PPar) and right:
        return f"({pp_par(p)})"
    return pp_par(p)


def pp_nest_side(p: ParStruct, level: int, right: bool = False) -> str:
    if isinstance(p, PLeaf):
        return pp_par(p)
    if isinstance(p, PPar):
        return f"({pp_par(p)})"
    return f"({pp_par(p)})" if (right or p.level >= level) else pp_par(p)


def pp_temporal(f: TemporalFormula, prec: int = 0) -> str:
    # precedence: -> 1, \/ 2, /\ 3, U 4, unary 5
    if isinstance(f, TTop):
        return "true"
    if isinstance(f, TOccurred):
        return str(f.label)
    if isinstance(f, TBefore):
        return f"{f.first} < {f.second}"
    if isinstance(f, TNot):
        return f"!{pp_temporal(f.arg, 5)}"
    if isinstance(f, TNext):
        return f"X {pp_temporal(f.arg, 5)}"
    if isinstance(f, TAnd):
        text = f"{pp_temporal(f.left, 3)} /\\ {pp_temporal(f.right, 4)}"
        return f"({text})" if prec > 3 else text
    if isinstance(f, TUntil):
        text = f"{pp_temporal(f.left, 5)} U {pp_temporal(f.right, 4)}"
        return f"({text})" if prec > 4 else text
    raise ValueError(f"unknown temporal formula {f!r}")


def pp_assertion(a: Assertion, prec: int = 0) -> str:
    # precedence: -> 1, \/ 2, /\ 3, * 4, -* 5, unary 6
    if isinstance(a, AEmp):
        return "emp"
    if isinstance(a, ABool):
        text = pp_bool(a.expr)
        # boolean /\ would reparse at the assertion level; keep it bracketed
        return f"({text})" if isinstance(a.expr, BAnd) else text
    if isinstance(a, APointsTo):
        rhs = "-" if a.value is None else pp_expr(a.value)
        return f"{pp_expr(a.address)} |-> {rhs}"
    if isinstance(a, ABufFull):
        return f"full({a.channel})"
    if isinstance(a, ABufEmpty):
        return f"empty({a.channel})"
    if isinstance(a, ABufPeek):
        return f"peek({a.channel}) = {pp_expr(a.expr)}"
    if isinstance(a, ANot):
        return f"!{pp_assertion(a.arg, 6)}"
    if isinstance(a, AImplies):
        text = f"{pp_assertion(a.left, 2)} -> {pp_assertion(a.right, 1)}"
        return f"({text})" if prec > 1 else text
    if isinstance(a, AOr):
        text = f"{pp_assertion(a.left, 2)} \\/ {pp_assertion(a.right, 3)}"
        return f"({text})" if prec > 2 else text
    if isinstance(a, AAnd):
        text = f"{pp_assertion(a.left, 3)} /\\ {pp_assertion(a.right, 4)}"
        return f"({text})" if prec > 3 else text
    if isinstance(a, ASep):
        text = f"{pp_assertion(a.left, 4)} * {pp_assertion(a.right, 5)}"
        return f"({text})" if prec > 4 else text
    if isinstance(a, AWand):
        text = f"{pp_assertion(a.left, 6)} -* {pp_assertion(a.right, 5)}"
        return f"({text})" if prec > 5 else text
    raise ValueError(f"unknown assertion {a!r}")


def pp_condition(c: Condition) -> str:
    if len(c.groups) == 1:
        g, p = c.groups[0]
        native = f"{pp_temporal(g, 4)} /\\ {pp_assertion(p, 4)}"
    else:
        native = " * ".join(
            f"({pp_temporal(g, 4)} /\\ {pp_assertion(p, 4)})" for g, p in c.groups)
    return "{ " + pp_temporal(c.foreign) + " | " + native + " }"


def pp_decls(d: Declarations) -> str:
    lines = []
    if d.variables:
        lines.append("vars " + ", ".join(d.variables) + " : int;")
    if d.channels:
        decls = ", ".join(
            f"{c.name} : cap={c.capacity} dom={c.domain[0]}..{c.domain[1]}"
            for c in d.channels)
        lines.append("chans " + decls + ";")
    return "\n".join(lines)


def pp_outline(o: Outline, indent: str = "") -> str:
    lines: list[str] = []
    if isinstance(o, OutlineLeaf):
        for c in o.conds[0]:
            lines.append(indent + pp_condition(c))
        for stmt, conds in zip(o.stmts, o.conds[1:]):
            lines.append(indent + pp_stmt(stmt))
            for c in conds:
                lines.append(indent + pp_condition(c))
        return "\n".join(lines)
    for c in o.pre:
        lines.append(indent + pp_condition(c))
    lines.append(indent + "(")
    lines.append(pp_outline(o.left, indent + "  "))
    lines.append(indent + ("||" if o.kind == "par" else f"||@{o.level}"))
    lines.append(pp_outline(o.right, indent + "  "))
    lines.append(indent + ")")
    for c in o.post:
        lines.append(indent + pp_condition(c))
    return "\n".join(lines)


def pretty_print(node) -> str:
    """Render a ParStruct, Outline, ProgramFile or SpecFile back to source."""
    if isinstance(node, (PLeaf, PPar, PNest)):
        return pp_par(node)
    if isinstance(node, (OutlineLeaf, OutlineComp)):
        return pp_outline(node)
    if isinstance(node, ProgramFile):
        return pp_decls(node.decls) + "\n\n" + pp_par(node.body) + "\n"
    if isinstance(node, SpecFile):
        return pp_decls(node.decls) + "\n\n" + pp_outline(node.outline) + "\n"
    raise TypeError(f"cannot pretty-print {type(node).__name__}")
