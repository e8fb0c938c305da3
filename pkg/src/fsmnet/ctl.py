"""CTL formulas: AST, parser and printer.

Grammar (loosest binding first)::

    f ::= f '->' f | f '|' f | f '&' f | '!' f
        | AX f | EX f | AF f | EF f | AG f | EG f
        | 'A' '[' f 'U' f ']' | 'E' '[' f 'U' f ']'
        | '(' f ')' | var | var '=' value | var '!=' value | TRUE | FALSE

``->`` is right-associative. A bare ``var`` means ``var = TRUE``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union


class CtlSyntaxError(ValueError):
    def __init__(self, position: int, message: str = "syntax error"):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Formula:
    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Atom(Formula):
    var: str
    value: Union[bool, str] = True


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class AX(Formula):
    arg: Formula


@dataclass(frozen=True)
class EX(Formula):
    arg: Formula


@dataclass(frozen=True)
class AF(Formula):
    arg: Formula


@dataclass(frozen=True)
class EF(Formula):
    arg: Formula


@dataclass(frozen=True)
class AG(Formula):
    arg: Formula


@dataclass(frozen=True)
class EG(Formula):
    arg: Formula


@dataclass(frozen=True)
class AU(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class EU(Formula):
    left: Formula
    right: Formula


UNARY_TEMPORAL = {"AX": AX, "EX": EX, "AF": AF, "EF": EF, "AG": AG, "EG": EG}
KEYWORDS = set(UNARY_TEMPORAL) | {"A", "E", "U", "TRUE", "FALSE"}

_TOKEN = re.compile(r"\s*(?:(->)|(!=)|([()\[\]!&|=])|([A-Za-z_][A-Za-z0-9_.]*|\d+))")


def _tokenize(text: str) -> List[tuple]:
    tokens = []
    pos = 0
    while text[pos:].strip():
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = len(text) - len(text[pos:].lstrip())
            raise CtlSyntaxError(bad, f"unexpected character {text[bad]!r}")
        tok = m.group(1) or m.group(2) or m.group(3) or m.group(4)
        tokens.append((tok, m.start(m.lastindex)))
        pos = m.end()
    tokens.append(("<eof>", len(text)))
    return tokens


def _bool_literal(tok: str):
    low = tok.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    return None


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> str:
        return self.tokens[self.i][0]

    @property
    def pos(self) -> int:
        return self.tokens[self.i][1]

    def take(self, expected: str | None = None) -> str:
        tok = self.tok
        if expected is not None and tok != expected:
            raise CtlSyntaxError(self.pos, f"expected {expected!r}, found {tok!r}")
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.implies()
        if self.tok != "<eof>":
            raise CtlSyntaxError(self.pos, f"unexpected {self.tok!r}")
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.tok == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.tok == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.tok == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.tok
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok in UNARY_TEMPORAL:
            self.take()
            return UNARY_TEMPORAL[tok](self.unary())
        if tok in ("A", "E"):
            self.take()
            self.take("[")
            left = self.implies()
            self.take("U")
            right = self.implies()
            self.take("]")
            return AU(left, right) if tok == "A" else EU(left, right)
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        return self.atom()

    def atom(self) -> Formula:
        tok, pos = self.tok, self.pos
        if tok == "TRUE":
            self.take()
            return Const(True)
        if tok == "FALSE":
            self.take()
            return Const(False)
        if tok == "<eof>" or tok in KEYWORDS or not re.match(r"[A-Za-z_]", tok):
            raise CtlSyntaxError(pos, f"expected a proposition, found {tok!r}")
        self.take()
        if self.tok in ("=", "!="):
            op = self.take()
            vtok, vpos = self.tok, self.pos
            if vtok == "<eof>" or vtok in ("(", ")", "[", "]", "!", "&", "|", "->", "=", "!="):
                raise CtlSyntaxError(vpos, "expected a value")
            self.take()
            lit = _bool_literal(vtok)
            atom = Atom(tok, vtok if lit is None else lit)
            return Not(atom) if op == "!=" else atom
        return Atom(tok, True)


def parse_ctl(text: str) -> Formula:
    return _Parser(text).parse()


def _value_text(v) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    return str(v)


_PREC = {Implies: 1, Or: 2, And: 3}


def to_text(f: Formula) -> str:
    """Print a formula in the same concrete syntax the parser reads."""
    def go(f: Formula, ctx: int) -> str:
        if isinstance(f, Const):
            return "TRUE" if f.value else "FALSE"
        if isinstance(f, Atom):
            if f.value is True:
                return f.var
            return f"{f.var} = {_value_text(f.value)}"
        if isinstance(f, Not):
            return "!" + go(f.arg, 4)
        for cls, name in ((AX, "AX"), (EX, "EX"), (AF, "AF"), (EF, "EF"), (AG, "AG"), (EG, "EG")):
            if isinstance(f, cls):
                return f"{name} {go(f.arg, 4)}"
        if isinstance(f, (AU, EU)):
            q = "A" if isinstance(f, AU) else "E"
            return f"{q} [ {go(f.left, 0)} U {go(f.right, 0)} ]"
        prec = _PREC[type(f)]
        op = {Implies: "->", Or: "|", And: "&"}[type(f)]
        if isinstance(f, Implies):
            text = f"{go(f.left, prec + 1)} {op} {go(f.right, prec)}"
        else:
            text = f"{go(f.left, prec)} {op} {go(f.right, prec + 1)}"
        return f"({text})" if prec < ctx else text
    return go(f, 0)


def depth(f: Formula) -> int:
    if isinstance(f, (Const, Atom)):
        return 0
    if isinstance(f, (Not, AX, EX, AF, EF, AG, EG)):
        return 1 + depth(f.arg)
    return 1 + max(depth(f.left), depth(f.right))


def load_specs(path: Union[str, Path]) -> List[str]:
    """One formula per line; blank lines and ``#`` comments are skipped."""
    specs = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            specs.append(line)
    return specs
