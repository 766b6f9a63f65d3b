"""Model data types, the textual model DSL, state augmentation and emitters.

The DSL is line oriented (``#`` starts a comment):

    model "name"
    states x1 x2
    params th1 th2
    known_inputs u1[derivs=2]
    unknown_inputs w1[l=1]
    const mu = 0.021/(24*60)
    ddt x1 = w1 + th1*x1^2
    output y1 = x1
    ic x1 = 0            # optional

Expressions use ``+ - * / ^`` and parentheses; decimals are parsed exactly.
Named constants are substituted into expressions at parse time and retained
for emission.  Initial-condition expressions may reference parameters,
constants and states (a state symbol inside an ``ic`` line stands for that
state's initial value).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import sympy as sp

from . import symcore as sc


class Kind(str, enum.Enum):
    STATE = "state"
    PARAMETER = "parameter"
    KNOWN_INPUT = "known-input-derivative"
    UNKNOWN_INPUT = "unknown-input-derivative"
    OUTPUT = "output-alias"
    CONSTANT = "constant"


@dataclass(frozen=True)
class SymbolInfo:
    kind: Kind
    order: int = 0  # derivative order for input-derivative symbols


class ModelError(Exception):
    pass


class ParseError(ModelError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class InputDecl:
    symbol: sp.Symbol
    order: int  # derivs budget for known inputs, truncation l for unknown ones


@dataclass
class ModelSpec:
    """A rational ODE model with named states, parameters and inputs."""

    name: str
    states: list[sp.Symbol]
    params: list[sp.Symbol]
    known_inputs: list[InputDecl]
    unknown_inputs: list[InputDecl]
    consts: dict[sp.Symbol, sp.Rational]
    dynamics: dict[sp.Symbol, sp.Expr]
    outputs: list[tuple[str, sp.Expr]]
    ics: dict[sp.Symbol, sp.Expr] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    # -- structure ---------------------------------------------------------
    def validate(self) -> None:
        if not self.states:
            raise ModelError("model must declare at least one state")
        if not self.outputs:
            raise ModelError("model must declare at least one output")
        names: list[str] = []
        for s in self.all_declared():
            names.append(str(s))
        if len(names) != len(set(names)):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ModelError(f"duplicate declaration: {', '.join(dup)}")
        missing = [str(s) for s in self.states if s not in self.dynamics]
        if missing:
            raise ModelError(f"missing ddt equation for: {', '.join(missing)}")
        extra = [str(s) for s in self.dynamics if s not in self.states]
        if extra:
            raise ModelError(f"ddt equation for non-state: {', '.join(extra)}")
        allowed = set(self.states) | set(self.params) | \
            {d.symbol for d in self.known_inputs} | {d.symbol for d in self.unknown_inputs}
        for s, e in self.dynamics.items():
            bad = sc.model_symbols(e) - allowed
            if bad:
                raise ModelError(f"undeclared symbol in ddt {s}: {sorted(map(str, bad))}")
        for _, e in self.outputs:
            bad = sc.model_symbols(e) - allowed
            if bad:
                raise ModelError(f"undeclared symbol in output: {sorted(map(str, bad))}")
        ic_allowed = set(self.params) | set(self.states)
        for s, e in self.ics.items():
            if s not in self.states:
                raise ModelError(f"ic for non-state {s}")
            bad = sc.model_symbols(e) - ic_allowed
            if bad:
                raise ModelError(f"undeclared symbol in ic {s}: {sorted(map(str, bad))}")

    def all_declared(self):
        out = list(self.states) + list(self.params)
        out += [d.symbol for d in self.known_inputs]
        out += [d.symbol for d in self.unknown_inputs]
        out += list(self.consts)
        return out

    def symbol_info(self) -> dict[sp.Symbol, SymbolInfo]:
        info = {s: SymbolInfo(Kind.STATE) for s in self.states}
        info.update({s: SymbolInfo(Kind.PARAMETER) for s in self.params})
        info.update({d.symbol: SymbolInfo(Kind.KNOWN_INPUT, 0) for d in self.known_inputs})
        info.update({d.symbol: SymbolInfo(Kind.UNKNOWN_INPUT, 0) for d in self.unknown_inputs})
        info.update({s: SymbolInfo(Kind.CONSTANT) for s in self.consts})
        return info

    def output_names(self) -> list[str]:
        return [n for n, _ in self.outputs]

    def structurally_equal(self, other: "ModelSpec") -> bool:
        if (self.name != other.name
                or self.states != other.states
                or self.params != other.params
                or self.known_inputs != other.known_inputs
                or self.unknown_inputs != other.unknown_inputs
                or self.consts != other.consts
                or self.output_names() != other.output_names()):
            return False
        for s in self.states:
            if sc.canonicalize(self.dynamics[s]) != sc.canonicalize(other.dynamics[s]):
                return False
        for (_, a), (_, b) in zip(self.outputs, other.outputs):
            if sc.canonicalize(a) != sc.canonicalize(b):
                return False
        if set(self.ics) != set(other.ics):
            return False
        for s in self.ics:
            if sc.canonicalize(self.ics[s]) != sc.canonicalize(other.ics[s]):
                return False
        return True


# ---------------------------------------------------------------------------
# augmentation

def deriv_symbol(base: sp.Symbol, k: int) -> sp.Symbol:
    return base if k == 0 else sp.Symbol(f"{base}_d{k}")


@dataclass
class AugmentedSystem:
    """States extended with parameters and truncated unknown-input chains."""

    model: ModelSpec
    l: int
    u_derivs: int
    x_aug: list[sp.Symbol]
    f_aug: list[sp.Expr]
    outputs: list[sp.Expr]
    w_chains: dict[sp.Symbol, list[sp.Symbol]]
    u_chains: dict[sp.Symbol, list[sp.Symbol]]

    @property
    def dim(self) -> int:
        return len(self.x_aug)

    def index(self, s: sp.Symbol) -> int:
        return self.x_aug.index(s)

    def transformable(self) -> list[sp.Symbol]:
        """States, parameters and unknown-input symbols (order-0 only)."""
        return list(self.model.states) + list(self.model.params) + \
            [d.symbol for d in self.model.unknown_inputs]

    def known_chain_symbols(self) -> list[sp.Symbol]:
        out: list[sp.Symbol] = []
        for chain in self.u_chains.values():
            out.extend(chain)
        return out


def augment(m: ModelSpec, l: Optional[int] = None, u_derivs: Optional[int] = None) -> AugmentedSystem:
    """Build the augmented system: parameters get zero dynamics, each unknown
    input contributes a derivative chain truncated at order ``l`` (the final
    derivative is assumed zero)."""
    declared = {str(s) for s in m.all_declared()}
    x_aug: list[sp.Symbol] = list(m.states)
    f_aug: list[sp.Expr] = [m.dynamics[s] for s in m.states]
    x_aug += list(m.params)
    f_aug += [sp.Integer(0)] * len(m.params)
    w_chains: dict[sp.Symbol, list[sp.Symbol]] = {}
    for d in m.unknown_inputs:
        li = d.order if l is None else l
        chain = [deriv_symbol(d.symbol, k) for k in range(li + 1)]
        for s in chain[1:]:
            if str(s) in declared:
                raise ModelError(f"name collision with derivative symbol {s}")
        w_chains[d.symbol] = chain
        x_aug += chain
        f_aug += [chain[k + 1] for k in range(li)] + [sp.Integer(0)]
    u_chains: dict[sp.Symbol, list[sp.Symbol]] = {}
    for d in m.known_inputs:
        budget = d.order if u_derivs is None else u_derivs
        chain = [deriv_symbol(d.symbol, k) for k in range(budget + 1)]
        for s in chain[1:]:
            if str(s) in declared:
                raise ModelError(f"name collision with derivative symbol {s}")
        u_chains[d.symbol] = chain
    eff_l = l if l is not None else max((d.order for d in m.unknown_inputs), default=1)
    eff_u = u_derivs if u_derivs is not None else max((d.order for d in m.known_inputs), default=2)
    return AugmentedSystem(m, eff_l, eff_u, x_aug, f_aug,
                           [e for _, e in m.outputs], w_chains, u_chains)


# ---------------------------------------------------------------------------
# DSL parser

_KEYWORDS = {"model", "states", "params", "known_inputs", "unknown_inputs",
             "const", "ddt", "output", "ic"}


class _ExprParser:
    """Pratt parser for ``+ - * / ^`` expressions with exact decimals."""

    def __init__(self, text: str, line: int, col0: int, resolve):
        self.text = text
        self.line = line
        self.col0 = col0
        self.pos = 0
        self.resolve = resolve

    def error(self, msg: str):
        raise ParseError(msg, self.line, self.col0 + self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> sp.Expr:
        e = self.parse_sum()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error(f"unexpected {self.text[self.pos]!r}")
        return e

    def parse_sum(self) -> sp.Expr:
        e = self.parse_term()
        while True:
            ch = self.peek()
            if ch == "+":
                self.pos += 1
                e = e + self.parse_term()
            elif ch == "-":
                self.pos += 1
                e = e - self.parse_term()
            else:
                return e

    def parse_term(self) -> sp.Expr:
        e = self.parse_unary()
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                e = e * self.parse_unary()
            elif ch == "/":
                self.pos += 1
                e = e / self.parse_unary()
            else:
                return e

    def parse_unary(self) -> sp.Expr:
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return -self.parse_unary()
        if ch == "+":
            self.pos += 1
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> sp.Expr:
        base = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            expo = self.parse_exponent()
            return sc.fractional_power(base, expo)
        return base

    def parse_exponent(self) -> sp.Rational:
        ch = self.peek()
        neg = False
        if ch == "-":
            self.pos += 1
            neg = True
            ch = self.peek()
        if ch == "(":
            start = self.pos
            e = self.parse_atom()
            if not e.is_Rational:
                self.col0 += start
                self.pos = 0
                self.error("exponent must be an exact rational constant")
            val = sp.Rational(e)
        else:
            val = self.parse_number()
        return -val if neg else val

    def parse_number(self) -> sp.Rational:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        if start == self.pos:
            self.error("expected a number")
        try:
            return sc.rational_from_decimal(self.text[start:self.pos])
        except ValueError:
            self.pos = start
            self.error(f"bad numeric literal {self.text[start:self.pos]!r}")

    def parse_atom(self) -> sp.Expr:
        self.skip_ws()
        if self.pos >= len(self.text):
            self.error("unexpected end of expression")
        ch = self.text[self.pos]
        if ch == "(":
            self.pos += 1
            e = self.parse_sum()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return e
        if ch.isdigit() or ch == ".":
            return self.parse_number()
        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
                self.pos += 1
            name = self.text[start:self.pos]
            sym = self.resolve(name)
            if sym is None:
                self.col0 += start
                self.pos = 0
                self.error(f"undeclared symbol {name!r}")
            return sym
        self.error(f"unexpected {ch!r}")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _parse_decl_names(body: str, line_no: int, col0: int, default_key: str,
                      default_val: int) -> list[tuple[str, int]]:
    """Parse ``name[key=3] name2 ...`` declaration lists."""
    out = []
    pos = 0
    while pos < len(body):
        if body[pos] in " \t":
            pos += 1
            continue
        start = pos
        while pos < len(body) and (body[pos].isalnum() or body[pos] == "_"):
            pos += 1
        if start == pos:
            raise ParseError(f"bad declaration near {body[pos:]!r}", line_no, col0 + pos)
        name = body[start:pos]
        val = default_val
        if pos < len(body) and body[pos] == "[":
            end = body.find("]", pos)
            if end < 0:
                raise ParseError("missing ']'", line_no, col0 + pos)
            inner = body[pos + 1:end]
            key, _, num = inner.partition("=")
            if key.strip() != default_key or not num.strip().isdigit():
                raise ParseError(f"expected [{default_key}=<int>]", line_no, col0 + pos)
            val = int(num)
            pos = end + 1
        out.append((name, val))
    return out


def parse_model(text: str) -> ModelSpec:
    """Parse DSL source into a validated :class:`ModelSpec`."""
    lines = text.splitlines()
    name = None
    state_names: list[str] = []
    param_names: list[str] = []
    known: list[tuple[str, int]] = []
    unknown: list[tuple[str, int]] = []
    const_lines: list[tuple[str, str, int, int]] = []
    eq_lines: list[tuple[str, str, str, int, int]] = []

    for ln, raw in enumerate(lines, start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        word, _, rest = stripped.partition(" ")
        rest_col = indent + len(word) + 1
        if word == "model":
            q = rest.strip()
            if not (q.startswith('"') and q.endswith('"') and len(q) >= 2):
                raise ParseError('expected model "<name>"', ln, rest_col)
            name = q[1:-1]
        elif word == "states":
            state_names += [n for n, _ in _parse_decl_names(rest, ln, rest_col, "", 0)]
        elif word == "params":
            param_names += [n for n, _ in _parse_decl_names(rest, ln, rest_col, "", 0)]
        elif word == "known_inputs":
            known += _parse_decl_names(rest, ln, rest_col, "derivs", 2)
        elif word == "unknown_inputs":
            unknown += _parse_decl_names(rest, ln, rest_col, "l", 1)
        elif word == "const":
            lhs, eq, rhs = rest.partition("=")
            if not eq:
                raise ParseError("expected const <name> = <value>", ln, rest_col)
            const_lines.append((lhs.strip(), rhs.strip(), ln, rest_col + len(lhs) + 1))
        elif word in ("ddt", "output", "ic"):
            lhs, eq, rhs = rest.partition("=")
            if not eq:
                raise ParseError(f"expected {word} <name> = <expression>", ln, rest_col)
            eq_lines.append((word, lhs.strip(), rhs.strip(), ln, rest_col + len(lhs) + 1))
        else:
            raise ParseError(f"unknown keyword {word!r}", ln, indent)

    if name is None:
        raise ParseError("missing model declaration", 1, 0)
    if not state_names:
        raise ModelError("model must declare at least one state")

    seen: dict[str, str] = {}
    for group, names in (("state", state_names), ("param", param_names),
                         ("known input", [n for n, _ in known]),
                         ("unknown input", [n for n, _ in unknown]),
                         ("const", [n for n, _, _, _ in const_lines])):
        for n in names:
            if n in seen:
                raise ModelError(f"duplicate declaration: {n}")
            seen[n] = group

    states = [sp.Symbol(n) for n in state_names]
    params = [sp.Symbol(n) for n in param_names]
    known_decls = [InputDecl(sp.Symbol(n), k) for n, k in known]
    unknown_decls = [InputDecl(sp.Symbol(n), k) for n, k in unknown]

    consts: dict[sp.Symbol, sp.Rational] = {}

    def resolve_const(n: str):
        s = sp.Symbol(n)
        if s in consts:
            return sp.Rational(consts[s])
        return None

    for cname, cexpr, ln, col in const_lines:
        e = _ExprParser(cexpr, ln, col, resolve_const).parse()
        if not e.is_Rational:
            raise ParseError(f"const {cname} is not an exact rational", ln, col)
        consts[sp.Symbol(cname)] = sp.Rational(e)

    model_syms = {str(s): s for s in states + params}
    model_syms.update({str(d.symbol): d.symbol for d in known_decls + unknown_decls})

    def resolve(n: str):
        if n in model_syms:
            return model_syms[n]
        s = sp.Symbol(n)
        if s in consts:
            return sp.Rational(consts[s])
        return None

    def resolve_ic(n: str):
        if n in model_syms and (model_syms[n] in states or model_syms[n] in params):
            return model_syms[n]
        s = sp.Symbol(n)
        if s in consts:
            return sp.Rational(consts[s])
        return None

    dynamics: dict[sp.Symbol, sp.Expr] = {}
    outputs: list[tuple[str, sp.Expr]] = []
    ics: dict[sp.Symbol, sp.Expr] = {}
    for word, lhs, rhs, ln, col in eq_lines:
        if word == "ddt":
            if lhs not in state_names:
                raise ParseError(f"ddt target {lhs!r} is not a state", ln, col)
            tgt = model_syms[lhs]
            if tgt in dynamics:
                raise ParseError(f"duplicate ddt for {lhs}", ln, col)
            dynamics[tgt] = _ExprParser(rhs, ln, col, resolve).parse()
        elif word == "output":
            if lhs in seen or any(lhs == n for n, _ in outputs):
                raise ParseError(f"output name {lhs!r} clashes", ln, col)
            outputs.append((lhs, _ExprParser(rhs, ln, col, resolve).parse()))
        else:
            if lhs not in state_names:
                raise ParseError(f"ic target {lhs!r} is not a state", ln, col)
            tgt = model_syms[lhs]
            if tgt in ics:
                raise ParseError(f"duplicate ic for {lhs}", ln, col)
            ics[tgt] = _ExprParser(rhs, ln, col, resolve_ic).parse()

    return ModelSpec(name, states, params, known_decls, unknown_decls,
                     consts, dynamics, outputs, ics)


# ---------------------------------------------------------------------------
# emitters

class _DslPrinter(sp.printing.str.StrPrinter):
    def _print_Pow(self, expr, rational=False):  # DSL uses ^, never sqrt()
        return super()._print_Pow(expr, rational=True).replace("**", "^")

    def _print_Rational(self, expr):
        if expr.q == 1:
            return str(expr.p)
        return f"{expr.p}/{expr.q}"

    def _print_Symbol(self, expr):
        info = sc.atom_info(expr)
        if info is not None:
            base, r = info
            return f"({self.doprint(base)})^({r.p}/{r.q})"
        return expr.name


def format_expr(e: sp.Expr) -> str:
    """Canonical, re-parseable text form (unique per rational function)."""
    return _DslPrinter({"order": "lex"}).doprint(sc.canonicalize(e))


def emit_model(m: ModelSpec) -> str:
    """Emit DSL source; ``parse_model(emit_model(m))`` is structurally ``m``."""
    out = [f'model "{m.name}"']
    out.append("states " + " ".join(str(s) for s in m.states))
    if m.params:
        out.append("params " + " ".join(str(s) for s in m.params))
    if m.known_inputs:
        out.append("known_inputs " + " ".join(f"{d.symbol}[derivs={d.order}]" for d in m.known_inputs))
    if m.unknown_inputs:
        out.append("unknown_inputs " + " ".join(f"{d.symbol}[l={d.order}]" for d in m.unknown_inputs))
    for s, v in m.consts.items():
        out.append(f"const {s} = {format_expr(v)}")
    for s in m.states:
        out.append(f"ddt {s} = {format_expr(m.dynamics[s])}")
    for n, e in m.outputs:
        out.append(f"output {n} = {format_expr(e)}")
    for s in m.states:
        if s in m.ics:
            out.append(f"ic {s} = {format_expr(m.ics[s])}")
    return "\n".join(out) + "\n"


@dataclass
class ModelDiagram:
    """Structural dependence graph with observability shading."""

    nodes: list[tuple[str, str, bool]]  # (name, class, positive verdict)
    edges: list[tuple[str, str]]


def build_diagram(m: ModelSpec, report) -> ModelDiagram:
    verdict = {name: ok for name, ok in report.states}
    verdict.update({name: ok for name, ok in report.params})
    verdict.update({name: ok for name, ok in report.unknown_inputs})
    nodes: list[tuple[str, str, bool]] = []
    for s in m.states:
        nodes.append((str(s), "state", verdict.get(str(s), True)))
    for s in m.params:
        nodes.append((str(s), "param", verdict.get(str(s), True)))
    for d in m.known_inputs:
        nodes.append((str(d.symbol), "input", True))
    for d in m.unknown_inputs:
        nodes.append((str(d.symbol), "input", verdict.get(str(d.symbol), True)))
    for n, _ in m.outputs:
        nodes.append((n, "output", True))

    edges: list[tuple[str, str]] = []
    for s in m.states:
        deps = sc.model_symbols(sc.canonicalize(m.dynamics[s]))
        for d in sorted(deps, key=str):
            if d != s:  # self-loops omitted
                edges.append((str(d), str(s)))
    for n, e in m.outputs:
        deps = sc.model_symbols(sc.canonicalize(e))
        for d in sorted(deps, key=str):
            edges.append((str(d), n))
    return ModelDiagram(nodes, edges)


_DOT_FILL = {
    ("state", True): "#c0392b", ("state", False): "#f5b7b1",
    ("param", True): "#1e8449", ("param", False): "#a9dfbf",
    ("input", True): "#b7950b", ("input", False): "#f9e79b",
    ("output", True): "#ffffff", ("output", False): "#ffffff",
}


def emit_dot(m: ModelSpec, report) -> str:
    """Deterministic DOT digraph; positive verdicts dark, negatives light."""
    diagram = build_diagram(m, report)
    lines = [f'digraph "{m.name}" {{', "  node [style=filled];"]
    for name, cls, ok in diagram.nodes:
        fill = _DOT_FILL[(cls, ok)]
        obs = "true" if ok else "false"
        lines.append(
            f'  "{name}" [class="{cls}" observable="{obs}" fillcolor="{fill}"];')
    for a, b in diagram.edges:
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
