"""Exact Taylor-coefficient evaluation of output sensitivities.

The stacked Jacobians of successive output time-derivatives with respect to
the augmented state equal ``r! * [t^r] (∂g/∂z · S)(t)`` along the power-series
solution through the evaluation point, where ``S`` solves the variational
system.  Propagating truncated series with exact rational coefficients gives
the same matrix values as differentiating the symbolic Lie-derivative tower
and evaluating it, at a fraction of the cost for large systems.

Power atoms ride along as extra series variables with dynamics
``dA/dt = q*A/base * d(base)/dt`` and non-identity initial sensitivities.
"""

from __future__ import annotations

from fractions import Fraction

import sympy as sp

from . import symcore as sc
from ._linalg import mpq, to_mpq

_NUM, _VAR, _ADD, _MUL, _DIV = range(5)


class JetPole(Exception):
    """Evaluation point hits a zero denominator; redraw."""


class JetProgram:
    """Compiled augmented system for exact series propagation."""

    def __init__(self, aug):
        self.aug = aug
        n = aug.dim
        atoms = sorted(
            {a for e in list(aug.f_aug) + list(aug.outputs) for a in sc.atoms_of(e)},
            key=str)
        self.atoms = atoms
        self.ext_vars: list[sp.Symbol] = list(aug.x_aug) + atoms
        self.n = n
        self.ne = len(self.ext_vars)

        # atom dynamics: dA/dt = q*A/base * sum_j d(base)/dz_j * f_j
        rhs = list(aug.f_aug)
        self.atom_sens0: dict[sp.Symbol, dict[int, sp.Expr]] = {}
        for a in atoms:
            base, q = sc.atom_info(a)
            dt_base = sp.Integer(0)
            sens: dict[int, sp.Expr] = {}
            for j, z in enumerate(aug.x_aug):
                db = sp.diff(base, z)
                if not db.is_zero:
                    dt_base += db * aug.f_aug[j]
                    sens[j] = sc.canonicalize(q * a / base * db)
            rhs.append(sc.canonicalize(q * a / base * dt_base))
            self.atom_sens0[a] = sens
        self.rhs_exprs = rhs

        # u(t) is a known polynomial: series index -> chain symbol
        self.u_vars: list[tuple[sp.Symbol, int]] = []
        for chain in aug.u_chains.values():
            for j, s in enumerate(chain):
                self.u_vars.append((s, j))

        self.instrs: list[tuple] = []
        self._memo: dict[sp.Expr, int] = {}
        self._var_index = {s: i for i, s in enumerate(self.ext_vars)}
        for s, _ in self.u_vars:
            self._var_index[s] = len(self._var_index)

        jac: list[tuple[int, int, int]] = []
        for i, e in enumerate(rhs):
            for j in range(self.ne):
                d = sp.diff(e, self.ext_vars[j])
                if not d.is_zero:
                    jac.append((i, j, self._compile(d)))
        self.jac = jac
        gjac: list[tuple[int, int, int]] = []
        for li, g in enumerate(aug.outputs):
            for j in range(self.ne):
                d = sp.diff(g, self.ext_vars[j])
                if not d.is_zero:
                    gjac.append((li, j, self._compile(d)))
        self.gjac = gjac
        self.rhs_nodes = [self._compile(e) for e in rhs]

    # -- compilation -------------------------------------------------------
    def _compile(self, e: sp.Expr) -> int:
        got = self._memo.get(e)
        if got is not None:
            return got
        if e.is_Rational:
            nid = self._emit((_NUM, mpq(int(e.p), int(e.q))))
        elif e.is_Symbol:
            if e not in self._var_index:
                raise ValueError(f"unbound symbol in jet program: {e}")
            nid = self._emit((_VAR, self._var_index[e]))
        elif e.is_Add:
            nid = self._emit((_ADD, tuple(self._compile(a) for a in e.args)))
        elif e.is_Mul:
            num_ids: list[int] = []
            den_ids: list[int] = []
            for a in e.args:
                if a.is_Pow and a.args[1].is_Integer and a.args[1] < 0:
                    den_ids.append(self._compile_pow(a.args[0], -int(a.args[1])))
                else:
                    num_ids.append(self._compile(a))
            nid = self._fold_mul(num_ids) if num_ids else self._emit((_NUM, mpq(1)))
            if den_ids:
                nid = self._emit((_DIV, nid, self._fold_mul(den_ids)))
        elif e.is_Pow:
            b, x = e.args
            if not (x.is_Integer):
                raise ValueError(f"non-integer exponent in jet program: {e}")
            k = int(x)
            if k >= 0:
                nid = self._compile_pow(b, k)
            else:
                one = self._emit((_NUM, mpq(1)))
                nid = self._emit((_DIV, one, self._compile_pow(b, -k)))
        else:
            raise ValueError(f"unsupported node in jet program: {e!r}")
        self._memo[e] = nid
        return nid

    def _emit(self, instr: tuple) -> int:
        self.instrs.append(instr)
        return len(self.instrs) - 1

    def _fold_mul(self, ids: list[int]) -> int:
        nid = ids[0]
        for other in ids[1:]:
            nid = self._emit((_MUL, (nid, other)))
        return nid

    def _compile_pow(self, base: sp.Expr, k: int) -> int:
        b = self._compile(base)
        if k == 0:
            return self._emit((_NUM, mpq(1)))
        nid = b
        for _ in range(k - 1):
            nid = self._emit((_MUL, (nid, b)))
        return nid

    def evaluator(self, point) -> "JetEvaluator":
        return JetEvaluator(self, point)


def _conv(a: list, b: list, r: int):
    s = mpq(0)
    for d in range(r + 1):
        ad = a[d]
        if ad:
            s += ad * b[r - d]
    return s


class JetEvaluator:
    """Per-point series state; yields Jacobian blocks degree by degree."""

    def __init__(self, prog: JetProgram, point):
        self.prog = prog
        aug = prog.aug
        n, ne = prog.n, prog.ne
        pt = {s: to_mpq(Fraction(v) if not isinstance(v, Fraction) else v)
              for s, v in point.items()}
        # variable series: states and atoms get integrated; parameters are
        # constant; known-input chains are fixed polynomials u_j t^j / j!
        self.var_series: list[list] = []
        param_set = set(aug.model.params)
        fact = mpq(1)
        facts = [mpq(1)]
        for j in range(1, 64):
            fact *= j
            facts.append(fact)
        self.dynamic = [False] * (ne + len(prog.u_vars))
        for i, s in enumerate(prog.ext_vars):
            self.var_series.append([pt[s]])
            self.dynamic[i] = s not in param_set
        for s, j in prog.u_vars:
            # series of u^{(j)}(t): coefficients u^{(j+d)}(0)/d!
            chain = next(ch for ch in aug.u_chains.values() if s in ch)
            start = chain.index(s)
            coeffs = [pt[chain[start + d]] / facts[d]
                      for d in range(len(chain) - start)]
            self.var_series.append(coeffs)
        self.facts = facts
        self.node_series: list[list] = [[] for _ in prog.instrs]
        # sensitivity matrix: ne rows, n columns of series
        self.S: list[list[list]] = [[[] for _ in range(n)] for _ in range(ne)]
        for i in range(ne):
            for c in range(n):
                if i < n:
                    self.S[i][c] = [mpq(1) if i == c else mpq(0)]
                else:
                    a = prog.ext_vars[i]
                    sens = prog.atom_sens0[a].get(c)
                    if sens is None:
                        self.S[i][c] = [mpq(0)]
                    else:
                        self.S[i][c] = [to_mpq(sc.evaluate(sens, point))]
        self.r = -1

    def _var_coeff(self, idx: int, r: int):
        s = self.var_series[idx]
        if r < len(s):
            return s[r]
        if self.dynamic[idx] and idx < self.prog.ne:
            raise RuntimeError("dynamic series not yet extended")
        return mpq(0)

    def _eval_degree(self, r: int) -> None:
        ns = self.node_series
        for nid, instr in enumerate(self.prog.instrs):
            op = instr[0]
            if op == _NUM:
                val = instr[1] if r == 0 else mpq(0)
            elif op == _VAR:
                val = self._var_coeff(instr[1], r)
            elif op == _ADD:
                val = mpq(0)
                for cid in instr[1]:
                    val += ns[cid][r]
            elif op == _MUL:
                a, b = instr[1]
                val = _conv(ns[a], ns[b], r)
            else:  # _DIV
                _, aid, bid = instr
                b0 = ns[bid][0]
                if not b0:
                    raise JetPole()
                acc = ns[aid][r]
                mine = ns[nid]
                for d in range(1, r + 1):
                    bd = ns[bid][d]
                    if bd:
                        acc -= bd * mine[r - d]
                val = acc / b0
            ns[nid].append(val)

    def next_block(self) -> list[list]:
        """Rows ``∂y^{(r)}/∂z0`` for the next derivative order r."""
        prog = self.prog
        self.r += 1
        r = self.r
        self._eval_degree(r)
        n_y = len(prog.aug.outputs)
        rows = [[mpq(0)] * prog.n for _ in range(n_y)]
        rfact = self.facts[r]
        for (li, j, nid) in prog.gjac:
            bser = self.node_series[nid]
            for c in range(prog.n):
                v = _conv(bser, self.S[j][c], r)
                if v:
                    rows[li][c] += rfact * v
        # extend state/atom series and sensitivities to degree r+1
        inv = mpq(1, r + 1)
        for i in range(prog.ne):
            if self.dynamic[i]:
                self.var_series[i].append(self.node_series[prog.rhs_nodes[i]][r] * inv)
            else:
                self.var_series[i].append(mpq(0))
        dS = [[mpq(0)] * prog.n for _ in range(prog.ne)]
        for (i, j, nid) in prog.jac:
            aser = self.node_series[nid]
            row = dS[i]
            Sj = self.S[j]
            for c in range(prog.n):
                row[c] += _conv(aser, Sj[c], r)
        for i in range(prog.ne):
            for c in range(prog.n):
                self.S[i][c].append(dS[i][c] * inv)
        return rows
