import random

import pytest
import sympy as sp

from repargen import symcore as sc
from repargen.modelspec import (
    AugmentedSystem, InputDecl, ModelError, ModelSpec, ParseError,
    augment, emit_model, parse_model,
)
from conftest import load_model


class TestParse:
    def test_vajda_shape(self, vajda):
        assert [str(s) for s in vajda.states] == ["x1", "x2"]
        assert len(vajda.params) == 4
        assert len(vajda.unknown_inputs) == 1
        aug = augment(vajda, l=1)
        assert aug.dim == 8

    def test_pk_shape(self, pk):
        aug = augment(pk, l=1)
        assert aug.dim == 15
        assert pk.output_names() == ["y1", "y2"]

    def test_big_known_dim(self, big_known):
        aug = augment(big_known)
        assert aug.dim == 8  # 3 states + 5 parameters

    def test_empty_dynamics_rejected(self):
        src = 'model "bad"\noutput y1 = 0\n'
        with pytest.raises(ModelError, match="at least one state"):
            parse_model(src)

    def test_missing_ddt_rejected(self):
        src = 'model "bad"\nstates x1 x2\nddt x1 = x2\noutput y1 = x1\n'
        with pytest.raises(ModelError, match="missing ddt"):
            parse_model(src)

    def test_undeclared_symbol_has_position(self):
        src = 'model "bad"\nstates x1\nddt x1 = x1 + zz\noutput y1 = x1\n'
        with pytest.raises(ParseError, match="line 3.*zz"):
            parse_model(src)

    def test_duplicate_declaration(self):
        src = 'model "bad"\nstates x1\nparams x1\nddt x1 = x1\noutput y1 = x1\n'
        with pytest.raises(ModelError, match="duplicate"):
            parse_model(src)

    def test_syntax_error_position(self):
        src = 'model "bad"\nstates x1\nddt x1 = x1 + * 2\noutput y1 = x1\n'
        with pytest.raises(ParseError):
            parse_model(src)

    def test_decimals_exact(self):
        src = ('model "m"\nstates x\nparams a\n'
               'const c = 0.021/(24*60)\n'
               'ddt x = c*x + a*x^1.7\noutput y = x\n')
        m = parse_model(src)
        assert m.consts[sp.Symbol("c")] == sp.Rational(7, 480000)
        atoms = sc.atoms_of(m.dynamics[sp.Symbol("x")])
        assert len(atoms) == 1


class TestAugment:
    def test_vajda_rows(self, vajda):
        aug = augment(vajda, l=1)
        names = [str(s) for s in aug.x_aug]
        assert names == ["x1", "x2", "th1", "th2", "th3", "th4", "w", "w_d1"]
        iw = names.index("w")
        assert aug.f_aug[iw] == sp.Symbol("w_d1")
        assert aug.f_aug[iw + 1] == 0
        for i in range(2, 6):  # parameter rows identically zero
            assert aug.f_aug[i] == 0

    def test_no_unknown_inputs(self, big_known):
        aug = augment(big_known)
        assert [str(s) for s in aug.x_aug] == ["G", "beta", "I", "p", "si", "c", "alpha", "gamma"]
        assert list(aug.u_chains) == [sp.Symbol("u")]
        assert len(aug.u_chains[sp.Symbol("u")]) == 3  # u, u_d1, u_d2

    def test_dimension_formula_random_shapes(self):
        rng = random.Random(1)
        for _ in range(10):
            nx = rng.randint(1, 4)
            np_ = rng.randint(0, 4)
            nw = rng.randint(0, 2)
            l = rng.randint(0, 3)
            states = " ".join(f"x{i}" for i in range(nx))
            params = ("params " + " ".join(f"p{i}" for i in range(np_))) if np_ else ""
            winp = ("unknown_inputs " + " ".join(f"w{i}[l={l}]" for i in range(nw))) if nw else ""
            ddts = "\n".join(
                f"ddt x{i} = x{i}" + ("".join(f"+p{j}*x{i}" for j in range(np_)))
                + ("".join(f"+w{j}" for j in range(nw))) for i in range(nx))
            src = f'model "r"\nstates {states}\n{params}\n{winp}\n{ddts}\noutput y = x0\n'
            m = parse_model(src)
            aug = augment(m)
            assert aug.dim == nx + np_ + nw * (l + 1)


class TestEmit:
    @pytest.mark.parametrize("name", ["vajda", "pk", "big_known", "big_unknown", "nfkb", "toy_fispo"])
    def test_round_trip(self, name):
        m = load_model(name)
        again = parse_model(emit_model(m))
        assert m.structurally_equal(again)
        # and emission is stable
        assert emit_model(m) == emit_model(again)

    def test_nfkb_parametric_ics(self, nfkb):
        x2, x1 = sp.symbols("x2 x1")
        k1p, k2 = sp.symbols("k1p k2")
        assert sc.canonicalize(nfkb.ics[x2] - k1p * x1 / k2) == 0
        text = emit_model(nfkb)
        assert "ic x2 = k1p*x1/k2" in text
