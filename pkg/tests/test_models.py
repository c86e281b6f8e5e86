"""Type pooling, context windows, the five usage variants, persistence."""

import random

import numpy as np
import pytest

from smartpaste import nn
from smartpaste.dataflow import EPS, dataflow_uses
from smartpaste.minilang import compile_source
from smartpaste.minilang.checker import UNK_TYPE
from smartpaste.models import (Encoder, Hyper, ModelParams, PAD, PLACEHOLDER,
                               UNK, VARIANTS, VariantError, build_vocab,
                               dump_usage_vectors)
from smartpaste.taskgen import extract_instances

LATTICE_SRC = """\
type Base;
type Mid implements Base;
type Leaf implements Mid;
extern fn mk() -> Leaf;
extern fn use(Base) -> int;
int f(Leaf a, Mid b, Leaf c) {
  int n = use(a);
  n += use(b);
  n += use(c);
  return n;
}
"""


@pytest.fixture(scope="module")
def lattice_program():
    return compile_source(LATTICE_SRC)


@pytest.fixture(scope="module")
def lattice_params(lattice_program):
    return ModelParams(
        "loc", Hyper(hidden=8),
        type_names=lattice_program.lattice.types | {"int"},
        lexemes=["int", "=", ";", "(", ")", "+=", "return"], seed=0)


class TestTypeEmbedding:
    def test_pooled_max_over_closure(self, lattice_program, lattice_params):
        enc = Encoder(lattice_params, lattice_program)
        leaf = next(s.id for s in lattice_program.symbols if s.name == "a")
        got = enc.type_embed(leaf).data
        e = lattice_params.type_embeddings
        expect = np.maximum.reduce(
            [e["Leaf"].data, e["Mid"].data, e["Base"].data])
        assert np.allclose(got, expect)

    def test_same_closure_same_vector(self, lattice_program, lattice_params):
        enc = Encoder(lattice_params, lattice_program)
        a = next(s.id for s in lattice_program.symbols if s.name == "a")
        c = next(s.id for s in lattice_program.symbols if s.name == "c")
        assert np.array_equal(enc.type_embed(a).data, enc.type_embed(c).data)

    def test_unknown_type_maps_to_unk(self, lattice_params):
        prog = compile_source("int f(int x) { return x; }")
        params = ModelParams("loc", Hyper(hidden=8), ["Other"], [], seed=0)
        enc = Encoder(params, prog)
        x = prog.symbols[0].id
        assert np.array_equal(enc.type_embed(x).data,
                              params.type_embeddings[UNK_TYPE].data)

    def test_training_subset_is_nonempty_and_seeded(self, lattice_program,
                                                    lattice_params):
        leaf = next(s.id for s in lattice_program.symbols if s.name == "a")
        runs = []
        for _ in range(2):
            enc = Encoder(lattice_params, lattice_program, training=True,
                          rng=random.Random(9))
            runs.append(enc.type_embed(leaf).data.copy())
        assert np.array_equal(runs[0], runs[1])

    def test_unk_types_ablation(self, lattice_program):
        params = ModelParams(
            "loc", Hyper(hidden=8, unk_types=True),
            type_names=lattice_program.lattice.types | {"int"},
            lexemes=[], seed=0)
        enc = Encoder(params, lattice_program)
        a = next(s.id for s in lattice_program.symbols if s.name == "a")
        n = next(s.id for s in lattice_program.symbols if s.name == "n")
        assert np.array_equal(enc.type_embed(a).data, enc.type_embed(n).data)
        assert np.array_equal(enc.type_embed(a).data,
                              params.type_embeddings[UNK_TYPE].data)


class TestContextRepresentation:
    def test_eps_context_is_zero(self, lattice_program, lattice_params):
        enc = Encoder(lattice_params, lattice_program)
        assert not enc.context_repr(EPS).data.any()

    def test_pad_outside_file(self, lattice_program, lattice_params):
        enc = Encoder(lattice_params, lattice_program)
        assert np.array_equal(enc.token_repr(-1).data,
                              lattice_params.token_embeddings[PAD].data)
        assert np.array_equal(
            enc.token_repr(10 ** 6).data,
            lattice_params.token_embeddings[PAD].data)

    def test_placeholder_positions_masked(self, lattice_program,
                                          lattice_params):
        toks = lattice_program.tokens
        use = next(t.index for t in toks
                   if t.symbol is not None and not t.is_def)
        enc = Encoder(lattice_params, lattice_program,
                      placeholder_tokens=[use])
        assert np.array_equal(enc.token_repr(use).data,
                              lattice_params.token_embeddings[PLACEHOLDER].data)

    def test_rare_lexeme_maps_to_unk(self, lattice_program, lattice_params):
        enc = Encoder(lattice_params, lattice_program)
        ret = next(t.index for t in lattice_program.tokens
                   if t.text == "mk")
        assert np.array_equal(enc.token_repr(ret).data,
                              lattice_params.token_embeddings[UNK].data)

    def test_context_depends_on_position(self, lattice_program,
                                         lattice_params):
        enc = Encoder(lattice_params, lattice_program)
        assert not np.array_equal(enc.context_repr(10).data,
                                  enc.context_repr(20).data)

    def test_gru_context_encoder(self, lattice_program):
        params = ModelParams(
            "loc", Hyper(hidden=8, context_encoder="gru"),
            type_names=lattice_program.lattice.types | {"int"},
            lexemes=[], seed=0)
        enc = Encoder(params, lattice_program)
        assert enc.context_repr(10).shape == (8,)


@pytest.fixture(scope="module")
def variant_setup():
    prog = compile_source(
        "int f(int a, int b) { int c = a + b; c += a; return c; }")
    ug = dataflow_uses(prog)
    use = next(t.index for t in prog.tokens
               if t.symbol is not None and not t.is_def)
    return prog, ug, use


class TestVariants:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_output_shape(self, variant_setup, variant):
        prog, ug, use = variant_setup
        params = ModelParams(variant, Hyper(hidden=8, tree_depth=4),
                             ["int"], [], seed=1)
        enc = Encoder(params, prog)
        for s in prog.symbols:
            u = enc.usage_repr(ug, use, s.id)
            assert u.shape == (8,)
            assert np.isfinite(u.data).all()

    def test_loc_ignores_relations(self, variant_setup):
        prog, ug, use = variant_setup
        params = ModelParams("loc", Hyper(hidden=8), ["int"], [], seed=1)
        enc = Encoder(params, prog)
        sid = prog.symbols[0].id
        a = enc.usage_repr(ug, use, sid).data
        ug2 = dataflow_uses(prog, override={use: None})
        b = enc.usage_repr(ug2, use, sid).data
        assert np.array_equal(a, b)

    def test_avgg_uses_chains(self, variant_setup):
        prog, ug, use = variant_setup
        params = ModelParams("avgg", Hyper(hidden=8), ["int"], [], seed=1)
        enc = Encoder(params, prog)
        sid = prog.tokens[use].symbol
        with_chain = enc.usage_repr(ug, use, sid).data
        assert not np.array_equal(with_chain, enc.type_embed(sid).data)

    def test_unknown_variant_rejected(self):
        with pytest.raises(VariantError):
            ModelParams("fancy", Hyper(hidden=8), [], [], seed=0)
        with pytest.raises(VariantError):
            Hyper(context_encoder="transformer")

    def test_hybrid_combines_both(self, variant_setup):
        prog, ug, use = variant_setup
        params = ModelParams("hybrid", Hyper(hidden=8, tree_depth=4),
                             ["int"], [], seed=1)
        enc = Encoder(params, prog)
        sid = prog.tokens[use].symbol
        u = enc.usage_repr(ug, use, sid)
        manual = nn.matvec(params.w_h,
                           nn.concat([enc._avgg(ug, use, sid),
                                      enc._grud(ug, use, sid)]))
        assert np.allclose(u.data, manual.data)


class TestPersistence:
    def test_save_load_reproduces_scores(self, tmp_path):
        prog = compile_source(
            "int f(int a, int b) { int c = a + b; c += a; return c; }")
        ug = dataflow_uses(prog)
        use = next(t.index for t in prog.tokens
                   if t.symbol is not None and not t.is_def)
        params = ModelParams("hybrid", Hyper(hidden=8, tree_depth=4),
                             ["int"], ["int", "+", ";"], seed=2)
        path = str(tmp_path / "m.json")
        params.save(path, extra_config={"epoch": 3})
        loaded, cfg = ModelParams.load(path)
        assert cfg["epoch"] == 3
        assert loaded.hyper.tree_depth == 4
        e1 = Encoder(params, prog)
        e2 = Encoder(loaded, prog)
        for s in prog.symbols:
            assert e1.score(use, ug, s.id).item() == \
                e2.score(use, ug, s.id).item()

    def test_load_rejects_mismatched_names(self, tmp_path):
        params = ModelParams("loc", Hyper(hidden=4), ["int"], [], seed=0)
        path = str(tmp_path / "m.json")
        named = params.named()
        cfg = params.config()
        cfg["variant"] = "hybrid"  # claims tensors that are not present
        nn.save_checkpoint(path, named, cfg)
        with pytest.raises(ValueError):
            ModelParams.load(path)


def test_build_vocab_threshold():
    prog1 = compile_source("int f(int a) { return a + 1; }")
    prog2 = compile_source("int g(int b) { return b + 2; }")
    insts = (extract_instances(prog1, 40) + extract_instances(prog2, 40))[:2]
    types, lexemes = build_vocab(insts)
    assert "int" in types
    assert "+" in lexemes        # appears in both programs
    assert "2" not in lexemes    # appears once: below the rarity threshold


def test_dump_usage_vectors_format():
    prog = compile_source("int f(int a) { a += 1; return a; }")
    ug = dataflow_uses(prog)
    params = ModelParams("loc", Hyper(hidden=4), ["int"], [], seed=0)
    enc = Encoder(params, prog)
    use = next(t.index for t in prog.tokens
               if t.symbol is not None and not t.is_def)
    out = dump_usage_vectors(enc, ug, "id#0", [(use, prog.symbols[0].id)])
    fields = out.split("\t")
    assert fields[:4] == ["id#0", str(use), str(prog.symbols[0].id), "loc"]
    assert len(fields) == 4 + 4
