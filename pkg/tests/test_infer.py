"""Conditional ranking, iterated conditional modes, and paste splicing."""

import random

import pytest

from smartpaste.infer import (NoCandidates, SpliceError, icm,
                              make_paste_instance, paste, rank_single,
                              total_log_prob)
from smartpaste.minilang import compile_source
from smartpaste.minilang.lexer import tokenize
from smartpaste.minilang.parser import parse
from smartpaste.models import Encoder, Hyper, ModelParams
from smartpaste.taskgen import extract_instances, make_instance

from conftest import SUM_POSITIVE, SUM_POSITIVE_TRUTH_NAMES


def small_model(program, variant="avgg", seed=4):
    return ModelParams(variant, Hyper(hidden=8, tree_depth=4),
                       type_names=program.lattice.types,
                       lexemes=[t.text for t in program.tokens], seed=seed)


@pytest.fixture(scope="module")
def loop_instance(sum_positive_program):
    return make_instance(sum_positive_program, (17, 46), "fig")


class TestRankSingle:
    def test_distribution_over_own_candidates(self, loop_instance):
        params = small_model(loop_instance.program)
        enc = Encoder(params, loop_instance.program,
                      placeholder_tokens=loop_instance.placeholder_tokens)
        ph = loop_instance.placeholders[0]
        context = {p.token_index: p.truth
                   for p in loop_instance.placeholders}
        ranked = rank_single(loop_instance, enc, ph, context)
        assert sorted(s for s, _ in ranked) == sorted(ph.candidates)
        assert sum(p for _, p in ranked) == pytest.approx(1.0)
        probs = [p for _, p in ranked]
        assert probs == sorted(probs, reverse=True)

    def test_ties_break_to_lowest_symbol(self, loop_instance):
        params = small_model(loop_instance.program)
        for t in params.tensors():
            t.data[...] = 0.0  # every score identical
        enc = Encoder(params, loop_instance.program,
                      placeholder_tokens=loop_instance.placeholder_tokens)
        ph = loop_instance.placeholders[0]
        context = {p.token_index: p.truth
                   for p in loop_instance.placeholders}
        ranked = rank_single(loop_instance, enc, ph, context)
        assert [s for s, _ in ranked] == sorted(ph.candidates)

    def test_depends_on_other_assignments(self, loop_instance):
        params = small_model(loop_instance.program)
        enc = Encoder(params, loop_instance.program,
                      placeholder_tokens=loop_instance.placeholder_tokens)
        ph = loop_instance.placeholders[2]  # i++ inside the header
        truth_ctx = {p.token_index: p.truth
                     for p in loop_instance.placeholders}
        other_ctx = dict(truth_ctx)
        other = next(c for c in loop_instance.placeholders[0].candidates
                     if c != truth_ctx[loop_instance.placeholders[0].token_index])
        other_ctx[loop_instance.placeholders[0].token_index] = other
        a = rank_single(loop_instance, enc, ph, truth_ctx)
        b = rank_single(loop_instance, enc, ph, other_ctx)
        assert a != b


class TestIcm:
    def test_deterministic(self, loop_instance):
        params = small_model(loop_instance.program)
        a = icm(loop_instance, params, restarts=3, max_sweeps=5,
                rng=random.Random(13))
        b = icm(loop_instance, params, restarts=3, max_sweeps=5,
                rng=random.Random(13))
        assert a.mapping == b.mapping
        assert a.total_log_prob == b.total_log_prob

    def test_monotone_within_restart(self, loop_instance):
        params = small_model(loop_instance.program)
        trace = []
        icm(loop_instance, params, restarts=3, max_sweeps=5,
            rng=random.Random(1), trace=trace)
        assert len(trace) == 3
        for restart in trace:
            assert all(b >= a - 1e-9
                       for a, b in zip(restart, restart[1:]))

    def test_single_placeholder_matches_rank_single(self,
                                                    sum_positive_program):
        inst = make_instance(sum_positive_program, (47, 49))  # return sum;
        assert len(inst.placeholders) == 1
        params = small_model(sum_positive_program)
        best = icm(inst, params, restarts=4, rng=random.Random(0))
        enc = Encoder(params, sum_positive_program,
                      placeholder_tokens=inst.placeholder_tokens)
        ranked = rank_single(inst, enc, inst.placeholders[0], {})
        assert best.mapping[inst.placeholders[0].token_index] == ranked[0][0]

    def test_total_matches_final_mapping(self, loop_instance):
        params = small_model(loop_instance.program)
        best = icm(loop_instance, params, restarts=2, max_sweeps=4,
                   rng=random.Random(5))
        enc = Encoder(params, loop_instance.program,
                      placeholder_tokens=loop_instance.placeholder_tokens)
        total, _ = total_log_prob(loop_instance, enc, best.mapping)
        assert total == pytest.approx(best.total_log_prob)

    def test_rankings_cover_all_placeholders(self, loop_instance):
        params = small_model(loop_instance.program)
        best = icm(loop_instance, params, restarts=2, max_sweeps=3,
                   rng=random.Random(2))
        assert set(best.rankings) == set(loop_instance.placeholder_tokens)


TARGET = """\
int SumPositive(int[] arr, int lim) {
  int sum = 0;
  return sum;
}
"""

SNIPPET = "for (int i = 0; i < lim; i++)\n  if (arr[i] > 0)\n    sum += arr[i];"


class TestPaste:
    def test_instance_shape(self):
        inst = make_paste_instance(TARGET, SNIPPET, line=3, col=3)
        # i is declared by the snippet; all 8 other uses become placeholders
        assert len(inst.placeholders) == 8
        names = {inst.program.symbol(c).name
                 for p in inst.placeholders for c in p.candidates}
        assert names == {"arr", "lim", "sum", "i"}

    def test_spliced_program_parses(self):
        inst = make_paste_instance(TARGET, SNIPPET, line=3, col=3)
        source = "".join(t.leading + t.text for t in inst.program.tokens)
        parse(tokenize(source))

    def test_truth_substitution_round_trips(self):
        inst = make_paste_instance(TARGET, SNIPPET, line=3, col=3)
        by_name = {s.name: s.id for s in inst.program.symbols}
        truth = dict(zip(sorted(p.token_index for p in inst.placeholders),
                         [by_name[n] for n in SUM_POSITIVE_TRUTH_NAMES]))
        texts = [t.text for t in inst.program.tokens]
        for tok, sid in truth.items():
            texts[tok] = inst.program.symbol(sid).name
        compile_source(" ".join(texts))  # type-checks with the right names

    def test_paste_returns_compilable_program(self):
        inst = make_paste_instance(TARGET, SNIPPET, line=3, col=3)
        params = small_model(inst.program, variant="loc")
        rewritten, best, out = paste(TARGET, SNIPPET, 3, 3, params,
                                     restarts=2, max_sweeps=3, seed=0)
        assert set(best.mapping) == {p.token_index for p in out.placeholders}
        parse(tokenize(rewritten))  # placeholder-free and syntactically valid

    def test_bad_snippet_rejected(self):
        with pytest.raises(SpliceError):
            make_paste_instance(TARGET, "for (int i = 0; i <", 3, 3)

    def test_snippet_without_uses_rejected(self):
        with pytest.raises(SpliceError):
            make_paste_instance(TARGET, "int z = 0;", 3, 3)

    def test_position_outside_function_rejected(self):
        with pytest.raises(SpliceError):
            make_paste_instance(TARGET, SNIPPET, line=1, col=1)

    def test_no_candidates(self):
        target = "int f() { return 0; }\n"
        with pytest.raises(NoCandidates):
            make_paste_instance(target, "x++;", line=1, col=11)

    def test_broken_target_rejected(self):
        with pytest.raises(SpliceError):
            make_paste_instance("int f( {", SNIPPET, 1, 1)
