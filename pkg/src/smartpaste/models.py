"""Learned representations: type pooling over the supertype closure, the
windowed context representation, the five usage-representation variants
(loc, avgg, grug, grud, hybrid), and the inner-product scorer."""

from __future__ import annotations

import random
from collections import Counter
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, \
    Tuple

import numpy as np

from . import nn
from .dataflow import EPS, UseGraph
from .minilang.checker import TypedProgram, UNK_TYPE, supertype_closure
from .nn import Tensor

VARIANTS = ("loc", "avgg", "grug", "grud", "hybrid")
CONTEXT_ENCODERS = ("logbilinear", "gru")

PAD = "<pad>"
UNK = "<unk>"
PLACEHOLDER = "<placeholder>"

DEFAULT_RARE_THRESHOLD = 2  # lexemes seen fewer times map to UNK


class VariantError(Exception):
    pass


class Hyper:
    """Model hyperparameters.  E (embedding) and H (hidden) are kept equal so
    type embeddings can seed GRU states directly."""

    def __init__(self, hidden: int = 64, window: int = 3, chain_len: int = 14,
                 tree_depth: int = 15, context_encoder: str = "logbilinear",
                 type_dropout: float = 0.5, unk_types: bool = False):
        if context_encoder not in CONTEXT_ENCODERS:
            raise VariantError(f"unknown context encoder {context_encoder!r}")
        self.hidden = hidden
        self.window = window
        self.chain_len = chain_len
        self.tree_depth = tree_depth
        self.context_encoder = context_encoder
        self.type_dropout = type_dropout
        # ablation switch: every variable reads as the unknown type
        self.unk_types = unk_types

    def to_dict(self) -> dict:
        return dict(hidden=self.hidden, window=self.window,
                    chain_len=self.chain_len, tree_depth=self.tree_depth,
                    context_encoder=self.context_encoder,
                    type_dropout=self.type_dropout, unk_types=self.unk_types)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyper":
        return cls(**d)


def build_vocab(instances) -> Tuple[List[str], List[str]]:
    """(type names, non-variable lexemes above the rarity threshold)."""
    types: Set[str] = set()
    counts: Counter = Counter()
    for inst in instances:
        types.update(inst.program.lattice.supers)
        for tok in inst.program.tokens:
            if tok.symbol is None:
                counts[tok.text] += 1
    lexemes = sorted(t for t, c in counts.items()
                     if c >= DEFAULT_RARE_THRESHOLD)
    return sorted(types), lexemes


class ModelParams:
    """All learnable tensors for one model variant + context encoder."""

    def __init__(self, variant: str, hyper: Hyper, type_names: Iterable[str],
                 lexemes: Iterable[str], seed: int = 0):
        if variant not in VARIANTS:
            raise VariantError(f"unknown variant {variant!r}")
        self.variant = variant
        self.hyper = hyper
        rng = np.random.default_rng(seed)
        h = hyper.hidden
        self.type_names = sorted(set(type_names) | {UNK_TYPE})
        self.lexemes = sorted(set(lexemes) | {PAD, UNK, PLACEHOLDER})
        self.type_embeddings = {
            t: nn.glorot(rng, (h,), f"type:{t}") for t in self.type_names}
        self.token_embeddings = {
            t: nn.glorot(rng, (h,), f"lex:{t}") for t in self.lexemes}

        if hyper.context_encoder == "logbilinear":
            self.pos_prev = [nn.glorot(rng, (h, h), f"ctx.prev{i}")
                             for i in range(hyper.window)]
            self.pos_next = [nn.glorot(rng, (h, h), f"ctx.next{i}")
                             for i in range(hyper.window)]
            self.ctx_gru_prev = self.ctx_gru_next = None
        else:
            self.pos_prev = self.pos_next = None
            self.ctx_gru_prev = nn.GruCellParams(rng, h, h, "ctx.gru_p")
            self.ctx_gru_next = nn.GruCellParams(rng, h, h, "ctx.gru_n")
        self.w_c = nn.glorot(rng, (h, 2 * h), "w_c")

        self.seq_gru_prev = self.seq_gru_next = self.w_gru = None
        self.tree_gru_prev = self.tree_gru_next = self.w_d = None
        self.w_h = None
        if variant in ("grug",):
            self.seq_gru_prev = nn.GruCellParams(rng, h, h, "usage.gru_p")
            self.seq_gru_next = nn.GruCellParams(rng, h, h, "usage.gru_n")
            self.w_gru = nn.glorot(rng, (h, 2 * h), "w_gru")
        if variant in ("grud", "hybrid"):
            self.tree_gru_prev = nn.GruCellParams(rng, h, h, "usage.tree_p")
            self.tree_gru_next = nn.GruCellParams(rng, h, h, "usage.tree_n")
            self.w_d = nn.glorot(rng, (h, 2 * h), "w_d")
        if variant == "hybrid":
            self.w_h = nn.glorot(rng, (h, 2 * h), "w_h")

    # -- parameter registry --

    def named(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for t, e in self.type_embeddings.items():
            out[f"type:{t}"] = e
        for t, e in self.token_embeddings.items():
            out[f"lex:{t}"] = e
        if self.pos_prev is not None:
            for i, m in enumerate(self.pos_prev):
                out[f"ctx.prev{i}"] = m
            for i, m in enumerate(self.pos_next):
                out[f"ctx.next{i}"] = m
        for cell, prefix in ((self.ctx_gru_prev, "ctx.gru_p"),
                             (self.ctx_gru_next, "ctx.gru_n"),
                             (self.seq_gru_prev, "usage.gru_p"),
                             (self.seq_gru_next, "usage.gru_n"),
                             (self.tree_gru_prev, "usage.tree_p"),
                             (self.tree_gru_next, "usage.tree_n")):
            if cell is not None:
                for t in cell.tensors():
                    out[t.name] = t
        for w in (self.w_c, self.w_gru, self.w_d, self.w_h):
            if w is not None:
                out[w.name] = w
        return out

    def tensors(self) -> List[Tensor]:
        return list(self.named().values())

    # -- persistence --

    def config(self) -> dict:
        return {"variant": self.variant, "hyper": self.hyper.to_dict(),
                "types": self.type_names, "lexemes": self.lexemes}

    def save(self, path: str, extra_config: Optional[dict] = None):
        cfg = self.config()
        if extra_config:
            cfg.update(extra_config)
        nn.save_checkpoint(path, self.named(), cfg)

    @classmethod
    def load(cls, path: str) -> Tuple["ModelParams", dict]:
        loaded, cfg = nn.load_checkpoint(path)
        params = cls(cfg["variant"], Hyper.from_dict(cfg["hyper"]),
                     cfg["types"], cfg["lexemes"])
        named = params.named()
        if set(named) != set(loaded):
            missing = set(named) ^ set(loaded)
            raise ValueError(f"checkpoint parameter mismatch: {sorted(missing)}")
        for name, t in named.items():
            t.data[...] = loaded[name].data
        return params, cfg


class Encoder:
    """Forward computation over one program view.

    Context windows are static for an instance: every placeholder position
    shows the PLACEHOLDER embedding regardless of its current assignment, so
    context vectors are cached for the encoder's lifetime.  The lexical and
    data-flow relations are supplied per call and do change during inference.
    """

    def __init__(self, params: ModelParams, program: TypedProgram,
                 placeholder_tokens: Iterable[int] = (),
                 training: bool = False,
                 rng: Optional[random.Random] = None):
        self.params = params
        self.hyper = params.hyper
        self.program = program
        self.placeholder_tokens = set(placeholder_tokens)
        self.training = training
        self.rng = rng if rng is not None else random.Random(0)
        self._ctx_cache: Dict[int, Tensor] = {}
        self._type_cache: Dict[int, Tensor] = {}
        self._zero = nn.constant(np.zeros(self.hyper.hidden))

    # -- type representation --

    def type_embed(self, sid: int) -> Tensor:
        """Element-wise max over the supertype closure's embeddings; at
        training time over a random non-empty subset of the closure."""
        if sid in self._type_cache:
            return self._type_cache[sid]
        declared = UNK_TYPE if self.hyper.unk_types \
            else self.program.symbol(sid).declared_type
        closure = sorted(supertype_closure(self.program.lattice, declared))
        embs = self.params.type_embeddings
        members = [t if t in embs else UNK_TYPE for t in closure]
        if self.training and len(members) > 1:
            keep = [m for m in members
                    if self.rng.random() >= self.hyper.type_dropout]
            while not keep:
                keep = [m for m in members
                        if self.rng.random() >= self.hyper.type_dropout]
            members = keep
        out = nn.elementwise_max([embs[m] for m in members])
        self._type_cache[sid] = out
        return out

    # -- context representation --

    def token_repr(self, t: int) -> Tensor:
        """Embedding of one window token: PAD past file bounds, PLACEHOLDER
        at placeholder positions, the type representation for variables, and
        the lexeme embedding otherwise."""
        embs = self.params.token_embeddings
        if t < 0 or t >= len(self.program.tokens):
            return embs[PAD]
        if t in self.placeholder_tokens:
            return embs[PLACEHOLDER]
        tok = self.program.tokens[t]
        if tok.symbol is not None:
            return self.type_embed(tok.symbol)
        return embs.get(tok.text, embs[UNK])

    def context_repr(self, t: int) -> Tensor:
        """c(t) = W_C [f_prev(window before t), f_next(window after t)];
        c(EPS) is the zero vector."""
        if t == EPS:
            return self._zero
        if t in self._ctx_cache:
            return self._ctx_cache[t]
        c = self.hyper.window
        prev = [self.token_repr(t - c + i) for i in range(c)]
        nxt = [self.token_repr(t + 1 + i) for i in range(c)]
        p = self.params
        if p.pos_prev is not None:  # log-bilinear: position-wise linear maps
            fp = nn.matvec(p.pos_prev[0], prev[0])
            for i in range(1, c):
                fp = nn.add(fp, nn.matvec(p.pos_prev[i], prev[i]))
            fn = nn.matvec(p.pos_next[0], nxt[0])
            for i in range(1, c):
                fn = nn.add(fn, nn.matvec(p.pos_next[i], nxt[i]))
        else:
            fp = self._zero
            for x in prev:
                fp = nn.gru_step(fp, x, p.ctx_gru_prev)
            fn = self._zero
            for x in reversed(nxt):
                fn = nn.gru_step(fn, x, p.ctx_gru_next)
        out = nn.matvec(p.w_c, nn.concat([fp, fn]))
        self._ctx_cache[t] = out
        return out

    # -- usage representations --

    def _lex_chain(self, ug: UseGraph, t: int, v: int, direction: str
                   ) -> List[int]:
        """Up to chain_len occurrence positions; prev chains are returned
        oldest-first (chronological), next chains nearest-first."""
        step = ug.lex_prev if direction == "prev" else ug.lex_next
        chain: List[int] = []
        cur: Optional[int] = t
        for _ in range(self.hyper.chain_len):
            cur = step(cur, v)
            if cur is None:
                break
            chain.append(cur)
        if direction == "prev":
            chain.reverse()
        return chain

    def _tree_state(self, ug: UseGraph, t: int, v: int, direction: str,
                    cell: nn.GruCellParams) -> Tensor:
        """Recursive TreeGRU over the bounded data-flow unrolling; leaves are
        the type representation; children pooled by element-wise max."""
        rel = ug.din if direction == "prev" else ug.dout
        leaf = self.type_embed(v)
        memo: Dict[Tuple[int, int], Tensor] = {}

        def state(pos: int, depth: int) -> Tensor:
            if depth <= 0 or pos == EPS:
                return leaf
            children = sorted(rel(pos, v))
            if not children:
                return leaf
            key = (pos, depth)
            if key in memo:
                return memo[key]
            pooled = nn.elementwise_max([
                nn.gru_step(state(child, depth - 1),
                            self.context_repr(child), cell)
                for child in children])
            memo[key] = pooled
            return pooled

        return state(t, self.hyper.tree_depth)

    def _avgg(self, ug: UseGraph, t: int, v: int) -> Tensor:
        contexts = [self.context_repr(x)
                    for x in self._lex_chain(ug, t, v, "prev")
                    + self._lex_chain(ug, t, v, "next")]
        base = self.type_embed(v)
        if not contexts:
            return base
        return nn.add(base, nn.mean_of(contexts))

    def _grug(self, ug: UseGraph, t: int, v: int) -> Tensor:
        p = self.params
        init = self.type_embed(v)
        hp = init
        for x in self._lex_chain(ug, t, v, "prev"):
            hp = nn.gru_step(hp, self.context_repr(x), p.seq_gru_prev)
        hn = init
        for x in self._lex_chain(ug, t, v, "next"):
            hn = nn.gru_step(hn, self.context_repr(x), p.seq_gru_next)
        return nn.matvec(p.w_gru, nn.concat([hp, hn]))

    def _grud(self, ug: UseGraph, t: int, v: int) -> Tensor:
        p = self.params
        hp = self._tree_state(ug, t, v, "prev", p.tree_gru_prev)
        hn = self._tree_state(ug, t, v, "next", p.tree_gru_next)
        return nn.matvec(p.w_d, nn.concat([hp, hn]))

    def usage_repr(self, ug: UseGraph, t: int, v: int,
                   variant: Optional[str] = None) -> Tensor:
        variant = variant or self.params.variant
        if variant == "loc":
            return self.type_embed(v)
        if variant == "avgg":
            return self._avgg(ug, t, v)
        if variant == "grug":
            return self._grug(ug, t, v)
        if variant == "grud":
            return self._grud(ug, t, v)
        if variant == "hybrid":
            return nn.matvec(self.params.w_h,
                             nn.concat([self._avgg(ug, t, v),
                                        self._grud(ug, t, v)]))
        raise VariantError(f"unknown variant {variant!r}")

    def score(self, t: int, ug: UseGraph, v: int) -> Tensor:
        return nn.dot(self.context_repr(t), self.usage_repr(ug, t, v))


def score(c: Tensor, u: Tensor) -> Tensor:
    """Inner product of a context and a usage representation."""
    return nn.dot(c, u)


def dump_usage_vectors(encoder: Encoder, ug: UseGraph, instance_id: str,
                       pairs: Sequence[Tuple[int, int]]) -> str:
    """Line-delimited (instance, token, symbol, variant, values) records."""
    lines = []
    for t, v in pairs:
        u = encoder.usage_repr(ug, t, v)
        values = "\t".join(repr(x) for x in u.data.tolist())
        lines.append(f"{instance_id}\t{t}\t{v}\t{encoder.params.variant}\t"
                     f"{values}")
    return "\n".join(lines)
