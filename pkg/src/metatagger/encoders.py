"""The three token encoders.

* sentence-level character encoder: BiLSTM over the whole character stream
  (spaces included), token representation gathered from the forward and
  backward outputs at the token's first and last character
* token-level character encoder: unidirectional LSTM over a single token's
  characters plus attention pooling; sees no context at all, kept as the
  contrastive baseline
* word encoder: BiLSTM over word embeddings (learned zero-initialized table
  summed with a frozen pretrained table)

Each encoder owns an output head so it can be trained against its own
cross-entropy loss. Sentence inputs must have vocabulary ids attached
(data.assign_ids) before encoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from . import tensor as T
from .data import Sentence
from .tensor import Tensor

GATHER_PARTS = ("F_1st", "F_last", "B_1st", "B_last")


def canonical_gather(parts) -> tuple[str, ...]:
    """Validate a gather strategy and fix its order to the canonical one."""
    got = set(parts)
    bad = got - set(GATHER_PARTS)
    if bad:
        raise ValueError(f"unknown gather parts {sorted(bad)}; "
                         f"valid: {GATHER_PARTS}")
    if not got:
        raise ValueError("gather strategy must name at least one output")
    return tuple(p for p in GATHER_PARTS if p in got)


@dataclass
class CharSentEncoderParams:
    char_table: Tensor
    stack: nn.BiLstmStack
    mlp: nn.MlpParams
    classifier: nn.ClassifierParams
    gather: tuple[str, ...]
    emb_dropout: float = 0.0
    lstm_dropout: float = 0.0
    mlp_dropout: float = 0.0

    def parameters(self, prefix: str = "char_sent"):
        return ([(f"{prefix}.char_table", self.char_table)]
                + self.stack.parameters(f"{prefix}.stack")
                + self.mlp.parameters(f"{prefix}.mlp")
                + self.classifier.parameters(f"{prefix}.classifier"))


def char_sent_encoder(n_chars: int, n_tags: int, *, emb_dim: int = 100,
                      hidden: int = 400, depth: int = 3, mlp_size: int = 400,
                      gather=GATHER_PARTS, rng: np.random.Generator,
                      emb_init: str = "gaussian", mlp_init: str = "gaussian",
                      lstm_init: str = "scaled", emb_dropout: float = 0.0,
                      lstm_dropout: float = 0.0, mlp_dropout: float = 0.0
                      ) -> CharSentEncoderParams:
    gather = canonical_gather(gather)
    table = T.create((n_chars, emb_dim), init="gaussian", rng=rng,
                     std=nn.init_std(emb_init, 1), requires_grad=True)
    stack = nn.bilstm_stack(emb_dim, hidden, depth, rng, lstm_init)
    mlp = nn.mlp_params(len(gather) * hidden, mlp_size, rng, mlp_init)
    cls = nn.classifier_params(mlp_size, n_tags, rng)
    return CharSentEncoderParams(table, stack, mlp, cls, gather,
                                 emb_dropout, lstm_dropout, mlp_dropout)


def encode_chars_sentence(p: CharSentEncoderParams, sentence: Sentence,
                          training: bool = False,
                          rng: np.random.Generator | None = None
                          ) -> tuple[Tensor, Tensor, Tensor]:
    """Per-token (gathered rep, MLP output, logits) for one sentence."""
    if len(sentence.tokens) == 0:
        raise T.ShapeError("encode_chars_sentence: sentence has no tokens")
    if sentence.char_ids is None:
        raise ValueError("sentence has no char ids; run data.assign_ids first")
    n_stream = len(sentence.char_ids)
    emb = nn.embedding_lookup(p.char_table, sentence.char_ids)
    emb = nn.dropout(emb, p.emb_dropout, mode="single_mask",
                     training=training, rng=rng)
    f, b = nn.bilstm_stack_run(p.stack, emb, dropout_rate=p.lstm_dropout,
                               training=training, rng=rng)
    firsts = [t.char_span[0] for t in sentence.tokens]
    lasts = [t.char_span[1] for t in sentence.tokens]
    for pos in (firsts[0], lasts[-1]):
        if not 0 <= pos < n_stream:
            raise T.ShapeError(
                f"token span position {pos} outside stream of {n_stream}")
    source = {"F_1st": (f, firsts), "F_last": (f, lasts),
              "B_1st": (b, firsts), "B_last": (b, lasts)}
    parts = [T.take_rows(*source[name]) for name in p.gather]
    g = T.concat(parts, axis=1) if len(parts) > 1 else parts[0]
    m = nn.dropout(nn.mlp_apply(p.mlp, g), p.mlp_dropout, mode="single_mask",
                   training=training, rng=rng)
    return g, m, nn.classify(p.classifier, m)


@dataclass
class CharTokenEncoderParams:
    """Context-free baseline: each token encoded from its own characters."""
    char_table: Tensor
    lstm: nn.LstmParams
    attn_vec: Tensor
    classifier: nn.ClassifierParams
    emb_dropout: float = 0.0
    lstm_dropout: float = 0.0

    def parameters(self, prefix: str = "char_token"):
        return ([(f"{prefix}.char_table", self.char_table)]
                + self.lstm.parameters(f"{prefix}.lstm")
                + [(f"{prefix}.attn_vec", self.attn_vec)]
                + self.classifier.parameters(f"{prefix}.classifier"))


def char_token_encoder(n_chars: int, n_tags: int, *, emb_dim: int = 100,
                       hidden: int = 400, rng: np.random.Generator,
                       emb_init: str = "gaussian", lstm_init: str = "scaled",
                       emb_dropout: float = 0.0, lstm_dropout: float = 0.0
                       ) -> CharTokenEncoderParams:
    table = T.create((n_chars, emb_dim), init="gaussian", rng=rng,
                     std=nn.init_std(emb_init, 1), requires_grad=True)
    lstm = nn.lstm_params(emb_dim, hidden, rng, lstm_init)
    attn = T.create((hidden,), init="gaussian", rng=rng,
                    std=nn.init_std(lstm_init, hidden), requires_grad=True)
    cls = nn.classifier_params(hidden, n_tags, rng)
    return CharTokenEncoderParams(table, lstm, attn, cls,
                                  emb_dropout, lstm_dropout)


def encode_chars_token(p: CharTokenEncoderParams, sentence: Sentence,
                       training: bool = False,
                       rng: np.random.Generator | None = None
                       ) -> tuple[Tensor, Tensor]:
    """Per-token (rep, logits); the rep of a token depends only on its form."""
    if len(sentence.tokens) == 0:
        raise T.ShapeError("encode_chars_token: sentence has no tokens")
    if sentence.char_ids is None:
        raise ValueError("sentence has no char ids; run data.assign_ids first")
    hidden = p.lstm.hidden_size
    reps = []
    for tok in sentence.tokens:
        a, b = tok.char_span
        ids = sentence.char_ids[a:b + 1]
        emb = nn.embedding_lookup(p.char_table, ids)
        emb = nn.dropout(emb, p.emb_dropout, mode="single_mask",
                         training=training, rng=rng)
        mask = nn.state_dropout_mask(hidden, p.lstm_dropout, training, rng)
        states = nn.lstm_run(p.lstm, emb, mask)
        rep = nn.char_attention(p.attn_vec, states)
        reps.append(T.reshape(rep, (1, hidden)))
    reps = T.concat(reps, axis=0) if len(reps) > 1 else reps[0]
    return reps, nn.classify(p.classifier, reps)


@dataclass
class WordEncoderParams:
    learned: Tensor  # zero-initialized, trained
    pretrained: Tensor  # frozen, never receives gradient
    stack: nn.BiLstmStack
    mlp: nn.MlpParams
    classifier: nn.ClassifierParams
    emb_dropout: float = 0.0
    lstm_dropout: float = 0.0
    mlp_dropout: float = 0.0

    def parameters(self, prefix: str = "word"):
        # the pretrained matrix is intentionally absent: it is not a
        # trainable parameter and must stay out of optimizer updates
        return ([(f"{prefix}.learned", self.learned)]
                + self.stack.parameters(f"{prefix}.stack")
                + self.mlp.parameters(f"{prefix}.mlp")
                + self.classifier.parameters(f"{prefix}.classifier"))


def word_encoder(n_words: int, n_tags: int, *, emb_dim: int,
                 pretrained: np.ndarray | None = None, hidden: int = 400,
                 depth: int = 3, mlp_size: int = 400,
                 rng: np.random.Generator, mlp_init: str = "gaussian",
                 lstm_init: str = "scaled", emb_dropout: float = 0.0,
                 lstm_dropout: float = 0.0, mlp_dropout: float = 0.0
                 ) -> WordEncoderParams:
    if pretrained is None:
        pretrained = np.zeros((n_words, emb_dim))
    if pretrained.shape != (n_words, emb_dim):
        raise T.ShapeError(
            f"pretrained matrix {pretrained.shape} does not match "
            f"({n_words}, {emb_dim})")
    learned = T.create((n_words, emb_dim), init="zeros", requires_grad=True)
    frozen = Tensor(pretrained, requires_grad=False)
    stack = nn.bilstm_stack(emb_dim, hidden, depth, rng, lstm_init)
    mlp = nn.mlp_params(2 * hidden, mlp_size, rng, mlp_init)
    cls = nn.classifier_params(mlp_size, n_tags, rng)
    return WordEncoderParams(learned, frozen, stack, mlp, cls,
                             emb_dropout, lstm_dropout, mlp_dropout)


def encode_words(p: WordEncoderParams, sentence: Sentence,
                 training: bool = False,
                 rng: np.random.Generator | None = None
                 ) -> tuple[Tensor, Tensor, Tensor]:
    """Per-token (BiLSTM output, MLP output, logits) over the word sequence."""
    if len(sentence.tokens) == 0:
        raise T.ShapeError("encode_words: sentence has no tokens")
    ids = [t.word_id for t in sentence.tokens]
    if any(i is None for i in ids):
        raise ValueError("sentence has no word ids; run data.assign_ids first")
    emb = T.add(nn.embedding_lookup(p.learned, ids),
                nn.embedding_lookup(p.pretrained, ids))
    emb = nn.dropout(emb, p.emb_dropout, mode="single_mask",
                     training=training, rng=rng)
    f, b = nn.bilstm_stack_run(p.stack, emb, dropout_rate=p.lstm_dropout,
                               training=training, rng=rng)
    o = T.concat([f, b], axis=1)
    m = nn.dropout(nn.mlp_apply(p.mlp, o), p.mlp_dropout, mode="single_mask",
                   training=training, rng=rng)
    return o, m, nn.classify(p.classifier, m)
