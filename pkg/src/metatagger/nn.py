"""Neural layers on top of the tensor core.

Contains embeddings, inverted dropout, LSTM cells, stacked BiLSTMs, the
single-affine ELU MLP, linear classifiers, softmax cross-entropy and the
attention pool used by the token-internal character baseline.

Two routes exist for the LSTM: ``lstm_step`` composes primitive ops (the
readable reference), while ``lstm_run`` is a fused sequence op with a
hand-written backward pass. The fused op is what the encoders use; the
tests pin it to the composed version and to finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _gaussian(shape, rng: np.random.Generator, std: float) -> Tensor:
    return T.create(shape, init="gaussian", rng=rng, std=std, requires_grad=True)


def _zeros(shape) -> Tensor:
    return T.create(shape, init="zeros", requires_grad=True)


def init_std(kind: str, fan_in: int) -> float:
    """Weight init scale: "gaussian" is unit variance, "scaled" is 1/fan_in."""
    if kind == "gaussian":
        return 1.0
    if kind == "scaled":
        return 1.0 / np.sqrt(fan_in)
    raise ValueError(f"unknown init kind {kind!r}")


# ---------------------------------------------------------------------------
# dropout

def dropout(x: Tensor, rate: float, *, mode: str = "single_mask",
            training: bool = True, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout. "single_mask" reuses one feature mask across all
    rows of a matrix (the variational style); "per_position" draws an
    independent mask per entry. Identity when not training or rate is 0.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = 1.0 - rate
    if mode == "per_position":
        mask = (rng.random(x.shape) < keep) / keep
    elif mode == "single_mask":
        row = (rng.random(x.shape[-1]) < keep) / keep
        mask = np.broadcast_to(row, x.shape).copy()
    else:
        raise ValueError(f"unknown dropout mode {mode!r}")
    return T.mul(x, Tensor(mask))


def state_dropout_mask(size: int, rate: float, training: bool,
                       rng: np.random.Generator | None) -> np.ndarray | None:
    """Recurrent-state mask for one LSTM direction, reused at every step."""
    if not training or rate == 0.0:
        return None
    keep = 1.0 - rate
    return (rng.random(size) < keep) / keep


# ---------------------------------------------------------------------------
# embeddings

def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows; gradients scatter-add into the table."""
    return T.take_rows(table, ids)


# ---------------------------------------------------------------------------
# LSTM

@dataclass
class LstmParams:
    """One LSTM direction. Gate order in the fused 4H axis: input, forget,
    candidate, output. ``h0``/``c0`` are the trainable start state."""
    input_size: int
    hidden_size: int
    w_x: Tensor  # (input_size, 4H)
    w_h: Tensor  # (hidden_size, 4H)
    bias: Tensor  # (4H,)
    h0: Tensor  # (H,)
    c0: Tensor  # (H,)

    def parameters(self, prefix: str):
        return [(f"{prefix}.w_x", self.w_x), (f"{prefix}.w_h", self.w_h),
                (f"{prefix}.bias", self.bias), (f"{prefix}.h0", self.h0),
                (f"{prefix}.c0", self.c0)]


def lstm_params(input_size: int, hidden_size: int, rng: np.random.Generator,
                init: str = "scaled") -> LstmParams:
    """Weights Gaussian at the chosen scale, biases and start state zero
    (forget-gate bias included)."""
    return LstmParams(
        input_size=input_size, hidden_size=hidden_size,
        w_x=_gaussian((input_size, 4 * hidden_size), rng, init_std(init, input_size)),
        w_h=_gaussian((hidden_size, 4 * hidden_size), rng, init_std(init, hidden_size)),
        bias=_zeros((4 * hidden_size,)),
        h0=_zeros((hidden_size,)),
        c0=_zeros((hidden_size,)),
    )


def lstm_step(params: LstmParams, x_t: Tensor, h_prev: Tensor,
              c_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One cell update from primitive ops: i,f,o = sigmoid, g = tanh,
    c = f*c_prev + i*g, h = o*tanh(c)."""
    hs = params.hidden_size
    if x_t.shape != (params.input_size,):
        raise T.ShapeError(
            f"lstm_step: input shape {x_t.shape} != ({params.input_size},)")
    s = T.add(T.add(T.matmul(x_t, params.w_x), T.matmul(h_prev, params.w_h)),
              params.bias)
    i = T.sigmoid(T.slice_rows(s, 0, hs))
    f = T.sigmoid(T.slice_rows(s, hs, 2 * hs))
    g = T.tanh(T.slice_rows(s, 2 * hs, 3 * hs))
    o = T.sigmoid(T.slice_rows(s, 3 * hs, 4 * hs))
    c = T.add(T.mul(f, c_prev), T.mul(i, g))
    h = T.mul(o, T.tanh(c))
    return h, c


def lstm_run(params: LstmParams, xs: Tensor,
             h_mask: np.ndarray | None = None) -> Tensor:
    """Run the cell over a (time, input) matrix; returns (time, hidden).

    Fused into a single tape node: the whole-sequence backward is written by
    hand, which keeps the tape short. When ``h_mask`` is given it multiplies
    the hidden state (including h0) before each recurrence step, the same
    mask at every step.
    """
    if xs.ndim != 2 or xs.shape[1] != params.input_size:
        raise T.ShapeError(
            f"lstm_run: input shape {xs.shape} incompatible with "
            f"input_size {params.input_size}")
    n = xs.shape[0]
    if n == 0:
        raise T.ShapeError("lstm_run: empty sequence")
    hs = params.hidden_size
    wx, wh = params.w_x.data, params.w_h.data
    mask = np.ones(hs) if h_mask is None else h_mask

    pre_x = xs.data @ wx + params.bias.data  # (n, 4H)
    ig = np.empty((n, hs)); fg = np.empty((n, hs))
    gg = np.empty((n, hs)); og = np.empty((n, hs))
    tc = np.empty((n, hs))
    c_prevs = np.empty((n, hs))
    h_tilde = np.empty((n, hs))  # masked previous hidden state per step
    out = np.empty((n, hs))

    h = params.h0.data
    c = params.c0.data
    for t in range(n):
        ht = h * mask
        h_tilde[t] = ht
        c_prevs[t] = c
        s = pre_x[t] + ht @ wh
        ig[t] = np.exp(-np.logaddexp(0.0, -s[:hs]))
        fg[t] = np.exp(-np.logaddexp(0.0, -s[hs:2 * hs]))
        gg[t] = np.tanh(s[2 * hs:3 * hs])
        og[t] = np.exp(-np.logaddexp(0.0, -s[3 * hs:]))
        c = fg[t] * c + ig[t] * gg[t]
        tc[t] = np.tanh(c)
        h = og[t] * tc[t]
        out[t] = h

    xs_data = xs.data

    def bwd(g_out):
        d_s = np.empty((n, 4 * hs))
        dh_rec = np.zeros(hs)
        dc_next = np.zeros(hs)
        for t in range(n - 1, -1, -1):
            dh = g_out[t] + dh_rec
            do = dh * tc[t]
            dc = dc_next + dh * og[t] * (1.0 - tc[t] * tc[t])
            df = dc * c_prevs[t]
            di = dc * gg[t]
            dg = dc * ig[t]
            dc_next = dc * fg[t]
            d_s[t, :hs] = di * ig[t] * (1.0 - ig[t])
            d_s[t, hs:2 * hs] = df * fg[t] * (1.0 - fg[t])
            d_s[t, 2 * hs:3 * hs] = dg * (1.0 - gg[t] * gg[t])
            d_s[t, 3 * hs:] = do * og[t] * (1.0 - og[t])
            dh_rec = (d_s[t] @ wh.T) * mask
        d_xs = d_s @ wx.T
        d_wx = xs_data.T @ d_s
        d_wh = h_tilde.T @ d_s
        d_bias = d_s.sum(axis=0)
        return (d_xs, d_wx, d_wh, d_bias, dh_rec, dc_next)

    return T.record("lstm_run",
                    (xs, params.w_x, params.w_h, params.bias,
                     params.h0, params.c0),
                    out, bwd)


# ---------------------------------------------------------------------------
# BiLSTM stack

@dataclass
class BiLstmStack:
    """Stacked bidirectional LSTM; each layer holds a forward and a backward
    direction, deeper layers read the concatenation of both outputs."""
    layers: list[tuple[LstmParams, LstmParams]] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def hidden_size(self) -> int:
        return self.layers[0][0].hidden_size

    def parameters(self, prefix: str):
        out = []
        for j, (fwd, bwd) in enumerate(self.layers):
            out.extend(fwd.parameters(f"{prefix}.layer{j}.fwd"))
            out.extend(bwd.parameters(f"{prefix}.layer{j}.bwd"))
        return out


def bilstm_stack(input_size: int, hidden_size: int, depth: int,
                 rng: np.random.Generator, init: str = "scaled") -> BiLstmStack:
    layers = []
    size = input_size
    for _ in range(depth):
        layers.append((lstm_params(size, hidden_size, rng, init),
                       lstm_params(size, hidden_size, rng, init)))
        size = 2 * hidden_size
    return BiLstmStack(layers)


def bilstm_stack_run(stack: BiLstmStack, xs: Tensor, *,
                     dropout_rate: float = 0.0, training: bool = False,
                     rng: np.random.Generator | None = None
                     ) -> tuple[Tensor, Tensor]:
    """Top-layer forward and backward output matrices, each (time, hidden).

    The same rate drives input dropout (one feature mask per layer, reused
    across time) and recurrent-state dropout (one mask per direction per
    layer, applied inside the recurrence).
    """
    if xs.shape[0] == 0:
        raise T.ShapeError("bilstm_stack_run: empty sequence")
    if stack.depth == 0:
        raise T.ShapeError("bilstm_stack_run: stack has no layers")
    h = xs
    for j, (p_fwd, p_bwd) in enumerate(stack.layers):
        h = dropout(h, dropout_rate, mode="single_mask", training=training,
                    rng=rng)
        m_f = state_dropout_mask(p_fwd.hidden_size, dropout_rate, training, rng)
        m_b = state_dropout_mask(p_bwd.hidden_size, dropout_rate, training, rng)
        f = lstm_run(p_fwd, h, m_f)
        b = T.flip_rows(lstm_run(p_bwd, T.flip_rows(h), m_b))
        if j + 1 < stack.depth:
            h = T.concat([f, b], axis=1)
    return f, b


# ---------------------------------------------------------------------------
# MLP and classifier

@dataclass
class MlpParams:
    """Single affine map followed by ELU."""
    weight: Tensor  # (in, out)
    bias: Tensor  # (out,)

    @property
    def output_size(self) -> int:
        return self.weight.shape[1]

    def parameters(self, prefix: str):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


def mlp_params(input_size: int, output_size: int, rng: np.random.Generator,
               init: str = "gaussian") -> MlpParams:
    return MlpParams(weight=_gaussian((input_size, output_size), rng,
                                      init_std(init, input_size)),
                     bias=_zeros((output_size,)))


def mlp_apply(params: MlpParams, x: Tensor) -> Tensor:
    return T.elu(T.add(T.matmul(x, params.weight), params.bias))


@dataclass
class ClassifierParams:
    """Linear map from representation to tag logits."""
    weight: Tensor  # (in, n_tags)
    bias: Tensor  # (n_tags,)

    @property
    def n_tags(self) -> int:
        return self.weight.shape[1]

    def parameters(self, prefix: str):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


def classifier_params(input_size: int, n_tags: int, rng: np.random.Generator,
                      init: str = "scaled") -> ClassifierParams:
    return ClassifierParams(weight=_gaussian((input_size, n_tags), rng,
                                             init_std(init, input_size)),
                            bias=_zeros((n_tags,)))


def classify(params: ClassifierParams, x: Tensor) -> Tensor:
    return T.add(T.matmul(x, params.weight), params.bias)


# ---------------------------------------------------------------------------
# losses and prediction

def softmax_xent_rows(logits: Tensor, golds) -> Tensor:
    """Mean over rows of -log softmax(row)[gold]; max-subtracted for
    stability. One fused tape node."""
    golds = np.asarray(golds, dtype=np.intp)
    if logits.ndim != 2:
        raise T.ShapeError(f"softmax_xent: logits must be 2-D, got {logits.shape}")
    n, k = logits.shape
    if golds.shape != (n,):
        raise T.ShapeError(
            f"softmax_xent: {n} logit rows vs {golds.shape} gold labels")
    if n == 0:
        raise T.ShapeError("softmax_xent: empty batch")
    if golds.min() < 0 or golds.max() >= k:
        raise IndexError(f"softmax_xent: gold label out of range 0..{k - 1}")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    probs = ez / ez.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    loss = float(-np.mean(np.log(probs[rows, golds])))

    def bwd(g):
        d = probs.copy()
        d[rows, golds] -= 1.0
        return (d * (g / n),)

    return T.record("softmax_xent", (logits,), np.float64(loss), bwd)


def softmax_xent(logits: Tensor, gold: int) -> Tensor:
    """Cross-entropy of a single logits vector against one gold index."""
    if logits.ndim != 1:
        raise T.ShapeError(f"softmax_xent: expected a vector, got {logits.shape}")
    return softmax_xent_rows(T.reshape(logits, (1, logits.shape[0])), [gold])


def softmax_vec(x: Tensor) -> Tensor:
    """Softmax over a vector, as a differentiable op."""
    if x.ndim != 1:
        raise T.ShapeError(f"softmax_vec: expected a vector, got {x.shape}")
    e = np.exp(x.data - x.data.max())
    out = e / e.sum()

    def bwd(g):
        return (out * (g - np.dot(g, out)),)

    return T.record("softmax_vec", (x,), out, bwd)


def predict_tags(logits: Tensor) -> np.ndarray:
    """Argmax per row; ties resolve to the lowest tag id."""
    return np.argmax(logits.data, axis=-1)


# ---------------------------------------------------------------------------
# token-internal character attention (DQM pooling)

def char_attention(score_vec: Tensor, states: Tensor) -> Tensor:
    """Attention pool over per-character LSTM states, plus the final state.

    Scores are dot products with a learned vector; the softmax-weighted sum
    of states is added to the last state to form the token representation.
    """
    if states.ndim != 2 or states.shape[0] == 0:
        raise T.ShapeError(f"char_attention: need (chars, hidden) states, "
                           f"got {states.shape}")
    n, h = states.shape
    alpha = softmax_vec(T.matmul(states, score_vec))
    pooled = T.matmul(alpha, states)
    final = T.reshape(T.slice_rows(states, n - 1, n), (h,))
    return T.add(pooled, final)
