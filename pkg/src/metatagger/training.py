"""Training: three cross-entropy losses, three Adam optimizers, one epoch =
one full pass per model in the order character, word, meta. Dev accuracy of
the meta predictions drives model selection; the best parameter triple is
what a run returns. Joint mode (single summed loss, one optimizer, no
detach) exists for the optimization ablation.

Also here: the hyperparameter dataclass with the reference defaults, the
deterministic checkpoint container, and the per-epoch log line format.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import encoders, meta, nn
from . import tensor as T
from .data import Sentence, Vocabs
from .evaluation import score
from .tensor import Tensor

CHECKPOINT_FORMAT = "metatagger-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters. The defaults are the reference settings audited by
    the golden-config test; fields that audit does not pin (batch size,
    epoch budget, LSTM weight init, embedding widths) are documented
    package decisions."""
    task: str = "xpos"  # upos | xpos | feats
    seed: int = 1
    max_epochs: int = 200
    batch_size: int = 32
    patience: int = 0  # 0 disables early stopping
    optimization: str = "separate"  # separate | joint
    char_encoder: str = "sentence"  # sentence | token
    gather: str = "F_1st,F_last,B_1st,B_last"
    # architecture
    char_bilstm_layers: int = 3
    word_bilstm_layers: int = 3
    meta_bilstm_layers: int = 1
    char_bilstm_size: int = 400
    word_bilstm_size: int = 400
    meta_bilstm_size: int = 400
    lstm_dropout: float = 0.33
    mlp_dropout: float = 0.33
    word_emb_dropout: float = 0.33
    char_emb_dropout: float = 0.05
    mlp_activation: str = "elu"  # informational: the only implemented choice
    mlp_size: int = 400
    char_emb_dim: int = 100
    word_emb_dim: int = 100  # replaced by the pretrained dimension when given
    # initialization
    word_emb_init: str = "zero"
    char_emb_init: str = "gaussian"
    mlp_init: str = "gaussian"
    lstm_init: str = "scaled"  # not covered by the table; 1/sqrt(fan_in)
    # optimization
    optimizer: str = "adam"  # informational: the only implemented choice
    loss: str = "cross_entropy"  # informational: the only implemented choice
    learning_rate: float = 0.002
    decay: float = 0.999994  # per optimizer step
    adam_epsilon: float = 1e-08
    beta1: float = 0.9
    beta2: float = 0.999
    # data handling
    lowercase_pretrained_fallback: bool = True
    min_count: int = 1

    def gather_parts(self) -> tuple[str, ...]:
        return encoders.canonical_gather(
            p.strip() for p in self.gather.split(","))

    def validate(self) -> None:
        if self.task not in ("upos", "xpos", "feats"):
            raise ValueError(f"task must be upos/xpos/feats, got {self.task!r}")
        if self.optimization not in ("separate", "joint"):
            raise ValueError(
                f"optimization must be separate or joint, got "
                f"{self.optimization!r}")
        if self.char_encoder not in ("sentence", "token"):
            raise ValueError(
                f"char_encoder must be sentence or token, got "
                f"{self.char_encoder!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        self.gather_parts()


def print_config(config: TrainConfig) -> str:
    """Canonical key = value rendering of every field, in declaration order."""
    lines = []
    for f in dataclasses.fields(config):
        lines.append(f"{f.name} = {getattr(config, f.name)}")
    return "\n".join(lines) + "\n"


def config_from_dict(values: dict) -> TrainConfig:
    """Build a config from string-keyed values, coercing to field types."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    kwargs = {}
    for key, raw in values.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(raw, fields[key].type, key)
    config = TrainConfig(**kwargs)
    config.validate()
    return config


def _coerce(raw, typ: str, key: str):
    if not isinstance(raw, str):
        return raw
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    if typ == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key}: cannot read {raw!r} as bool")
    return raw


# ---------------------------------------------------------------------------
# optimizer

class Adam:
    """Adam with bias correction and multiplicative per-step rate decay.

    The effective rate of an update is learning_rate * decay**steps_done,
    so the very first update runs at the full learning rate.
    """

    def __init__(self, params, lr: float = 0.002, decay: float = 0.999994,
                 beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-08):
        self.params = list(params)
        self.lr = lr
        self.decay = decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def effective_rate(self) -> float:
        return self.lr * self.decay ** self.steps

    def step(self) -> None:
        rate = self.effective_rate()
        self.steps += 1
        t = self.steps
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise T.NonFiniteError(f"non-finite gradient in {name}")
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1 ** t)
            v_hat = v / (1 - b2 ** t)
            p.data -= rate * m_hat / (np.sqrt(v_hat) + self.epsilon)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# model assembly

@dataclass
class TaggerModel:
    config: TrainConfig
    vocabs: Vocabs
    char_sent: encoders.CharSentEncoderParams | None
    char_token: encoders.CharTokenEncoderParams | None
    word: encoders.WordEncoderParams
    combiner: meta.MetaParams

    def char_parameters(self):
        if self.char_sent is not None:
            return self.char_sent.parameters()
        return self.char_token.parameters()

    def word_parameters(self):
        return self.word.parameters()

    def meta_parameters(self):
        return self.combiner.parameters()

    def all_parameters(self):
        return (self.char_parameters() + self.word_parameters()
                + self.meta_parameters())

    def array_manifest(self):
        """Stable (name, array) list covering everything a tag run needs:
        trainable parameters plus the frozen pretrained matrix."""
        entries = [(name, p.data) for name, p in self.all_parameters()]
        entries.append(("word.pretrained", self.word.pretrained.data))
        return entries


def build_model(config: TrainConfig, vocabs: Vocabs,
                pretrained: np.ndarray | None = None) -> TaggerModel:
    """Construct all parameter sets from the config seed. The construction
    order is fixed, so a (config, vocabs) pair determines every array."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    word_dim = pretrained.shape[1] if pretrained is not None \
        else config.word_emb_dim

    char_sent = char_token = None
    if config.char_encoder == "sentence":
        char_sent = encoders.char_sent_encoder(
            vocabs.n_chars, vocabs.n_tags, emb_dim=config.char_emb_dim,
            hidden=config.char_bilstm_size, depth=config.char_bilstm_layers,
            mlp_size=config.mlp_size, gather=config.gather_parts(), rng=rng,
            emb_init=config.char_emb_init, mlp_init=config.mlp_init,
            lstm_init=config.lstm_init, emb_dropout=config.char_emb_dropout,
            lstm_dropout=config.lstm_dropout, mlp_dropout=config.mlp_dropout)
        char_rep_size = config.mlp_size
    else:
        char_token = encoders.char_token_encoder(
            vocabs.n_chars, vocabs.n_tags, emb_dim=config.char_emb_dim,
            hidden=config.char_bilstm_size, rng=rng,
            emb_init=config.char_emb_init, lstm_init=config.lstm_init,
            emb_dropout=config.char_emb_dropout,
            lstm_dropout=config.lstm_dropout)
        char_rep_size = config.char_bilstm_size

    word = encoders.word_encoder(
        vocabs.n_words, vocabs.n_tags, emb_dim=word_dim,
        pretrained=pretrained, hidden=config.word_bilstm_size,
        depth=config.word_bilstm_layers, mlp_size=config.mlp_size, rng=rng,
        mlp_init=config.mlp_init, lstm_init=config.lstm_init,
        emb_dropout=config.word_emb_dropout,
        lstm_dropout=config.lstm_dropout, mlp_dropout=config.mlp_dropout)

    combiner = meta.meta_params(
        char_rep_size, config.mlp_size, vocabs.n_tags,
        hidden=config.meta_bilstm_size, depth=config.meta_bilstm_layers,
        mlp_size=config.mlp_size, rng=rng, mlp_init=config.mlp_init,
        lstm_init=config.lstm_init, lstm_dropout=config.lstm_dropout,
        mlp_dropout=config.mlp_dropout)

    return TaggerModel(config=config, vocabs=vocabs, char_sent=char_sent,
                       char_token=char_token, word=word, combiner=combiner)


def char_forward(model: TaggerModel, sentence: Sentence, training=False,
                 rng=None) -> tuple[Tensor, Tensor]:
    """(representation consumed by the combiner, char-head logits)."""
    if model.char_sent is not None:
        _, m, logits = encoders.encode_chars_sentence(
            model.char_sent, sentence, training=training, rng=rng)
    else:
        m, logits = encoders.encode_chars_token(
            model.char_token, sentence, training=training, rng=rng)
    return m, logits


def word_forward(model: TaggerModel, sentence: Sentence, training=False,
                 rng=None) -> tuple[Tensor, Tensor]:
    _, m, logits = encoders.encode_words(model.word, sentence,
                                         training=training, rng=rng)
    return m, logits


def meta_forward(model: TaggerModel, sentence: Sentence, training=False,
                 rng=None, detach=True) -> Tensor:
    m_c, _ = char_forward(model, sentence, training, rng)
    m_w, _ = word_forward(model, sentence, training, rng)
    _, logits = meta.combine(model.combiner, m_c, m_w, training=training,
                             rng=rng, detach=detach)
    return logits


def predict_sentence(model: TaggerModel, sentence: Sentence) -> list[str]:
    """Tag strings from the combiner head (the only head used at test time)."""
    if len(sentence.tokens) == 0:
        return []
    logits = meta_forward(model, sentence, training=False)
    names = model.vocabs.tag_strings()
    return [names[i] for i in meta.predict(logits)]


def tag_corpus(model: TaggerModel, sentences: list[Sentence]) -> list[list[str]]:
    return [predict_sentence(model, s) for s in sentences]


def _head_accuracy(model, sentences, head: str) -> float:
    """Dev accuracy through a single head (used by ablation reports)."""
    names = model.vocabs.tag_strings()
    preds = []
    for s in sentences:
        if len(s.tokens) == 0:
            preds.append([])
            continue
        if head == "char":
            _, logits = char_forward(model, s)
        elif head == "word":
            _, logits = word_forward(model, s)
        else:
            logits = meta_forward(model, s)
        preds.append([names[i] for i in meta.predict(logits)])
    return score(sentences, preds, model.config.task).accuracy


def evaluate(model: TaggerModel, sentences: list[Sentence],
             head: str = "meta") -> float:
    return _head_accuracy(model, sentences, head)


# ---------------------------------------------------------------------------
# the training loop

def _gold_ids(vocabs: Vocabs, sentence: Sentence, task: str) -> list[int]:
    ids = []
    for tag in sentence.gold_tags(task):
        i = vocabs.tag_id(tag)
        if i is None:
            raise ValueError(f"gold tag {tag!r} missing from the training "
                             f"tag vocabulary")
        ids.append(i)
    return ids


def _mean_loss(losses: list[Tensor]) -> Tensor:
    total = losses[0]
    for l in losses[1:]:
        total = T.add(total, l)
    return T.scale(total, 1.0 / len(losses))


def _batches(order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        yield order[start:start + size]


def _run_pass(model, sentences, order, batch_size, optimizer, rng,
              head: str, detach=True) -> float:
    """One full pass over the training data for one loss head. Returns the
    mean per-batch loss."""
    task = model.config.task
    batch_losses = []
    for batch_idx in _batches(order, batch_size):
        optimizer.zero_grad()
        with T.Graph() as g:
            losses = []
            for si in batch_idx:
                s = sentences[si]
                golds = _gold_ids(model.vocabs, s, task)
                if head == "char":
                    _, logits = char_forward(model, s, training=True, rng=rng)
                    losses.append(nn.softmax_xent_rows(logits, golds))
                elif head == "word":
                    _, logits = word_forward(model, s, training=True, rng=rng)
                    losses.append(nn.softmax_xent_rows(logits, golds))
                elif head == "meta":
                    logits = meta_forward(model, s, training=True, rng=rng,
                                          detach=detach)
                    losses.append(nn.softmax_xent_rows(logits, golds))
                else:  # joint: sum of the three heads, no detach
                    m_c, logits_c = char_forward(model, s, training=True,
                                                 rng=rng)
                    m_w, logits_w = word_forward(model, s, training=True,
                                                 rng=rng)
                    _, logits_m = meta.combine(model.combiner, m_c, m_w,
                                               training=True, rng=rng,
                                               detach=False)
                    losses.append(T.add(
                        T.add(nn.softmax_xent_rows(logits_c, golds),
                              nn.softmax_xent_rows(logits_w, golds)),
                        nn.softmax_xent_rows(logits_m, golds)))
            batch_loss = _mean_loss(losses)
        g.backward(batch_loss)
        optimizer.step()
        batch_losses.append(batch_loss.item())
    optimizer.zero_grad()
    return float(np.mean(batch_losses))


def train_epoch_synchronous(model: TaggerModel, opt_char: Adam,
                            opt_word: Adam, opt_meta: Adam,
                            sentences: list[Sentence], order: np.ndarray,
                            batch_size: int, rng: np.random.Generator
                            ) -> tuple[float, float, float]:
    """Character pass, then word pass, then meta pass, each over the whole
    shuffled corpus with its own optimizer. The meta pass sees the encoders
    as just updated this epoch, through detached outputs."""
    c = _run_pass(model, sentences, order, batch_size, opt_char, rng, "char")
    w = _run_pass(model, sentences, order, batch_size, opt_word, rng, "word")
    m = _run_pass(model, sentences, order, batch_size, opt_meta, rng, "meta")
    return c, w, m


@dataclass
class Checkpoint:
    config: TrainConfig
    vocabs: Vocabs
    arrays: dict[str, np.ndarray]
    best_score: float
    best_epoch: int

    def rebuild(self) -> TaggerModel:
        """Instantiate a model and overwrite its arrays with the saved ones."""
        model = build_model(self.config, self.vocabs,
                            pretrained=self.arrays["word.pretrained"])
        for name, arr in model.array_manifest():
            saved = self.arrays.get(name)
            if saved is None:
                raise ValueError(f"checkpoint is missing array {name!r}")
            if saved.shape != arr.shape:
                raise ValueError(
                    f"checkpoint array {name!r} has shape {saved.shape}, "
                    f"model expects {arr.shape}")
            arr[...] = saved
        return model


def _snapshot(model: TaggerModel) -> dict[str, np.ndarray]:
    return {name: arr.copy() for name, arr in model.array_manifest()}


def prepare(config: TrainConfig, train_sentences: list[Sentence],
            dev_sentences: list[Sentence],
            pretrained_path: str | None = None
            ) -> tuple[TaggerModel, list[Sentence], list[Sentence]]:
    """Vocabularies from the training corpus, ids onto both corpora,
    pretrained vectors aligned to the vocabulary, model built."""
    from .data import assign_ids, build_vocabs, load_pretrained

    config.validate()
    train_sentences = [s for s in train_sentences if len(s.tokens) > 0]
    dev_sentences = [s for s in dev_sentences if len(s.tokens) > 0]
    if not train_sentences:
        raise ValueError("training corpus has no non-empty sentences")
    if not dev_sentences:
        raise ValueError("dev corpus has no non-empty sentences")
    vocabs = build_vocabs(train_sentences, task=config.task,
                          min_count=config.min_count)
    assign_ids(train_sentences, vocabs)
    assign_ids(dev_sentences, vocabs)
    pretrained = None
    if pretrained_path is not None:
        emb = load_pretrained(pretrained_path, vocabs,
                              config.lowercase_pretrained_fallback)
        pretrained = emb.matrix
    model = build_model(config, vocabs, pretrained=pretrained)
    return model, train_sentences, dev_sentences


def train(config: TrainConfig, train_sentences: list[Sentence],
          dev_sentences: list[Sentence], pretrained_path: str | None = None,
          log=None) -> Checkpoint:
    """Run the synchronous (or joint) schedule for up to max_epochs and
    return the checkpoint with the best dev accuracy of the combiner head.

    Epoch 0 is the initialized model; a later epoch replaces it only when
    strictly better. ``log`` is called with one formatted line per epoch.
    """
    model, tr, dv = prepare(config, train_sentences, dev_sentences,
                            pretrained_path)
    return train_model(model, tr, dv, log=log)


def train_model(model: TaggerModel, train_sentences: list[Sentence],
                dev_sentences: list[Sentence], log=None) -> Checkpoint:
    """Training loop over an already-built model (vocab ids must be
    assigned to both corpora)."""
    config = model.config
    emit = log if log is not None else (lambda line: None)
    seq = np.random.SeedSequence(config.seed)
    order_seed, dropout_seed = seq.spawn(2)
    order_rng = np.random.default_rng(order_seed)
    dropout_rng = np.random.default_rng(dropout_seed)

    if config.optimization == "separate":
        opt_char = _make_adam(model.char_parameters(), config)
        opt_word = _make_adam(model.word_parameters(), config)
        opt_meta = _make_adam(model.meta_parameters(), config)
    else:
        opt_all = _make_adam(model.all_parameters(), config)

    best_score = evaluate(model, dev_sentences)
    best_epoch = 0
    best_arrays = _snapshot(model)
    emit(f"epoch=0 dev_acc={best_score:.6f}")

    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        order = order_rng.permutation(len(train_sentences))
        if config.optimization == "separate":
            c, w, m = train_epoch_synchronous(
                model, opt_char, opt_word, opt_meta, train_sentences, order,
                config.batch_size, dropout_rng)
        else:
            joint = _run_pass(model, train_sentences, order,
                              config.batch_size, opt_all, dropout_rng,
                              "joint", detach=False)
            c = w = m = joint
        acc = evaluate(model, dev_sentences)
        emit(f"epoch={epoch} char_loss={c:.6f} word_loss={w:.6f} "
             f"meta_loss={m:.6f} dev_acc={acc:.6f}")
        if acc > best_score:
            best_score = acc
            best_epoch = epoch
            best_arrays = _snapshot(model)
            since_best = 0
        else:
            since_best += 1
            if config.patience and since_best >= config.patience:
                emit(f"stopped early at epoch={epoch} "
                     f"(no improvement in {config.patience})")
                break

    checkpoint = Checkpoint(config=config, vocabs=model.vocabs,
                            arrays=best_arrays, best_score=best_score,
                            best_epoch=best_epoch)
    # leave the in-memory model at its best state too
    for name, arr in model.array_manifest():
        arr[...] = best_arrays[name]
    return checkpoint


def _make_adam(params, config: TrainConfig) -> Adam:
    return Adam(params, lr=config.learning_rate, decay=config.decay,
                beta1=config.beta1, beta2=config.beta2,
                epsilon=config.adam_epsilon)


# ---------------------------------------------------------------------------
# checkpoint container
#
# Layout: one JSON manifest line (format, version, config, vocabs, scores,
# array name/shape/offset table), then the arrays' raw float64 little-endian
# bytes concatenated in manifest order. No timestamps anywhere, so equal
# models produce equal files.

def checkpoint_save(path: str, checkpoint: Checkpoint) -> None:
    names = list(checkpoint.arrays)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": dataclasses.asdict(checkpoint.config),
        "vocabs": {
            "words": checkpoint.vocabs.words,
            "chars": checkpoint.vocabs.chars,
            "tags": checkpoint.vocabs.tags,
            "task": checkpoint.vocabs.task,
        },
        "best_score": checkpoint.best_score,
        "best_epoch": checkpoint.best_epoch,
        "arrays": [{"name": n, "shape": list(checkpoint.arrays[n].shape)}
                   for n in names],
    }
    header = json.dumps(manifest, ensure_ascii=False,
                        separators=(",", ":")).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(
                checkpoint.arrays[n], dtype="<f8").tobytes())
    os.replace(tmp, path)


def checkpoint_load(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    if newline < 0:
        raise ValueError(f"{path}: not a checkpoint (no manifest line)")
    try:
        manifest = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"{path}: corrupt manifest: {e}") from None
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: checkpoint version {manifest.get('version')} is not "
            f"supported (expected {CHECKPOINT_VERSION})")
    body = blob[newline + 1:]
    arrays = {}
    offset = 0
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = body[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError(f"{path}: truncated checkpoint "
                             f"(array {entry['name']!r} incomplete)")
        arrays[entry["name"]] = np.frombuffer(
            chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise ValueError(f"{path}: trailing bytes after the last array")
    config = config_from_dict(manifest["config"])
    vocabs = Vocabs(words=manifest["vocabs"]["words"],
                    chars=manifest["vocabs"]["chars"],
                    tags=manifest["vocabs"]["tags"],
                    task=manifest["vocabs"]["task"])
    return Checkpoint(config=config, vocabs=vocabs, arrays=arrays,
                      best_score=manifest["best_score"],
                      best_epoch=manifest["best_epoch"])
