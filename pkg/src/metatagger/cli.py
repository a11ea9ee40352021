"""Command-line workflows binding the modules together.

Subcommands: train, tag, eval, grid, ablate. Configuration comes from
three layers, later ones winning: a config file of `key = value` lines
(full-line '#' comments allowed), repeated `--set key=value` flags, and
the dedicated flags (--task, --seed, --optimization, file paths). The
METATAGGER_SEED environment variable supplies the default seed when no
layer sets one. `train --print-config` dumps the effective configuration
and exits.

Path keys accepted in config files: train_file, dev_file, pretrained_file,
checkpoint_file, log_file.

Exit codes: 0 success, 1 usage or configuration problem, 2 data problem
(unreadable or malformed files, alignment failures, corrupt checkpoints).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import data, evaluation, training
from .data import DataError
from .evaluation import AlignmentError

SEED_ENV = "METATAGGER_SEED"
PATH_KEYS = ("train_file", "dev_file", "pretrained_file",
             "checkpoint_file", "log_file")

GATHER_ABLATION = ("F_last,B_1st", "F_1st,B_last",
                   "F_last,B_last", "F_1st,B_1st")


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e.strerror or e}") from None


def _parse_corpus(path: str) -> list[data.Sentence]:
    return data.parse_conllu(_read_text(path))


def _load_checkpoint(path: str) -> training.Checkpoint:
    try:
        return training.checkpoint_load(path)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except ValueError as e:
        raise DataError(str(e)) from None


def read_config_file(path: str) -> dict[str, str]:
    """`key = value` lines; blank lines and full-line '#' comments skipped."""
    values = {}
    for n, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliUsageError(f"{path}:{n}: expected key = value, "
                                f"got {line!r}")
        values[key.strip()] = value.strip()
    return values


def effective_config(ns) -> tuple[training.TrainConfig, dict[str, str]]:
    """Merge env seed, config file, --set pairs, and dedicated flags."""
    cfg_vals: dict[str, object] = {}
    paths: dict[str, str] = {}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        cfg_vals["seed"] = env_seed
    if getattr(ns, "config", None):
        for key, value in read_config_file(ns.config).items():
            (paths if key in PATH_KEYS else cfg_vals)[key] = value
    for item in getattr(ns, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliUsageError(f"--set expects key=value, got {item!r}")
        key, value = key.strip(), value.strip()
        (paths if key in PATH_KEYS else cfg_vals)[key] = value
    for flag in ("task", "seed", "optimization"):
        value = getattr(ns, flag, None)
        if value is not None:
            cfg_vals[flag] = value
    for flag, key in (("train", "train_file"), ("dev", "dev_file"),
                      ("pretrained", "pretrained_file"),
                      ("checkpoint", "checkpoint_file"),
                      ("log", "log_file")):
        value = getattr(ns, flag, None)
        if value is not None:
            paths[key] = value
    try:
        config = training.config_from_dict(cfg_vals)
    except ValueError as e:
        raise CliUsageError(str(e)) from None
    return config, paths


def _corpora(config, paths) -> tuple[list[data.Sentence], list[data.Sentence]]:
    if "train_file" not in paths:
        raise CliUsageError("a training corpus is required "
                            "(--train or train_file in the config)")
    train_sents = _parse_corpus(paths["train_file"])
    if "dev_file" in paths:
        dev_sents = _parse_corpus(paths["dev_file"])
    else:
        train_sents, dev_sents = data.dev_split(train_sents, fraction=0.1,
                                                seed=config.seed)
        print(f"no dev file given: holding out {len(dev_sents)} "
              f"of {len(dev_sents) + len(train_sents)} sentences",
              file=sys.stderr)
    return train_sents, dev_sents


def cmd_train(ns) -> int:
    config, paths = effective_config(ns)
    if ns.print_config:
        sys.stdout.write(training.print_config(config))
        return 0
    if "checkpoint_file" not in paths:
        raise CliUsageError("a checkpoint path is required "
                            "(--checkpoint or checkpoint_file in the config)")
    train_sents, dev_sents = _corpora(config, paths)
    log_lines: list[str] = []

    def emit(line: str) -> None:
        print(line)
        log_lines.append(line)

    ckpt = training.train(config, train_sents, dev_sents,
                          pretrained_path=paths.get("pretrained_file"),
                          log=emit)
    training.checkpoint_save(paths["checkpoint_file"], ckpt)
    if "log_file" in paths:
        Path(paths["log_file"]).write_text("\n".join(log_lines) + "\n",
                                           encoding="utf-8")
    print(f"best epoch={ckpt.best_epoch} dev_acc={ckpt.best_score:.6f}")
    print(f"checkpoint written to {paths['checkpoint_file']}")
    return 0


def cmd_tag(ns) -> int:
    ckpt = _load_checkpoint(ns.checkpoint)
    model = ckpt.rebuild()
    sentences = data.parse_conllu(_read_text(ns.input))
    data.assign_ids(sentences, ckpt.vocabs)
    tags = training.tag_corpus(model, sentences)
    text = data.write_conllu(sentences, tags, task=ckpt.config.task)
    Path(ns.output).write_text(text, encoding="utf-8")
    n_tokens = sum(len(s.tokens) for s in sentences)
    print(f"tagged {n_tokens} tokens in {len(sentences)} sentences "
          f"({ckpt.config.task} column)")
    return 0


def cmd_eval(ns) -> int:
    gold = _parse_corpus(ns.gold)
    pred = _parse_corpus(ns.pred)
    report = evaluation.score(gold, pred, ns.task)
    for line in report.lines():
        print(line)
    if ns.csv:
        Path(ns.csv).write_text(
            "task,total,correct,accuracy\n"
            f"{report.task},{report.total},{report.correct},"
            f"{report.accuracy:.6f}\n", encoding="utf-8")
    return 0


def _parse_sizes(spec: str) -> list[int]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise CliUsageError(f"--sizes expects start:stop:step, got {spec!r}")
    try:
        start, stop, step = (int(p) for p in parts)
    except ValueError:
        raise CliUsageError(f"--sizes expects integers, got {spec!r}") \
            from None
    if step <= 0 or stop < start or start <= 0:
        raise CliUsageError(f"--sizes range is empty or invalid: {spec!r}")
    return list(range(start, stop + 1, step))


def cmd_grid(ns) -> int:
    config, paths = effective_config(ns)
    train_sents, dev_sents = _corpora(config, paths)
    pretrained = paths.get("pretrained_file")
    sizes = _parse_sizes(ns.sizes)
    lines = ["char_size,word_size,dev_accuracy"]
    for char_size in sizes:
        for word_size in sizes:
            cell = dataclasses.replace(config, char_bilstm_size=char_size,
                                       word_bilstm_size=word_size)
            try:
                ckpt = training.train(cell, train_sents, dev_sents,
                                      pretrained_path=pretrained)
                value = f"{ckpt.best_score:.6f}"
            except Exception as e:
                value = "error: " + str(e).replace(",", ";").replace("\n", " ")
            lines.append(f"{char_size},{word_size},{value}")
    csv = "\n".join(lines) + "\n"
    if ns.out:
        Path(ns.out).write_text(csv, encoding="utf-8")
        print(f"grid written to {ns.out} ({(len(lines) - 1)} cells)")
    else:
        sys.stdout.write(csv)
    return 0


def _ablation_variants(axis: str):
    """(label, config overrides, evaluation head) per variant. The gather
    and context axes score the character head in isolation; optimization
    is judged on the combined head."""
    if axis == "gather":
        return [(strategy.replace(",", "+"), {"gather": strategy}, "char")
                for strategy in GATHER_ABLATION]
    if axis == "context":
        return [("sentence-chars", {"char_encoder": "sentence"}, "char"),
                ("token-chars", {"char_encoder": "token"}, "char")]
    if axis == "optimization":
        return [("separate", {"optimization": "separate"}, "meta"),
                ("joint", {"optimization": "joint"}, "meta")]
    raise CliUsageError(f"unknown ablation axis {axis!r}")


def cmd_ablate(ns) -> int:
    if ns.seeds < 1:
        raise CliUsageError("--seeds must be at least 1")
    config, paths = effective_config(ns)
    train_sents, dev_sents = _corpora(config, paths)
    pretrained = paths.get("pretrained_file")

    def run(cfg):
        model, tr, dv = training.prepare(cfg, train_sents, dev_sents,
                                         pretrained_path=pretrained)
        training.train_model(model, tr, dv)
        return model, dv

    results: dict[str, list[float]] = {}
    if ns.axis == "components":
        for label in ("char-only", "word-only", "meta"):
            results[label] = []
        for k in range(ns.seeds):
            cfg = dataclasses.replace(config, seed=config.seed + k)
            model, dv = run(cfg)
            results["char-only"].append(training.evaluate(model, dv, "char"))
            results["word-only"].append(training.evaluate(model, dv, "word"))
            results["meta"].append(training.evaluate(model, dv, "meta"))
    else:
        for label, overrides, head in _ablation_variants(ns.axis):
            accs = []
            for k in range(ns.seeds):
                cfg = dataclasses.replace(config, seed=config.seed + k,
                                          **overrides)
                model, dv = run(cfg)
                accs.append(training.evaluate(model, dv, head))
            results[label] = accs
    rows = evaluation.ablation_report(results)
    print(evaluation.render_table(rows))
    csv = evaluation.render_csv(rows, task=config.task)
    if ns.out:
        Path(ns.out).write_text(csv, encoding="utf-8")
        print(f"rows written to {ns.out}")
    else:
        sys.stdout.write(csv)
    return 0


def _add_config_flags(sub, with_checkpoint=False):
    sub.add_argument("--config", help="config file of key = value lines")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one config key (repeatable)")
    sub.add_argument("--task", choices=("upos", "xpos", "feats"))
    sub.add_argument("--seed", type=int)
    sub.add_argument("--optimization", choices=("separate", "joint"))
    sub.add_argument("--train", metavar="CONLLU")
    sub.add_argument("--dev", metavar="CONLLU")
    sub.add_argument("--pretrained", metavar="VECTORS")
    if with_checkpoint:
        sub.add_argument("--checkpoint", metavar="PATH")
        sub.add_argument("--log", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metatagger",
                     description="three-view morphosyntactic tagger")
    subs = parser.add_subparsers(dest="command", metavar="command")

    p = subs.add_parser("train", help="train and write a checkpoint")
    _add_config_flags(p, with_checkpoint=True)
    p.add_argument("--print-config", action="store_true",
                   help="print the effective config and exit")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("tag", help="annotate a CoNLL-U file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, metavar="CONLLU")
    p.add_argument("--output", required=True, metavar="CONLLU")
    p.set_defaults(func=cmd_tag)

    p = subs.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True, metavar="CONLLU")
    p.add_argument("--pred", required=True, metavar="CONLLU")
    p.add_argument("--task", default="xpos", choices=("upos", "xpos", "feats"))
    p.add_argument("--csv", metavar="PATH", help="also write a one-row CSV")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("grid", help="LSTM-size grid search")
    _add_config_flags(p)
    p.add_argument("--sizes", default="200:500:50", metavar="START:STOP:STEP")
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=cmd_grid)

    p = subs.add_parser("ablate", help="run one ablation axis over seeds")
    _add_config_flags(p)
    p.add_argument("--axis", required=True,
                   choices=("gather", "context", "optimization", "components"))
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not getattr(ns, "func", None):
            parser.print_usage(sys.stderr)
            return 1
        return ns.func(ns)
    except CliUsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (DataError, AlignmentError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
