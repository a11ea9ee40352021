#!/usr/bin/env python3
"""Write the two diagnostic corpora as CoNLL-U files.

Produces <outdir>/{suffix_context,complementary}_{train,dev}.conllu.
The complementary train split can be corrupted with paired-tag label
noise via --noise-rate.
"""

import argparse
from pathlib import Path

from metatagger import data, synthetic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n-train", type=int, default=60)
    ap.add_argument("--n-dev", type=int, default=30)
    ap.add_argument("--n-closed", type=int, default=12)
    ap.add_argument("--noise-rate", type=float, default=0.0)
    ns = ap.parse_args()
    ns.outdir.mkdir(parents=True, exist_ok=True)

    train, dev = synthetic.suffix_context_corpora(
        ns.seed, n_train=ns.n_train, n_dev=ns.n_dev)
    (ns.outdir / "suffix_context_train.conllu").write_text(
        data.write_conllu(train), encoding="utf-8")
    (ns.outdir / "suffix_context_dev.conllu").write_text(
        data.write_conllu(dev), encoding="utf-8")

    train, dev = synthetic.complementary_corpora(
        ns.seed, n_train=ns.n_train, n_dev=ns.n_dev, n_closed=ns.n_closed,
        noise_rate=ns.noise_rate, noise_seed=ns.seed + 999)
    (ns.outdir / "complementary_train.conllu").write_text(
        data.write_conllu(train), encoding="utf-8")
    (ns.outdir / "complementary_dev.conllu").write_text(
        data.write_conllu(dev), encoding="utf-8")
    print(f"wrote 4 corpora to {ns.outdir}")


if __name__ == "__main__":
    main()
