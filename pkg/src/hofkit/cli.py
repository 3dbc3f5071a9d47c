"""Command-line front door for the tweet classification pipeline.

Subcommands: preprocess | embed-train | train | eval | predict | cv | baseline.
Every command exits 0 on success and 1 with a single ``error: ...`` line on
stderr otherwise. All randomness flows from the ``--seed`` flag through
purpose-tagged derived streams, so runs are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import baselines, cnn, corpus, embedding
from .metrics import (
    confusion,
    confusion_to_tsv,
    format_report,
    macro_f1,
    report,
    report_to_json,
)
from .preprocess import load_suffix_table


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _require_seed(args, config) -> int:
    seed = args.seed if args.seed is not None else config.get("seed")
    if seed is None:
        raise ValueError("a seed is required (--seed or config key 'seed')")
    return int(seed)


def _pick(args_value, config: dict, key: str, default):
    """Flag value wins over config file value wins over default."""
    if args_value is not None:
        return args_value
    return config.get(key, default)


def _suffix_table(args, config):
    path = _pick(getattr(args, "suffixes", None), config, "suffixes", None)
    return load_suffix_table(path) if path else None


def cmd_preprocess(args) -> int:
    config = _load_config(args.config)
    ds = corpus.load_tsv(args.input, _suffix_table(args, config))
    with open(args.output, "w", encoding="utf-8") as fh:
        for ex in ds:
            fh.write(" ".join(ex.tokens) + "\n")
    print(f"wrote {len(ds)} token streams to {args.output}")
    return 0


def cmd_embed_train(args) -> int:
    config = _load_config(args.config)
    seed = _require_seed(args, config)
    overlay = config.get("embedding", {})
    cfg = embedding.EmbeddingConfig(
        dim=int(_pick(args.dim, overlay, "dim", 200)),
        window=int(_pick(args.window, overlay, "window", 5)),
        min_count=int(_pick(args.min_count, overlay, "min_count", 2)),
        epochs=int(_pick(args.epochs, overlay, "epochs", 10)),
        negatives=int(_pick(args.negatives, overlay, "negatives", 5)),
        initial_lr=float(_pick(args.lr, overlay, "initial_lr", 0.025)),
        objective=str(_pick(args.objective, overlay, "objective", "cbow")),
    )
    streams = corpus.load_token_lines(args.corpus)
    vocab = corpus.build_vocab(streams, cfg.min_count)
    encoded = [corpus.encode(s, vocab) for s in streams]
    matrix = embedding.train(encoded, len(vocab), cfg, seed)
    embedding.save_text(matrix, vocab, args.out)
    if args.vocab_out:
        vocab.save(args.vocab_out)
    print(f"trained {len(vocab)}x{cfg.dim} vectors over {len(streams)} streams")
    return 0


def _model_config_from(config: dict, embed_dim: int) -> cnn.CnnConfig:
    model_cfg = config.get("model", {})
    if "embed_dim" in model_cfg and int(model_cfg["embed_dim"]) != embed_dim:
        raise ValueError(
            f"config embed_dim {model_cfg['embed_dim']} does not match the "
            f"embeddings file dim {embed_dim}"
        )
    dropout_cfg = config.get("dropout", {})
    dropout = cnn.DropoutSpec(
        input=float(dropout_cfg.get("input", 0.5)),
        bank3=float(dropout_cfg.get("bank3", 0.5)),
        bank4=float(dropout_cfg.get("bank4", 0.2)),
        bank5=float(dropout_cfg.get("bank5", 0.2)),
        dense=float(dropout_cfg.get("dense", 0.5)),
    )
    return cnn.CnnConfig(
        embed_dim=embed_dim,
        filter_counts=tuple(model_cfg.get("filter_counts", (256, 256, 512))),
        dense_units=int(model_cfg.get("dense_units", 256)),
        m_max=int(model_cfg.get("m_max", 64)),
        dropout=dropout,
    )


def _train_config_from(args, config: dict, seed: int) -> cnn.TrainConfig:
    overlay = config.get("train", {})
    return cnn.TrainConfig(
        epochs=int(_pick(args.epochs, overlay, "epochs", 20)),
        batch_size=int(_pick(args.batch_size, overlay, "batch_size", 32)),
        lr=float(_pick(args.lr, overlay, "lr", 1e-3)),
        beta1=float(overlay.get("beta1", 0.9)),
        beta2=float(overlay.get("beta2", 0.999)),
        eps=float(overlay.get("eps", 1e-8)),
        patience=int(_pick(args.patience, overlay, "patience", 5)),
        seed=seed,
    )


def _write_history(path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\ttrain_loss\tval_macro_f1\n")
        for epoch, loss, f1 in history:
            fh.write(f"{epoch}\t{loss:.6f}\t{f1:.6f}\n")


def cmd_train(args) -> int:
    config = _load_config(args.config)
    seed = _require_seed(args, config)
    data_path = _pick(args.data, config, "data", None)
    emb_path = _pick(args.embeddings, config, "embeddings", None)
    out_path = _pick(args.out, config, "checkpoint", None)
    if not data_path or not emb_path or not out_path:
        raise ValueError("train needs --data, --embeddings, and --out")
    history_path = _pick(args.history, config, "history", out_path + ".history.tsv")

    ds = corpus.load_tsv(data_path, _suffix_table(args, config))
    if any(ex.label is None for ex in ds):
        raise ValueError("training data must be fully labelled")
    matrix, vocab = embedding.load_text(emb_path)
    model_cfg = _model_config_from(config, matrix.dim)
    train_cfg = _train_config_from(args, config, seed)

    val_fraction = float(config.get("val_fraction", 0.2))
    stratify = bool(config.get("stratify", False))
    train_ds, val_ds = corpus.split_train_val(ds, val_fraction, seed, stratify)
    train_ex = corpus.encode_dataset(train_ds, vocab)
    val_ex = corpus.encode_dataset(val_ds, vocab)

    model = cnn.CnnModel.init(matrix.w_in, model_cfg, seed)
    history = cnn.train_model(model, train_ex, val_ex, train_cfg)
    _write_history(history_path, history)
    cnn.save_checkpoint(model, out_path, cnn.vocab_hash(vocab))
    best = max(h[2] for h in history)
    print(
        f"trained {len(history)} epochs on {len(train_ex)} examples; "
        f"best val macro-F1 {best:.4f}; checkpoint {out_path}"
    )
    return 0


def _load_model_and_vocab(args):
    matrix, vocab = embedding.load_text(args.embeddings)
    model = cnn.load_checkpoint(args.checkpoint, vocab)
    if model.params["emb"].shape[0] != len(vocab):
        raise ValueError(
            f"checkpoint vocabulary size {model.params['emb'].shape[0]} does not "
            f"match embeddings file ({len(vocab)} words)"
        )
    return model, vocab


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    model, vocab = _load_model_and_vocab(args)
    ds = corpus.load_tsv(args.data, _suffix_table(args, config))
    if any(ex.label is None for ex in ds):
        raise ValueError("test set is unlabelled; use the predict command")
    encoded = corpus.encode_dataset(ds, vocab)
    preds = model.predict_batch(encoded)
    labels = [ex.label for ex in encoded]
    cm = confusion(preds, labels)
    rep = report(cm)
    print(confusion_to_tsv(cm))
    print(format_report(rep))
    print(report_to_json(rep))
    return 0


def cmd_predict(args) -> int:
    config = _load_config(args.config)
    model, vocab = _load_model_and_vocab(args)
    ds = corpus.load_tsv(args.data, _suffix_table(args, config))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("id\tlabel\tprobability\n")
        for ex in ds:
            p = model.forward(corpus.encode(ex.tokens, vocab).ids)
            label = corpus.ID_TO_LABEL[1 if p >= 0.5 else 0]
            fh.write(f"{ex.tweet_id}\t{label}\t{p:.6f}\n")
    print(f"wrote {len(ds)} predictions to {args.out}")
    return 0


def cmd_cv(args) -> int:
    config = _load_config(args.config)
    seed = _require_seed(args, config)
    data_path = _pick(args.data, config, "data", None)
    emb_path = _pick(args.embeddings, config, "embeddings", None)
    if not data_path or not emb_path:
        raise ValueError("cv needs --data and --embeddings")
    k = int(_pick(args.folds, config, "folds", 10))

    ds = corpus.load_tsv(data_path, _suffix_table(args, config))
    if any(ex.label is None for ex in ds):
        raise ValueError("cross-validation data must be fully labelled")
    matrix, vocab = embedding.load_text(emb_path)
    model_cfg = _model_config_from(config, matrix.dim)
    train_cfg = _train_config_from(args, config, seed)
    encoded = corpus.encode_dataset(ds, vocab)

    val_fraction = float(config.get("val_fraction", 0.2))
    scores = []
    lines = ["fold\tmacro_f1"]
    for fold_i, (train_idx, test_idx) in enumerate(corpus.kfold(len(ds), k, seed)):
        fold_seed = seed + fold_i
        inner = corpus.split_train_val(ds.subset(train_idx), val_fraction, fold_seed)
        train_ex = corpus.encode_dataset(inner[0], vocab)
        val_ex = corpus.encode_dataset(inner[1], vocab)
        model = cnn.CnnModel.init(matrix.w_in, model_cfg, fold_seed)
        cnn.train_model(model, train_ex, val_ex, train_cfg)
        test_ex = [encoded[i] for i in test_idx]
        preds = model.predict_batch(test_ex)
        score = macro_f1(preds, [ex.label for ex in test_ex])
        scores.append(score)
        lines.append(f"{fold_i}\t{score:.6f}")
    lines.append(f"mean\t{sum(scores) / len(scores):.6f}")
    table = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    print(table)
    return 0


def cmd_baseline(args) -> int:
    config = _load_config(args.config)
    seed = _require_seed(args, config)
    data_path = _pick(args.data, config, "data", None)
    if not data_path:
        raise ValueError("baseline needs --data")
    ds = corpus.load_tsv(data_path, _suffix_table(args, config))
    if any(ex.label is None for ex in ds):
        raise ValueError("baseline data must be fully labelled")
    vocab = corpus.build_vocab(ds.token_streams(), int(args.min_count))
    encoded = corpus.encode_dataset(ds, vocab)

    grid = baselines.DEFAULT_GRIDS[args.model]
    if args.grid:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    result = baselines.grid_search(
        args.model, grid, encoded, len(vocab), folds=int(args.folds), seed=seed
    )

    k = len(result.rows[0][1])
    header = ["params"] + [f"fold_{i}" for i in range(k)] + ["mean", "best"]
    lines = ["\t".join(header)]
    for i, (params, scores, mean) in enumerate(result.rows):
        pstr = ",".join(f"{key}={params[key]}" for key in params)
        cells = [pstr] + [f"{s:.6f}" for s in scores] + [
            f"{mean:.6f}",
            "*" if i == result.best_index else "",
        ]
        lines.append("\t".join(cells))
    table = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hofkit",
        description="Hate/offensive tweet classification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="normalize a tweet TSV into token lines")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config")
    p.add_argument("--suffixes", help="custom stemmer suffix table")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("embed-train", help="train word vectors on token lines")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--min-count", type=int, dest="min_count")
    p.add_argument("--epochs", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--objective", choices=["cbow", "skipgram"])
    p.add_argument("--seed", type=int)
    p.add_argument("--vocab-out", dest="vocab_out")
    p.set_defaults(func=cmd_embed_train)

    p = sub.add_parser("train", help="train the convolutional classifier")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--embeddings")
    p.add_argument("--out")
    p.add_argument("--history")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--suffixes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="report metrics on a labelled TSV")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--config")
    p.add_argument("--suffixes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write id/label/probability TSV")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--suffixes")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validation of the classifier")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--embeddings")
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--suffixes")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("baseline", help="grid-search a baseline family")
    p.add_argument("--model", required=True, choices=list(baselines.BASELINE_FAMILIES))
    p.add_argument("--data")
    p.add_argument("--grid", help="JSON file: parameter name -> list of values")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--min-count", dest="min_count", default=2)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--suffixes")
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError, json.JSONDecodeError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
