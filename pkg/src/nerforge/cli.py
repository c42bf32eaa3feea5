"""Single entry point: every experiment is runnable from here.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
Set NERFORGE_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ablation import ablation_run, render_table
from .audit.loop import AuditLoop
from .audit.service import serve_audit_api
from .audit.store import AuditError, AuditStore
from .bootstrap import (
    RuleConflictError,
    Vocabulary,
    apply_rules,
    build_vocab,
    filter_by_vocab,
    load_rules_config,
)
from .config import ConfigError, RunConfig, load_config, make_run_dir, run_record
from .corpus import (
    CorpusError,
    dataset_stats,
    extract_entities,
    load_bio2,
    save_bio2,
    spans_from_tags,
    split_dataset,
)
from .encoder import ReferenceEncoder
from .metrics import bre_ratio, entity_prf, token_accuracy
from .model import BoundaryRevisedTagger, load_model, save_model
from .nn.checkpoint import CheckpointError
from .training import AlternateTrainer, predict_dataset
from . import synth as synth_mod

log = logging.getLogger("nerforge")

DATA_ERRORS = (CorpusError, ConfigError, CheckpointError, RuleConflictError, AuditError, FileNotFoundError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _setup_logging() -> None:
    level = os.environ.get("NERFORGE_LOG", "info").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _config_from(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    hp = cfg.hyperparams
    for flag, field_name in (
        ("seed", "seed"),
        ("epochs", "epochs"),
        ("lr", "learning_rate"),
        ("batch_size", "batch_size"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            hp = replace(hp, **{field_name: value})
    cfg = replace(cfg, hyperparams=hp)
    if getattr(args, "seeds", None):
        cfg = replace(cfg, seeds=[int(s) for s in args.seeds.split(",")])
    opt = cfg.optimizer
    if getattr(args, "lr", None) is not None:
        opt = replace(opt, learning_rate=args.lr)
    return replace(cfg, optimizer=opt)


def _path_from(args, cfg: RunConfig, flag: str, required: bool = True) -> Path | None:
    value = getattr(args, flag, None) or cfg.paths.get(flag)
    if value is None:
        if required:
            raise ConfigError(f"no {flag!r} path given (flag or config)")
        return None
    path = Path(value)
    if flag != "out_dir" and not path.exists():
        raise FileNotFoundError(f"{flag} path does not exist: {path}")
    return path


def _write_json(path: Path, record: dict) -> None:
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- subcommand bodies ------------------------------------------------------

def cmd_vocab_build(args) -> int:
    documents = [Path(p).read_text(encoding="utf-8") for p in args.corpus]
    vocab = build_vocab(documents, case_fold=not args.no_case_fold)
    vocab.save(args.out)
    print(f"vocabulary: {len(vocab)} tokens -> {args.out}")
    return 0


def cmd_bootstrap_filter(args) -> int:
    vocab = Vocabulary.load(args.vocab, case_fold=not args.no_case_fold)
    source = load_bio2(args.input)
    kept = filter_by_vocab(source, vocab)
    save_bio2(args.out, kept)
    print(f"retained {len(kept)}/{len(source)} sentences -> {args.out}")
    return 0


def cmd_bootstrap_rules(args) -> int:
    rules, gazetteer, case_fold = load_rules_config(args.rules)
    tagged = []
    skipped = 0
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    for idx, line in enumerate(s for s in lines if s.strip()):
        tokens = line.split()
        try:
            sentence = apply_rules(
                tokens, rules, gazetteer, sent_id=f"{Path(args.input).name}:{idx}",
                case_fold=case_fold,
            )
        except RuleConflictError as exc:
            log.warning("skipping sentence %d: %s", idx, exc)
            skipped += 1
            continue
        if sentence is not None:
            tagged.append(sentence)
    save_bio2(args.out, tagged)
    print(f"tagged {len(tagged)} sentences ({skipped} conflicts skipped) -> {args.out}")
    return 0


def cmd_dataset_split(args) -> int:
    sentences = load_bio2(args.input)
    train, dev, test = split_dataset(sentences, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        save_bio2(out / f"{name}.bio2", part)
    print(f"split {len(sentences)} -> {len(train)}/{len(dev)}/{len(test)} in {out}")
    return 0


def cmd_dataset_stats(args) -> int:
    stats = dataset_stats(load_bio2(args.input))
    sys.stdout.write(stats.to_text_report())
    if args.json:
        _write_json(Path(args.json), stats.to_record())
    return 0


def cmd_dataset_validate(args) -> int:
    sentences = load_bio2(args.input)  # raises CorpusError subtypes on bad input
    print(f"OK: {len(sentences)} valid sentences")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args)
    train_path = _path_from(args, cfg, "train")
    dev_path = _path_from(args, cfg, "dev", required=False)
    out_dir = make_run_dir(getattr(args, "out_dir", None) or cfg.paths.get("out_dir", "runs"), cfg)
    _write_json(out_dir / "run.json", run_record(cfg, cfg.hyperparams.seed))
    log.info("run directory: %s", out_dir)

    train = load_bio2(train_path)
    hp = cfg.hyperparams
    vocab = sorted({t for s in train for t in s.tokens})
    tagger = BoundaryRevisedTagger(
        ReferenceEncoder(vocab, d_emb=hp.d_emb, d_hidden=hp.d_hidden), hp, cfg.variants
    )
    trainer = AlternateTrainer(tagger, cfg.optimizer)
    trainer.fit(train)

    checkpoint = Path(args.out) if args.out else out_dir / "model.ckpt"
    save_model(checkpoint, tagger)
    print(f"checkpoint: {checkpoint}")

    if dev_path is not None:
        dev = load_bio2(dev_path)
        gold = [extract_entities(s) for s in dev]
        pred_tags = predict_dataset(tagger, dev)
        pred = [spans_from_tags(t) for t in pred_tags]
        prf = entity_prf(gold, pred)
        _write_json(out_dir / "dev_metrics.json", prf.to_record())
        print(f"dev: P={prf.precision:.4f} R={prf.recall:.4f} F1={prf.f1:.4f}")
    return 0


def cmd_eval(args) -> int:
    tagger = load_model(args.checkpoint)
    test = load_bio2(args.test)
    gold = [extract_entities(s) for s in test]
    pred_tags = predict_dataset(tagger, test)
    pred = [spans_from_tags(t) for t in pred_tags]
    prf = entity_prf(gold, pred)
    bre = bre_ratio(gold, pred)
    acc = token_accuracy([list(s.ner_tags) for s in test], pred_tags)
    print(f"entities: P={prf.precision:.4f} R={prf.recall:.4f} F1={prf.f1:.4f}")
    for etype, sub in sorted((prf.per_type or {}).items()):
        print(f"  {etype}: P={sub.precision:.4f} R={sub.recall:.4f} F1={sub.f1:.4f}")
    print(f"boundary errors: {bre.boundary_error_count}/{bre.predicted_count} ({bre.bre_ratio:.4f})")
    print(f"token accuracy: {acc:.4f}")
    if args.json:
        _write_json(
            Path(args.json),
            {"prf": prf.to_record(), "bre": bre.to_record(), "token_accuracy": acc},
        )
    return 0


def cmd_ablate(args) -> int:
    cfg = _config_from(args)
    train = load_bio2(_path_from(args, cfg, "train"))
    test = load_bio2(_path_from(args, cfg, "test"))
    out_dir = make_run_dir(getattr(args, "out_dir", None) or cfg.paths.get("out_dir", "runs"), cfg)
    _write_json(out_dir / "run.json", run_record(cfg, cfg.hyperparams.seed))
    results = ablation_run(
        train, test, cfg.hyperparams, cfg.optimizer, cfg.seeds, epochs=args.epochs
    )
    table = render_table(results)
    sys.stdout.write(table)
    (out_dir / "ablation.txt").write_text(table, encoding="utf-8")
    record = run_record(cfg, cfg.hyperparams.seed)
    _write_json(
        out_dir / "ablation.json",
        {
            "results": [r.to_record() for r in results],
            "config_hash": record["config_hash"],
            "provenance": record["provenance"],
            "seeds": cfg.seeds,
        },
    )
    print(f"results: {out_dir}")
    return 0


def cmd_iterate(args) -> int:
    cfg = _config_from(args)
    dataset = load_bio2(_path_from(args, cfg, "dataset"))
    dev_path = _path_from(args, cfg, "dev", required=False)
    store_path = getattr(args, "store", None) or cfg.paths.get("audit_store")
    if store_path is None:
        raise ConfigError("no 'audit_store' path given (flag or config)")
    out_dir = make_run_dir(cfg.paths.get("out_dir", "runs"), cfg)
    _write_json(out_dir / "run.json", run_record(cfg, cfg.hyperparams.seed))
    store = AuditStore(store_path)
    loop = AuditLoop(
        dataset,
        store,
        cfg.hyperparams,
        cfg.optimizer,
        cfg.variants,
        dev=load_bio2(dev_path) if dev_path else None,
        epsilon=cfg.epsilon,
        max_iters=cfg.max_iters,
    )
    iterations = args.iterations or cfg.max_iters
    for _ in range(iterations):
        report = loop.iterate()
        print(
            f"iteration {report.iteration}: disagreements={report.disagreement_count} "
            f"rate={report.disagreement_rate:.4f} converged={report.converged}"
        )
        if report.converged:
            break
    save_bio2(out_dir / "dataset.bio2", loop.dataset)
    _write_json(out_dir / "progress.json", {"reports": loop.history})
    print(f"updated dataset: {out_dir / 'dataset.bio2'}")
    return 0


def cmd_serve(args) -> int:
    cfg = _config_from(args) if args.config else None
    store = AuditStore(args.store)
    loop = None
    if cfg is not None and "dataset" in cfg.paths:
        dataset = load_bio2(cfg.paths["dataset"])
        loop = AuditLoop(
            dataset, store, cfg.hyperparams, cfg.optimizer, cfg.variants,
            epsilon=cfg.epsilon, max_iters=cfg.max_iters,
        )
    host, _, port = args.bind.partition(":")
    server = serve_audit_api(
        store, host=host or "127.0.0.1", port=int(port or 8321),
        loop=loop, ui_dir=args.ui,
    )
    bound_host, bound_port = server.server_address[:2]
    print(f"audit service on http://{bound_host}:{bound_port}/ (Ctrl-C stops)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        store.close()
    return 0


def cmd_synth(args) -> int:
    manifest = synth_mod.write_corpus(args.out_dir, size=args.size, seed=args.seed, noise=args.noise)
    print(f"synthetic corpus: {manifest.size} sentences in {args.out_dir}")
    for name, path in sorted(manifest.files.items()):
        print(f"  {name}: {path}")
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="nerforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nerforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    vocab = sub.add_parser("vocab", help="vocabulary commands").add_subparsers(
        dest="subcommand", required=True
    )
    p = vocab.add_parser("build", help="build a vocabulary from plain-text files")
    p.add_argument("--corpus", nargs="+", required=True, help="plain-text input files")
    p.add_argument("--out", required=True, help="output vocabulary file (one token per line)")
    p.add_argument("--no-case-fold", action="store_true")
    p.set_defaults(func=cmd_vocab_build)

    boot = sub.add_parser("bootstrap", help="seed-dataset construction").add_subparsers(
        dest="subcommand", required=True
    )
    p = boot.add_parser("filter", help="keep labeled sentences covered by the vocabulary")
    p.add_argument("--input", required=True, help="labeled BIO2 file")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-case-fold", action="store_true")
    p.set_defaults(func=cmd_bootstrap_filter)
    p = boot.add_parser("rules", help="tag unlabeled sentences with rules + gazetteer")
    p.add_argument("--input", required=True, help="one whitespace-tokenized sentence per line")
    p.add_argument("--rules", required=True, help="rules/gazetteer JSON config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bootstrap_rules)

    dataset = sub.add_parser("dataset", help="dataset utilities").add_subparsers(
        dest="subcommand", required=True
    )
    p = dataset.add_parser("split", help="seeded 80/10/10 split")
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_dataset_split)
    p = dataset.add_parser("stats", help="sentence/token/entity counts")
    p.add_argument("--input", required=True)
    p.add_argument("--json", help="also write a machine-readable record")
    p.set_defaults(func=cmd_dataset_stats)
    p = dataset.add_parser("validate", help="validate BIO2 well-formedness")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_dataset_validate)

    p = sub.add_parser("train", help="train the tagger")
    p.add_argument("--config", help="run-config JSON")
    p.add_argument("--train", help="training BIO2 file (overrides config)")
    p.add_argument("--dev", help="dev BIO2 file for metrics")
    p.add_argument("--out", help="checkpoint path (default: <run dir>/model.ckpt)")
    p.add_argument("--out-dir", help="base directory for run outputs")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--json", help="also write a machine-readable record")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the variant matrix")
    p.add_argument("--config", help="run-config JSON")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--seeds", help="comma-separated seed list (overrides config)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("iterate", help="run audit-loop iterations")
    p.add_argument("--config", required=True)
    p.add_argument("--store", help="audit store path (overrides config)")
    p.add_argument("--iterations", type=int, help="max iterations this invocation")
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("serve", help="serve the audit API (and UI bundle, if given)")
    p.add_argument("--store", required=True, help="audit store path")
    p.add_argument("--bind", default="127.0.0.1:8321")
    p.add_argument("--config", help="run-config JSON enabling POST /api/iterate")
    p.add_argument("--ui", help="directory with the built UI bundle")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate the synthetic experiment corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=2400)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--noise", type=float, default=0.15,
                   help="boundary-noise fraction for the train_noisy split")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 3
    except Exception as exc:  # anything else is a runtime failure
        log.exception("command failed")
        print(f"runtime failure: {exc} (see log output above)", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
