"""Command-line entry point for batch attack, evaluation, fine-tuning,
shielding, and diagnostics runs."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import attack as attack_mod
from . import attention as attention_mod
from . import baselines, classify, defense, evaluation, glove
from .embedding import CandidateFilter, count_authors, load_vectors, save_vectors
from .text_core import Label, load_dataset, load_lexicon

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


class CliError(Exception):
    pass


def _load_embedding(path: str, tag: str = "other"):
    try:
        with open(path, encoding="utf-8") as f:
            return load_vectors(f, tag=tag)
    except OSError as e:
        raise CliError(f"cannot read embedding {path}: {e}")


def _classifier(spec: str, embedding=None) -> classify.ClassifierHandle:
    """Parse a classifier spec: builtin:lexicon:<path>,
    builtin:linear:<model.json>, or remote:<url>."""
    parts = spec.split(":", 2)
    if parts[0] == "remote":
        url = spec[len("remote:"):]
        return classify.remote_classifier(url or None, name=spec)
    if parts[0] == "builtin" and len(parts) == 3:
        kind, path = parts[1], parts[2]
        if kind == "lexicon":
            try:
                with open(path, encoding="utf-8") as f:
                    return classify.lexicon_classifier(load_lexicon(f), name=spec)
            except OSError as e:
                raise CliError(f"cannot read lexicon {path}: {e}")
        if kind == "linear":
            try:
                return classify.load_linear(path, embedding).handle(name=spec)
            except OSError as e:
                raise CliError(f"cannot read linear model {path}: {e}")
    raise CliError(f"bad classifier spec: {spec!r}")


def _read_docs(args):
    try:
        with open(args.dataset, encoding="utf-8") as f:
            return load_dataset(f, args.format)
    except OSError as e:
        raise CliError(f"cannot read dataset {args.dataset}: {e}")


def _attack_config(args, surrogate) -> attack_mod.AttackConfig:
    embedding = _load_embedding(args.embedding)
    filt: Optional[CandidateFilter] = None
    if args.pre_embedding:
        pre = _load_embedding(args.pre_embedding, tag="pre")
        counts = count_authors([])
        if args.author_corpus:
            with open(args.author_corpus, encoding="utf-8") as f:
                pairs = [(d.author or "", d.raw)
                         for d in load_dataset(f, "plain")]
            counts = count_authors(pairs)
        filt = CandidateFilter(pre_vocab=frozenset(t.lower() for t in pre.vocab),
                               author_counts=counts, min_authors=args.min_authors)
    model = None
    strategy = attack_mod.Strategy(args.strategy)
    if strategy is attack_mod.Strategy.ATTENTION:
        if not args.attention_model:
            raise CliError("--attention-model required with --strategy attention")
        with open(args.attention_model, encoding="utf-8") as f:
            model = attention_mod.load_model(f, embedding)
    return attack_mod.AttackConfig(
        surrogate=surrogate, embedding=embedding, strategy=strategy,
        k=args.k, filter=filt, attention_model=model,
        max_replacements=args.max_replacements, seed=args.seed)


def _apply_baseline(args, text: str) -> str:
    if args.attack == "viper":
        with open(args.nameslist, encoding="utf-8") as f:
            names = defense.load_nameslist(f)
        table = (baselines.build_dces(names) if args.viper_space == "dces"
                 else baselines.build_eces(names))
        return baselines.viper(text, args.viper_p, table, args.seed)
    return baselines.grondahl(text,
                              baselines.GrondahlVariant(args.grondahl_variant))


def cmd_attack(args) -> int:
    docs = _read_docs(args)
    failures = 0
    with open(args.out, "w", encoding="utf-8") as out:
        if args.attack in ("viper", "grondahl"):
            for doc in docs:
                out.write(json.dumps(
                    {"id": doc.id, "original_text": doc.raw,
                     "modified_text": _apply_baseline(args, doc.raw),
                     "seed": args.seed}, sort_keys=True) + "\n")
            return EXIT_OK
        surrogate = _classifier(args.surrogate)
        cfg = _attack_config(args, surrogate)
        for doc in docs:
            if doc.label is not Label.OFFENSIVE:
                continue
            try:
                outcome = attack_mod.run_attack(doc, cfg)
            except Exception as e:
                print(f"attack failed on doc {doc.id}: {e}", file=sys.stderr)
                failures += 1
                continue
            out.write(outcome.to_json() + "\n")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_eval(args) -> int:
    docs = _read_docs(args)
    surrogate = _classifier(args.surrogate)
    targets = [_classifier(s) for s in args.targets.split(",")]
    cfg = _attack_config(args, surrogate)

    def factory(handle):
        run_cfg = attack_mod.AttackConfig(
            surrogate=handle, embedding=cfg.embedding, strategy=cfg.strategy,
            k=cfg.k, filter=cfg.filter, attention_model=cfg.attention_model,
            max_replacements=cfg.max_replacements, seed=cfg.seed)
        return lambda doc: attack_mod.run_attack(doc, run_cfg)

    report = evaluation.run_matrix(docs, [surrogate], targets, factory,
                                   parallelism=args.parallelism,
                                   metadata={"seed": args.seed,
                                             "dataset": args.dataset})
    with open(args.out, "w", encoding="utf-8") as f:
        report.to_json(f)
    report.to_tsv(sys.stdout)
    failed = any(c.error for c in report.cells.values())
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_finetune(args) -> int:
    pre = _load_embedding(args.embedding, tag="pre")
    docs = _read_docs(args)
    corpus = [[t.lowered for t in d.tokens] for d in docs]
    table = glove.build_cooccurrence(corpus, window=args.window)
    cfg = glove.TrainConfig(epochs=args.epochs, seed=args.seed)
    ft = glove.fine_tune(pre, table, cfg)
    with open(args.out, "w", encoding="utf-8") as f:
        save_vectors(ft, f)
    return EXIT_OK


def cmd_build_evasion(args) -> int:
    docs = _read_docs(args)
    judges = [_classifier(s) for s in args.judges.split(",")] if args.judges else []
    kept = glove.build_evasion_corpus(
        [(d.author or "", d.raw) for d in docs], judges, threshold=args.threshold)
    with open(args.out, "w", encoding="utf-8") as f:
        for i, (author, text) in enumerate(kept):
            f.write(f"{i}\t-\t{text}\t{author}\n")
    return EXIT_OK


def cmd_shield(args) -> int:
    with open(args.nameslist, encoding="utf-8") as f:
        names = defense.load_nameslist(f)
    with open(args.dict, encoding="utf-8") as f:
        dictionary = defense.UnigramDictionary.load(f)
    with open(args.input, encoding="utf-8") as f, \
            open(args.out, "w", encoding="utf-8") as out:
        for line in f:
            out.write(defense.shield_pipeline(line.rstrip("\n"), names,
                                              dictionary) + "\n")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    store = _load_embedding(args.embedding)
    judge = _classifier(args.judge)
    probes = [p for p in args.probes.split(",") if p]
    mean, missing = evaluation.avg_first_evasive(probes, store, judge, k=args.k)
    json.dump({"avg_first_evasive": mean, "probes_without_evasive": missing,
               "k": args.k, "embedding": args.embedding},
              sys.stdout, sort_keys=True)
    print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evadebench",
        description="Adversarial robustness harness for offensive language "
                    "classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_seed=True):
        p.add_argument("--dataset", required=True, help="input TSV path")
        p.add_argument("--format", choices=["olid", "plain"], default="plain")
        if needs_seed:
            p.add_argument("--seed", type=int, required=True,
                           help="RNG seed (required for reproducibility)")
        p.add_argument("--out", required=True, help="output path")

    def attack_opts(p):
        p.add_argument("--embedding", help="replacement embedding vectors")
        p.add_argument("--pre-embedding", dest="pre_embedding",
                       help="pretrained vocabulary for the candidate filter")
        p.add_argument("--author-corpus", dest="author_corpus",
                       help="evasion corpus (plain TSV with authors) for "
                            "the distinct-author filter")
        p.add_argument("--surrogate", help="classifier spec")
        p.add_argument("--strategy", choices=["greedy", "attention"],
                       default="greedy")
        p.add_argument("--attention-model", dest="attention_model")
        p.add_argument("--k", type=int, default=20)
        p.add_argument("--min-authors", dest="min_authors", type=int, default=3)
        p.add_argument("--max-replacements", dest="max_replacements", type=int)
        p.add_argument("--attack", choices=["proposed", "viper", "grondahl"],
                       default="proposed")
        p.add_argument("--viper-p", dest="viper_p", type=float, default=0.1)
        p.add_argument("--viper-space", dest="viper_space",
                       choices=["dces", "eces"], default="dces")
        p.add_argument("--grondahl-variant", dest="grondahl_variant",
                       choices=[v.value for v in baselines.GrondahlVariant],
                       default="addspace")
        p.add_argument("--nameslist", help="NamesList.txt path (viper/shield)")

    p = sub.add_parser("attack", help="run an attack over a dataset")
    common(p)
    attack_opts(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("eval", help="surrogate x target accuracy-drop matrix")
    common(p)
    attack_opts(p)
    p.add_argument("--targets", required=True, help="comma-separated specs")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("finetune", help="fine-tune embeddings on a corpus")
    common(p)
    p.add_argument("--embedding", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--window", type=int, default=5)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("build-evasion", help="filter a corpus by judges")
    common(p, needs_seed=False)
    p.add_argument("--judges", help="comma-separated classifier specs")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_build_evasion)

    p = sub.add_parser("shield", help="shielding preprocessing")
    p.add_argument("--input", required=True)
    p.add_argument("--nameslist", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_shield)

    p = sub.add_parser("diagnose", help="average first-evasive neighbor rank")
    p.add_argument("--embedding", required=True)
    p.add_argument("--judge", required=True, help="classifier spec")
    p.add_argument("--probes", required=True, help="comma-separated words")
    p.add_argument("--k", type=int, default=20)
    p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FATAL
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
