"""Command-line entry point: ``taxoextract <command> [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .corpus import ProductRecord, dump_jsonl, load_products, read_jsonl
from .evaluation import ProductEvalOutcome, extraction_metrics, write_report
from .model import MissingCategoryEmbedding, load_config
from .taxonomy import (CategoryEmbeddingTable, EmbeddingTrainingError, TaxonomyError, load_taxonomy,
                       mean_edge_distance, train_embeddings)
from .training import TrainingAborted, extract_values, load_trained, train

logger = logging.getLogger("taxoextract")


class CliError(Exception):
    pass


def cmd_taxonomy_embed(args) -> int:
    tree = load_taxonomy(args.taxonomy)
    table = train_embeddings(tree, dim=args.dim, epochs=args.epochs, lr=args.lr, negatives=args.negatives,
                             seed=args.seed, geometry=args.geometry, burn_in=args.burn_in)
    table.save(args.out)
    print(f"nodes {len(tree)}  dim {args.dim}  mean edge distance {mean_edge_distance(tree, table):.6f}")
    return 0


def _split_for_validation(records: list[ProductRecord], val_products, taxonomy, seed: int):
    if val_products:
        val, skipped = load_products(val_products, taxonomy)
        if skipped:
            logger.warning("skipped %d validation lines", skipped)
        return records, val
    from .corpus import split_dataset

    train_part, val_part, _ = split_dataset(records, (0.8, 0.2, 0.0), seed)
    return train_part, val_part


def cmd_train(args) -> int:
    config = load_config(args.config) if args.config else None
    if config is None:
        from .model import ModelConfig

        config = ModelConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    tree = load_taxonomy(args.taxonomy)
    records, skipped = load_products(args.products, tree)
    if skipped:
        logger.warning("skipped %d product lines", skipped)
    if not records:
        raise CliError(f"{args.products}: no usable products")
    embeddings = None
    if config.uses_category_embedding:
        if not args.embeddings:
            raise CliError(f"mode {config.mode!r} needs --embeddings")
        embeddings = CategoryEmbeddingTable.load(args.embeddings, config.geometry)
    train_recs, val_recs = _split_for_validation(records, args.val_products, tree, config.seed)
    log_path = args.log or str(args.out) + ".log.jsonl"
    trained = train(config, train_recs, val_recs, tree, embeddings, args.attribute, log_path=log_path)
    trained.save(args.out)
    st = trained.state
    print(f"epochs {len(st.history)}  best epoch {st.best_epoch}  best val loss {st.best_val:.6f}")
    index = trained.category_index
    fallback = 0 if index is None else sum(1 for r in records if r.category_id not in index)
    if fallback:
        print(f"products without a category embedding (unconditioned fallback): {fallback}")
    return 0


def cmd_extract(args) -> int:
    trained = load_trained(args.ckpt)
    records, skipped = load_products(args.products)
    if skipped:
        logger.warning("skipped %d product lines", skipped)
    values = extract_values(trained, records) if records else []
    dump_jsonl(({"id": r.id, "values": v} for r, v in zip(records, values)), args.out)
    print(f"products {len(records)}  with values {sum(1 for v in values if v)}")
    return 0


def _infer_attribute(records: list[ProductRecord]) -> str:
    names = sorted({a for r in records for a in r.gold_values})
    if len(names) != 1:
        raise CliError(f"gold file has attributes {names}; pass --attribute")
    return names[0]


def cmd_evaluate(args) -> int:
    gold, skipped = load_products(args.gold)
    if skipped:
        logger.warning("skipped %d gold lines", skipped)
    if not gold:
        raise CliError(f"{args.gold}: no gold products")
    attribute = args.attribute or _infer_attribute(gold)
    predicted = {}
    for row in read_jsonl(args.predictions):
        if "id" not in row or not isinstance(row.get("values", []), list):
            raise CliError(f"{args.predictions}: every line needs an id and a values list")
        predicted[str(row["id"])] = [str(v) for v in row.get("values", [])]
    unknown = set(predicted) - {r.id for r in gold}
    if unknown:
        logger.warning("%d predictions have no gold product and are ignored", len(unknown))
    missing = sum(1 for r in gold if r.id not in predicted)
    if missing:
        logger.warning("%d gold products have no prediction; counted as empty", missing)
    outcomes = [ProductEvalOutcome(predicted.get(r.id, []), r.values(attribute), r.category_id) for r in gold]
    report = extraction_metrics(outcomes)
    write_report(report, args.out)
    print(f"attribute {attribute}")
    print(report.table())
    return 0


def cmd_synth(args) -> int:
    from .synth import write_corpus

    paths = write_corpus(args.out, seed=args.seed, n_products=args.products)
    for key, path in paths.items():
        print(f"{key:10}{path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taxoextract",
                                     description="Taxonomy-aware attribute value extraction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("taxonomy-embed", help="fit hyperbolic embeddings for every taxonomy node")
    p.add_argument("--taxonomy", required=True, help="taxonomy JSON lines with id and parent keys")
    p.add_argument("--out", required=True, help="output text file, one 'node v1 ... vm' line per node")
    p.add_argument("--dim", type=int, default=50, help="embedding dimension (default 50)")
    p.add_argument("--epochs", type=int, default=200, help="training epochs over all edges (default 200)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--lr", type=float, default=0.3, help="learning rate after burn-in (default 0.3)")
    p.add_argument("--negatives", type=int, default=10, help="negatives per edge (default 10)")
    p.add_argument("--burn-in", type=int, default=10, help="epochs run at lr/10 first (default 10)")
    p.add_argument("--geometry", choices=("poincare", "euclidean"), default="poincare",
                   help="embedding space (default poincare)")
    p.set_defaults(func=cmd_taxonomy_embed)

    p = sub.add_parser("train", help="train a tagger and write a checkpoint")
    p.add_argument("--config", help="key = value model config file; omitted keys use defaults")
    p.add_argument("--products", required=True, help="training products (JSON lines)")
    p.add_argument("--taxonomy", required=True, help="taxonomy JSON lines")
    p.add_argument("--embeddings", help="category embedding file; required by embedding-based modes")
    p.add_argument("--attribute", required=True, help="attribute to tag, e.g. flavor")
    p.add_argument("--out", required=True, help="checkpoint path; metadata goes to OUT.meta.json")
    p.add_argument("--val-products", help="validation products; default holds out 20%% of --products")
    p.add_argument("--log", help="per-epoch JSON-lines log (default OUT.log.jsonl)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="tag products with a trained checkpoint")
    p.add_argument("--ckpt", required=True, help="checkpoint written by 'train'")
    p.add_argument("--products", required=True, help="products to tag (JSON lines)")
    p.add_argument("--out", required=True, help='output JSON lines: {"id": ..., "values": [...]}')
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="score predictions against gold products")
    p.add_argument("--predictions", required=True, help="JSON lines written by 'extract'")
    p.add_argument("--gold", required=True, help="products with gold attribute values (JSON lines)")
    p.add_argument("--out", required=True, help="metrics report (JSON)")
    p.add_argument("--attribute", help="gold attribute to score; inferred when the file has only one")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="write the seeded synthetic corpus")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--products", type=int, default=2000, help="number of products (default 2000)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, TaxonomyError, EmbeddingTrainingError, TrainingAborted, MissingCategoryEmbedding,
            ValueError, KeyError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
