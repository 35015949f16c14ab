"""Train GBRBMs of several hidden sizes on the synthetic corpus and tabulate clustering quality.

    python3 scripts/hidden_size_sweep.py --hidden 100 200 500 --seeds 0 1 2
"""

import argparse
import json
import time

from crimeseries import gbrbm
from crimeseries.config import PipelineConfig
from crimeseries.corpus import load_stopwords, tokenize_corpus
from crimeseries.evalbench.metrics import evaluate_embedding
from crimeseries.evalbench.synth import generate_synthetic_corpus
from crimeseries.features import build_vocabulary, term_document_counts, tfidf


def features(cfg: PipelineConfig):
    records = generate_synthetic_corpus(cfg.synth)
    docs = tokenize_corpus(records, load_stopwords(cfg.stopwords), width=cfg.ngram)
    counts = term_document_counts(docs, build_vocabulary(docs, cfg.min_df, cfg.max_df_fraction))
    labels = [records.by_id(r).series for r in counts.row_ids]
    return tfidf(counts, cfg.normalize), labels


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, nargs="+", default=[100, 200, 500])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--config", help="pipeline YAML; defaults are used otherwise")
    ap.add_argument("--json", help="also write rows to this file")
    args = ap.parse_args()

    base = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    rows = []
    print(f"{'seed':>4} {'hidden':>6} {'purity':>7} {'silh':>7} {'secs':>6}")
    for seed in args.seeds:
        cfg = PipelineConfig.from_dict({**base.to_dict(), "seed": seed}).seeded()
        data, labels = features(cfg)
        for n_hidden in args.hidden:
            start = time.perf_counter()
            model, _ = gbrbm.train(data, n_hidden, cfg.train)
            secs = time.perf_counter() - start
            rep = evaluate_embedding(gbrbm.embed(model, data), labels, k=cfg.metric_k)
            rows.append(dict(seed=seed, hidden=n_hidden, n_terms=data.n_terms, seconds=secs, **rep.to_dict()))
            print(f"{seed:>4} {n_hidden:>6} {rep.knn_purity:>7.3f} {rep.silhouette:>7.3f} {secs:>6.1f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
