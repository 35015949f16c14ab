"""File-handoff pipeline stages, each leaving a manifest next to its outputs.

A manifest records content hashes of the stage's inputs and outputs, the full
configuration, the seed and the wall-clock time spent. Metrics files carry no
timings, so equal seeds give byte-identical metrics.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, gbrbm, tsne
from .config import PipelineConfig
from .corpus import load_records, load_stopwords, save_records, tokenize_corpus
from .errors import MissingArtifactError
from .evalbench.lda import lda_fit
from .evalbench.metrics import MetricReport, evaluate_embedding
from .evalbench.synth import generate_synthetic_corpus
from .features import TermDocMatrix, Vocabulary, build_vocabulary, term_document_counts, tfidf

log = logging.getLogger(__name__)

CORPUS = "corpus.jsonl"
VOCAB = "vocab.tsv"
COUNTS = "counts.txt"
TFIDF = "tfidf.txt"
MODEL = "model.gbrbm"
LOSS = "loss_trace.csv"
METRICS = "metrics.json"
REPORT_JSON = "report.json"
REPORT_MD = "report.md"
METHODS = ("gbrbm", "lda")
STAGES = ("synth", "build-vocab", "featurize", "train", "embed", "project", "evaluate", "report")


def embedding_file(method: str) -> str:
    return f"embedding_{method}.npz"


def projection_file(method: str) -> str:
    return f"projection_{method}.csv"


def kl_file(method: str) -> str:
    return f"kl_trace_{method}.csv"


def metrics_file(method: str) -> str:
    return f"metrics_{method}.json"


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Workspace:
    out_dir: Path
    config: PipelineConfig

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "manifests").mkdir(exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def require(self, *names: str, stage: str) -> list[Path]:
        paths = [self.path(n) for n in names]
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise MissingArtifactError(f"{stage}: missing input artifact(s) {', '.join(missing)}; "
                                       "run the earlier stages first")
        return paths

    def manifest_path(self, stage: str, tag: str = "") -> Path:
        return self.out_dir / "manifests" / f"{stage}{'-' + tag if tag else ''}.json"

    def run(self, stage: str, inputs: list[Path], body: Callable[[], list[Path]],
            tag: str = "", extra: dict | None = None) -> dict:
        in_hashes = {p.name: sha256(p) for p in inputs}
        start = time.perf_counter()
        outputs = body()
        elapsed = time.perf_counter() - start
        manifest = {
            "stage": stage,
            "tag": tag,
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "inputs": in_hashes,
            "outputs": {p.name: sha256(p) for p in outputs},
            "elapsed_seconds": elapsed,
        }
        if extra:
            manifest.update(extra)
        self.manifest_path(stage, tag).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")
        log.info("%s%s finished in %.2fs", stage, f" ({tag})" if tag else "", elapsed)
        return manifest


def stage_synth(ws: Workspace) -> dict:
    def body():
        records = generate_synthetic_corpus(ws.config.synth)
        save_records(records, ws.path(CORPUS))
        return [ws.path(CORPUS)]
    return ws.run("synth", [], body)


def _stopwords(ws: Workspace):
    return load_stopwords(ws.config.stopwords)


def _tokenized(ws: Workspace, records_path: Path):
    records = load_records(records_path)
    return records, tokenize_corpus(records, _stopwords(ws), width=ws.config.ngram)


def stage_build_vocab(ws: Workspace, records: str | Path | None = None) -> dict:
    """Build the vocabulary; ``records`` (JSONL or CSV) is imported as the workspace corpus first."""
    if records is not None:
        src = Path(records)
        if not src.is_file():
            raise MissingArtifactError(f"build-vocab: records file {src} not found")
    else:
        src = ws.require(CORPUS, stage="build-vocab")[0]

    def body():
        recs, docs = _tokenized(ws, src)
        outputs = [ws.path(VOCAB)]
        if src.resolve() != ws.path(CORPUS).resolve():
            save_records(recs, ws.path(CORPUS))
            outputs.append(ws.path(CORPUS))
        vocab = build_vocabulary(docs, ws.config.min_df, ws.config.max_df_fraction)
        vocab.save(ws.path(VOCAB))
        return outputs
    return ws.run("build-vocab", [src], body)


def stage_featurize(ws: Workspace) -> dict:
    vocab_path, src = ws.require(VOCAB, CORPUS, stage="featurize")

    def body():
        _, docs = _tokenized(ws, src)
        counts = term_document_counts(docs, Vocabulary.load(vocab_path))
        counts.save(ws.path(COUNTS))
        tfidf(counts, normalize=ws.config.normalize).save(ws.path(TFIDF))
        return [ws.path(COUNTS), ws.path(TFIDF)]
    return ws.run("featurize", [src, vocab_path], body)


def stage_train(ws: Workspace) -> dict:
    (tfidf_path,) = ws.require(TFIDF, stage="train")
    summary = {}

    def body():
        data = TermDocMatrix.load(tfidf_path)
        model, trace = gbrbm.train(data, ws.config.n_hidden, ws.config.train)
        gbrbm.save_model(model, ws.path(MODEL))
        with ws.path(LOSS).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss"])
            for i, loss in enumerate(trace, start=1):
                w.writerow([i, repr(loss)])
        summary.update(n_visible=model.m, n_hidden=model.n, final_loss=trace[-1])
        return [ws.path(MODEL), ws.path(LOSS)]
    manifest = ws.run("train", [tfidf_path], body)
    manifest.update(summary)
    ws.manifest_path("train").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def stage_embed(ws: Workspace, method: str = "gbrbm") -> dict:
    if method == "gbrbm":
        model_path, tfidf_path = ws.require(MODEL, TFIDF, stage="embed")

        def body():
            data = TermDocMatrix.load(tfidf_path)
            gbrbm.embed(gbrbm.load_model(model_path), data).save(ws.path(embedding_file(method)))
            return [ws.path(embedding_file(method))]
        return ws.run("embed", [model_path, tfidf_path], body, tag=method)
    if method == "lda":
        (counts_path,) = ws.require(COUNTS, stage="embed")

        def body():
            counts = TermDocMatrix.load(counts_path)
            cfg = ws.config
            res = lda_fit(counts, cfg.lda_topics, cfg.lda_iterations, cfg.lda_alpha, cfg.lda_beta, seed=cfg.seed)
            gbrbm.EmbeddingMatrix(res.doc_topic, counts.row_ids).save(ws.path(embedding_file(method)))
            return [ws.path(embedding_file(method))]
        return ws.run("embed", [counts_path], body, tag=method)
    raise ValueError(f"unknown embedding method {method!r}; choose from {METHODS}")


def _labels_for(ws: Workspace, row_ids):
    path = ws.path(CORPUS)
    if not path.is_file():
        return [None] * len(row_ids)
    records = load_records(path)
    return [records.by_id(r).series for r in row_ids]


def stage_project(ws: Workspace, method: str = "gbrbm") -> dict:
    (emb_path,) = ws.require(embedding_file(method), stage="project")
    inputs = [emb_path] + ([ws.path(CORPUS)] if ws.path(CORPUS).is_file() else [])

    def body():
        emb = gbrbm.EmbeddingMatrix.load(emb_path)
        aff = tsne.pairwise_affinities(emb.values, ws.config.perplexity)
        proj = tsne.project(aff, ws.config.tsne_iters, seed=ws.config.seed, row_ids=emb.row_ids)
        proj.save_csv(ws.path(projection_file(method)), _labels_for(ws, emb.row_ids))
        proj.save_kl_csv(ws.path(kl_file(method)))
        return [ws.path(projection_file(method)), ws.path(kl_file(method))]
    return ws.run("project", inputs, body, tag=method)


def stage_evaluate(ws: Workspace) -> dict:
    ws.require(embedding_file("gbrbm"), CORPUS, stage="evaluate")
    methods = [m for m in METHODS if ws.path(embedding_file(m)).is_file()]
    inputs = [ws.path(embedding_file(m)) for m in methods] + [ws.path(CORPUS)]

    def body():
        combined = {}
        outputs = []
        for method in methods:
            emb = gbrbm.EmbeddingMatrix.load(ws.path(embedding_file(method)))
            labels = _labels_for(ws, emb.row_ids)
            report = evaluate_embedding(emb, labels, k=ws.config.metric_k, method=method)
            report.save(ws.path(metrics_file(method)))
            outputs.append(ws.path(metrics_file(method)))
            combined[method] = report.to_dict()
        ws.path(METRICS).write_text(json.dumps(combined, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return outputs + [ws.path(METRICS)]
    return ws.run("evaluate", inputs, body)


def _read_manifests(ws: Workspace) -> dict[str, dict]:
    out = {}
    for p in sorted((ws.out_dir / "manifests").glob("*.json")):
        if p.stem == "report":
            continue
        out[p.stem] = json.loads(p.read_text(encoding="utf-8"))
    return out


def stage_report(ws: Workspace) -> dict:
    (metrics_path,) = ws.require(METRICS, stage="report")

    def body():
        manifests = _read_manifests(ws)
        metrics = json.loads(metrics_path.read_text(encoding="utf-8"))
        timings = {name: m["elapsed_seconds"] for name, m in manifests.items()}
        training = {"gbrbm": timings.get("train")}
        if "embed-lda" in timings:
            training["lda"] = timings["embed-lda"]
        train_m = manifests.get("train", {})
        report = {
            "seed": ws.config.seed,
            "n_hidden": train_m.get("n_hidden"),
            "n_visible": train_m.get("n_visible"),
            "metrics": metrics,
            "training_seconds": training,
            "stage_seconds": timings,
            "artifacts": {name: m["outputs"] for name, m in manifests.items()},
        }
        ws.path(REPORT_JSON).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        ws.path(REPORT_MD).write_text(_markdown(report), encoding="utf-8")
        return [ws.path(REPORT_JSON), ws.path(REPORT_MD)]
    return ws.run("report", [metrics_path], body)


def _markdown(report: dict) -> str:
    lines = ["# Pipeline report", "",
             f"seed {report['seed']}, {report['n_visible']} visible units, {report['n_hidden']} hidden units", "",
             "| method | kNN purity | silhouette | training time (s) |",
             "|---|---|---|---|"]
    for method, m in report["metrics"].items():
        t = report["training_seconds"].get(method)
        lines.append(f"| {method} | {m['knn_purity']:.3f} | {m['silhouette']:.3f} | "
                     f"{'-' if t is None else f'{t:.1f}'} |")
    lines += ["", "## Per-series purity", ""]
    for method, m in report["metrics"].items():
        per = ", ".join(f"{s}: {v:.2f}" for s, v in m["per_series_purity"].items())
        lines.append(f"- {method}: {per}")
    lines += ["", "## Stage wall-clock (s)", ""]
    lines += [f"- {name}: {sec:.2f}" for name, sec in report["stage_seconds"].items()]
    return "\n".join(lines) + "\n"


def run_all(ws: Workspace, records: str | Path | None = None, with_lda: bool = True) -> dict:
    if records is None:
        stage_synth(ws)
    stage_build_vocab(ws, records)
    stage_featurize(ws)
    stage_train(ws)
    methods = ("gbrbm", "lda") if with_lda else ("gbrbm",)
    for method in methods:
        stage_embed(ws, method)
        stage_project(ws, method)
    stage_evaluate(ws)
    return stage_report(ws)


def load_metrics(path: str | Path) -> dict[str, MetricReport]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return {k: MetricReport(**v) for k, v in raw.items()}
