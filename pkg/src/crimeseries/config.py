"""Pipeline configuration: one YAML file covering every stage."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .errors import InvalidConfigError
from .evalbench.synth import SynthConfig
from .gbrbm import TrainConfig


def _desk_train_config() -> TrainConfig:
    # lr 0.05 diverges once n_hidden reaches a few hundred on ~2000 visible units
    return TrainConfig(learning_rate=0.001)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    stopwords: str | None = None
    ngram: int = 3
    min_df: int = 3
    max_df_fraction: float = 0.5
    normalize: bool = True
    n_hidden: int = 200
    train: TrainConfig = field(default_factory=_desk_train_config)
    perplexity: float = 30.0
    tsne_iters: int = 1000
    metric_k: int = 5
    lda_topics: int = 50
    lda_iterations: int = 200
    lda_alpha: float | None = None
    lda_beta: float = 0.01

    def seeded(self) -> "PipelineConfig":
        """Copy with the global seed pushed into every stage that draws random numbers."""
        return replace(self, synth=replace(self.synth, seed=self.seed),
                       train=replace(self.train, seed=self.seed))

    def validate(self) -> None:
        self.synth.validate()
        self.train.validate()
        if self.ngram < 1:
            raise InvalidConfigError("ngram must be >= 1")
        if self.min_df < 1:
            raise InvalidConfigError("min_df must be >= 1")
        if not 0.0 < self.max_df_fraction <= 1.0:
            raise InvalidConfigError("max_df_fraction must lie in (0, 1]")
        if self.n_hidden < 1:
            raise InvalidConfigError("n_hidden must be >= 1")
        if self.perplexity <= 0:
            raise InvalidConfigError("perplexity must be positive")
        if self.tsne_iters < 1:
            raise InvalidConfigError("tsne_iters must be >= 1")
        if self.metric_k < 1:
            raise InvalidConfigError("metric_k must be >= 1")
        if self.lda_topics < 2 or self.lda_iterations < 1:
            raise InvalidConfigError("LDA needs lda_topics >= 2 and lda_iterations >= 1")
        if (self.lda_alpha is not None and self.lda_alpha <= 0) or self.lda_beta <= 0:
            raise InvalidConfigError("LDA priors must be positive")
        if self.stopwords is not None and not Path(self.stopwords).is_file():
            raise InvalidConfigError(f"stopword file {self.stopwords} does not exist")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["synth"]["series_sizes"] = list(self.synth.series_sizes)
        d["synth"]["sentences_per_doc"] = list(self.synth.sentences_per_doc)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw or {})
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            if "synth" in raw:
                raw["synth"] = SynthConfig(**(raw["synth"] or {}))
            if "train" in raw:
                raw["train"] = replace(_desk_train_config(), **(raw["train"] or {}))
            return cls(**raw)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise InvalidConfigError(f"{path}: {exc}") from None
        if raw is not None and not isinstance(raw, dict):
            raise InvalidConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(raw)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True), encoding="utf-8")
