"""Gaussian-Bernoulli restricted Boltzmann machine.

Energy of a joint configuration (visible ``v`` real, hidden ``h`` binary)::

    E(v, h) = -sum_ij w_ij h_j v_i / s_i + sum_i (v_i - b_i)^2 / (2 s_i^2) - sum_j c_j h_j

so that ``p(h_j = 1 | v) = sigmoid(sum_i w_ij v_i / s_i + c_j)`` and
``v_i | h ~ Normal(b_i + s_i sum_j w_ij h_j, s_i^2)``.

Everything here works on dense arrays. Functions taking ``v`` or ``h`` accept
either a single vector or a 2-D batch with one configuration per row.
"""

from __future__ import annotations

import io
import itertools
import logging
import struct
import zipfile
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logsumexp

from .errors import (DimensionMismatchError, FormatError, InvalidConfigError, TrainingDivergedError,
                     VersionMismatchError)

log = logging.getLogger(__name__)

MAX_EXACT_HIDDEN = 20


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 20
    epochs: int = 30
    cd_k: int = 1
    seed: int = 0
    weight_init_std: float = 0.01
    # "mean" starts visible biases at the data mean, "zero" at the origin
    visible_bias_init: str = "mean"
    # fixed (not learned) standard deviation of every visible unit
    sigma: float = 1.0

    def validate(self) -> None:
        if not self.learning_rate >= 0:
            raise InvalidConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.cd_k < 1:
            raise InvalidConfigError(f"cd_k must be >= 1, got {self.cd_k}")
        if not self.weight_init_std >= 0:
            raise InvalidConfigError("weight_init_std must be >= 0")
        if not self.sigma > 0:
            raise InvalidConfigError("sigma must be positive")
        if self.visible_bias_init not in ("mean", "zero"):
            raise InvalidConfigError(f"visible_bias_init must be 'mean' or 'zero', got {self.visible_bias_init!r}")


@dataclass
class GbrbmModel:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sigma: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64, ndmin=2)
        self.b = np.array(self.b, dtype=np.float64).reshape(-1)
        self.c = np.array(self.c, dtype=np.float64).reshape(-1)
        self.sigma = np.array(self.sigma, dtype=np.float64).reshape(-1)
        m, n = self.W.shape
        if self.b.shape != (m,) or self.sigma.shape != (m,) or self.c.shape != (n,):
            raise DimensionMismatchError(
                f"W is {m}x{n} but b, c, sigma have lengths {self.b.size}, {self.c.size}, {self.sigma.size}")
        if not np.all(self.sigma > 0):
            raise ValueError("sigma must be strictly positive")
        for name in ("W", "b", "c", "sigma"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "GbrbmModel":
        return GbrbmModel(self.W.copy(), self.b.copy(), self.c.copy(), self.sigma.copy(), self.seed)


@dataclass
class Gradients:
    """Ascent direction on the log-likelihood."""

    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dW.ravel(), self.db, self.dc])


@dataclass(frozen=True)
class EmbeddingMatrix:
    values: np.ndarray
    row_ids: tuple[str, ...] = field(default=())

    def save(self, path: str | Path) -> None:
        # hand-rolled npz with a fixed timestamp so equal embeddings give equal bytes
        arrays = {"values": np.asarray(self.values, dtype=np.float64),
                  "row_ids": np.array(self.row_ids, dtype=str)}
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, arr, allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingMatrix":
        with np.load(path, allow_pickle=False) as z:
            return cls(z["values"], tuple(str(x) for x in z["row_ids"]))


def init_model(m: int, n: int, config: TrainConfig = TrainConfig(),
               data_mean: np.ndarray | None = None,
               rng: np.random.Generator | None = None) -> GbrbmModel:
    if m < 1 or n < 1:
        raise ValueError("need at least one visible and one hidden unit")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    W = rng.normal(0.0, config.weight_init_std, size=(m, n))
    b = np.zeros(m) if data_mean is None else np.asarray(data_mean, dtype=np.float64).copy()
    return GbrbmModel(W, b, np.zeros(n), np.ones(m), seed=config.seed)


def _check_visible(model: GbrbmModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.m:
        raise DimensionMismatchError(f"expected {model.m} visible values, got {v.shape[-1]}")
    return v


def _check_hidden(model: GbrbmModel, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != model.n:
        raise DimensionMismatchError(f"expected {model.n} hidden values, got {h.shape[-1]}")
    return h


def energy(model: GbrbmModel, v, h) -> float | np.ndarray:
    v = _check_visible(model, v)
    h = _check_hidden(model, h)
    scaled = v / model.sigma
    coupling = np.einsum("...i,ij,...j->...", scaled, model.W, h)
    quad = np.sum((v - model.b) ** 2 / (2.0 * model.sigma ** 2), axis=-1)
    return -coupling + quad - h @ model.c


def hidden_conditional(model: GbrbmModel, v) -> np.ndarray:
    """``p(h_j = 1 | v)`` for every hidden unit."""
    v = _check_visible(model, v)
    return expit((v / model.sigma) @ model.W + model.c)


def visible_conditional(model: GbrbmModel, h) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard deviation of the Gaussian ``v | h``."""
    h = _check_hidden(model, h)
    mean = model.b + model.sigma * (h @ model.W.T)
    return mean, np.broadcast_to(model.sigma, mean.shape).copy()


def sample_hidden(model: GbrbmModel, v, rng: np.random.Generator) -> np.ndarray:
    p = hidden_conditional(model, v)
    return (rng.random(p.shape) < p).astype(np.float64)


def sample_visible(model: GbrbmModel, h, rng: np.random.Generator) -> np.ndarray:
    mean, std = visible_conditional(model, h)
    return mean + std * rng.standard_normal(mean.shape)


def gibbs_step(model: GbrbmModel, v, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    h = sample_hidden(model, v, rng)
    return h, sample_visible(model, h, rng)


def cd_k_gradient(model: GbrbmModel, batch, k: int, rng: np.random.Generator) -> Gradients:
    """Contrastive-divergence estimate, batch averaged, with mean-field hidden statistics."""
    if k < 1:
        raise ValueError("k must be >= 1")
    v0 = np.atleast_2d(_check_visible(model, batch))
    if v0.shape[0] == 0:
        raise ValueError("empty batch")
    vk = v0
    for _ in range(k):
        _, vk = gibbs_step(model, vk, rng)
    p0 = hidden_conditional(model, v0)
    pk = hidden_conditional(model, vk)
    x0 = v0 / model.sigma
    xk = vk / model.sigma
    size = v0.shape[0]
    dW = (x0.T @ p0 - xk.T @ pk) / size
    db = np.mean(v0 - vk, axis=0) / model.sigma ** 2
    dc = np.mean(p0 - pk, axis=0)
    return Gradients(dW, db, dc)


def _hidden_configs(n: int) -> np.ndarray:
    if n > MAX_EXACT_HIDDEN:
        raise ValueError(f"exact enumeration needs n <= {MAX_EXACT_HIDDEN}, got {n}")
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)))


def _log_partition_terms(model: GbrbmModel, H: np.ndarray) -> np.ndarray:
    """``log Z_h``: log of the Gaussian integral of ``exp(-E(v, h))`` over ``v`` for each row of H."""
    a = H @ model.W.T
    per_unit = np.log(model.sigma * np.sqrt(2.0 * np.pi)) + model.b * a / model.sigma + 0.5 * a ** 2
    return H @ model.c + per_unit.sum(axis=1)


def log_partition(model: GbrbmModel) -> float:
    H = _hidden_configs(model.n)
    return float(logsumexp(_log_partition_terms(model, H)))


def exact_log_likelihood(model: GbrbmModel, v) -> float:
    """``ln p(v)`` by enumerating all ``2**n`` hidden configurations."""
    v = _check_visible(model, v)
    H = _hidden_configs(model.n)
    unnorm = logsumexp(-energy(model, np.broadcast_to(v, (H.shape[0], model.m)), H))
    return float(unnorm - logsumexp(_log_partition_terms(model, H)))


def exact_gradient(model: GbrbmModel, v) -> Gradients:
    """Analytic gradient of ``ln p(v)`` using the exact posterior and exact model moments."""
    v = _check_visible(model, v)
    H = _hidden_configs(model.n)
    post = hidden_conditional(model, v)
    x = v / model.sigma

    log_zh = _log_partition_terms(model, H)
    weights = np.exp(log_zh - logsumexp(log_zh))
    a = H @ model.W.T
    # E[v_i / s_i | h] = b_i / s_i + a_i
    cond_x = model.b / model.sigma + a
    neg_W = np.einsum("h,hi,hj->ij", weights, cond_x, H)
    neg_b = (weights @ a) / model.sigma
    neg_c = weights @ H

    dW = np.outer(x, post) - neg_W
    db = (v - model.b) / model.sigma ** 2 - neg_b
    dc = post - neg_c
    return Gradients(dW, db, dc)


def _dense(data) -> np.ndarray:
    if hasattr(data, "matrix"):
        data = data.matrix
    if sp.issparse(data):
        return data.toarray().astype(np.float64)
    return np.atleast_2d(np.asarray(data, dtype=np.float64))


def reconstruct(model: GbrbmModel, v) -> np.ndarray:
    """Mean of ``v | h`` evaluated at the mean-field hidden activations."""
    return visible_conditional(model, hidden_conditional(model, v))[0]


def reconstruction_error(model: GbrbmModel, X: np.ndarray) -> float:
    diff = X - reconstruct(model, X)
    return float(np.mean(np.sum(diff ** 2, axis=1)))


def _train_rngs(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def _initial_model(X: np.ndarray, n_hidden: int, config: TrainConfig, rng) -> GbrbmModel:
    mean = X.mean(axis=0) if config.visible_bias_init == "mean" else None
    model = init_model(X.shape[1], n_hidden, config, data_mean=mean, rng=rng)
    model.sigma[:] = config.sigma
    return model


def initial_model(data, n_hidden: int, config: TrainConfig = TrainConfig()) -> GbrbmModel:
    """The model :func:`train` starts from for this data and config."""
    return _initial_model(_dense(data), n_hidden, config, _train_rngs(config.seed)[0])


def train(data, n_hidden: int, config: TrainConfig = TrainConfig(),
          epoch_callback=None) -> tuple[GbrbmModel, list[float]]:
    """Mini-batch SGD ascent on the CD-k estimate for ``config.epochs`` epochs.

    ``data`` is a TermDocMatrix, a sparse matrix or a dense array. Returns the
    trained model and the per-epoch mean squared reconstruction error.
    """
    config.validate()
    if n_hidden < 1:
        raise InvalidConfigError("n_hidden must be >= 1")
    X = _dense(data)
    n_docs = X.shape[0]
    if n_docs == 0:
        raise InvalidConfigError("training data is empty")

    init_rng, shuffle_rng, gibbs_rng = _train_rngs(config.seed)
    model = _initial_model(X, n_hidden, config, init_rng)

    lr = config.learning_rate
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n_docs)
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n_docs, config.batch_size):
                batch = X[order[start:start + config.batch_size]]
                grad = cd_k_gradient(model, batch, config.cd_k, gibbs_rng)
                model.W += lr * grad.dW
                model.b += lr * grad.db
                model.c += lr * grad.dc
            trace.append(reconstruction_error(model, X))
        if not (np.isfinite(trace[-1]) and np.all(np.isfinite(model.W))):
            raise TrainingDivergedError(
                f"parameters became non-finite in epoch {epoch + 1} "
                f"(learning_rate={lr}, n_hidden={n_hidden}); lower the learning rate")
        log.debug("epoch %d reconstruction error %.6g", epoch + 1, trace[-1])
        if epoch_callback is not None:
            epoch_callback(epoch, model, trace[-1])
    return model, trace


def embed(model: GbrbmModel, data, row_ids=None) -> EmbeddingMatrix:
    """Deterministic hidden activation probabilities for every document."""
    X = _dense(data)
    if X.shape[1] != model.m:
        raise DimensionMismatchError(f"data has {X.shape[1]} columns, model expects {model.m}")
    if row_ids is None:
        row_ids = getattr(data, "row_ids", tuple(str(i) for i in range(X.shape[0])))
    return EmbeddingMatrix(hidden_conditional(model, X), tuple(row_ids))


# Model file layout (little endian):
#   8s magic | u32 version | u64 m | u64 n | u8 has_seed | i64 seed
#   f64[m*n] W row-major | f64[m] b | f64[n] c | f64[m] sigma | u32 crc32(payload)
MODEL_MAGIC = b"GBRBM\x00\x0d\x0a"
MODEL_VERSION = 1
_HEADER = struct.Struct("<8sIQQBq")


def save_model(model: GbrbmModel, path: str | Path) -> None:
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                       for a in (model.W, model.b, model.c, model.sigma))
    header = _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.m, model.n,
                          model.seed is not None, model.seed or 0)
    Path(path).write_bytes(header + payload + struct.pack("<I", zlib.crc32(payload)))


def load_model(path: str | Path) -> GbrbmModel:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated model header")
    magic, version, m, n, has_seed, seed = _HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: not a GBRBM model file")
    if version != MODEL_VERSION:
        raise VersionMismatchError(f"{path}: model version {version}, expected {MODEL_VERSION}")
    n_values = m * n + 2 * m + n
    expected = _HEADER.size + 8 * n_values + 4
    if len(raw) != expected:
        raise FormatError(f"{path}: {len(raw)} bytes but dims {m}x{n} need {expected}")
    payload = raw[_HEADER.size:-4]
    (crc,) = struct.unpack("<I", raw[-4:])
    if crc != zlib.crc32(payload):
        raise FormatError(f"{path}: checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    W = values[:m * n].reshape(m, n)
    b = values[m * n:m * n + m]
    c = values[m * n + m:m * n + m + n]
    sigma = values[m * n + m + n:]
    return GbrbmModel(W, b, c, sigma, seed=seed if has_seed else None)


def with_params(model: GbrbmModel, **changes) -> GbrbmModel:
    """Copy of ``model`` with some parameter arrays replaced."""
    return replace(model.copy(), **changes)
