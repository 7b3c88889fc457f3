"""Dual-branch bounding-box regressor: forward, backward, Adam, checkpoints.

The network projects a pooled visual embedding and a pooled text embedding
into a shared latent space, fuses them by concatenation, and regresses four
sigmoid-bounded coordinates that are reordered coordinate-wise into a valid
(x1, y1, x2, y2) box:

    z_v = relu(v @ W_v + b_v)          z_t = relu(t @ W_t + b_t)
    f   = concat(z_v, z_t)
    h1  = relu(f @ W_1 + b_1)          h2 = relu(h1 @ W_2 + b_2)
    o   = sigmoid(h2 @ W_o + b_o)
    box = (min(o0,o2), min(o1,o3), max(o0,o2), max(o1,o3))

Everything here is deliberately hand-rolled numpy: forward, analytic
backward (gradient-checked in the tests), the Adam loop, and the DXV0
checkpoint round-trip.  Note that with coordinates in [0,1] the Huber loss
can never leave its quadratic branch (|x-y| < 1 always); the piecewise form
is implemented verbatim regardless.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, TrainingError, ValidationError
from .formats import EmbeddingRecord, read_checkpoint_blob, write_checkpoint_blob
from .geometry import NormBox, mean_iou

TEXT_MODES = ("question", "answer", "question_plus_answer")

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    latent_dim: int = 512
    hidden_dim: int = 512
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    text_mode: str = "question_plus_answer"

    def __post_init__(self) -> None:
        if self.latent_dim < 1 or self.hidden_dim < 1:
            raise ConfigError(
                f"latent_dim/hidden_dim must be >= 1, got {self.latent_dim}/{self.hidden_dim}"
            )
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.text_mode not in TEXT_MODES:
            raise ConfigError(
                f"text_mode must be one of {TEXT_MODES}, got {self.text_mode!r}"
            )

    def to_json_dict(self) -> dict:
        return {
            "latent_dim": self.latent_dim,
            "hidden_dim": self.hidden_dim,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "text_mode": self.text_mode,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


# Field order doubles as the on-disk matrix order of DXV0 checkpoints.
PARAM_ORDER = ("W_v", "b_v", "W_t", "b_t", "W_1", "b_1", "W_2", "b_2", "W_o", "b_o")


@dataclass
class RegressorParams:
    W_v: np.ndarray
    b_v: np.ndarray
    W_t: np.ndarray
    b_t: np.ndarray
    W_1: np.ndarray
    b_1: np.ndarray
    W_2: np.ndarray
    b_2: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_ORDER}

    def copy(self) -> "RegressorParams":
        return RegressorParams(**{k: v.copy() for k, v in self.as_dict().items()})

    @property
    def dv(self) -> int:
        return self.W_v.shape[0]

    @property
    def dt(self) -> int:
        return self.W_t.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.W_v.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_1.shape[1]


def init_params(dv: int, dt: int, cfg: TrainConfig, rng: np.random.Generator) -> RegressorParams:
    """He-uniform weights (limit sqrt(6/fan_in)), zero biases."""
    if dv < 1 or dt < 1:
        raise ConfigError(f"embedding dims must be >= 1, got Dv={dv} Dt={dt}")
    latent, hidden = cfg.latent_dim, cfg.hidden_dim

    def he(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    return RegressorParams(
        W_v=he(dv, (dv, latent)),
        b_v=np.zeros(latent),
        W_t=he(dt, (dt, latent)),
        b_t=np.zeros(latent),
        W_1=he(2 * latent, (2 * latent, hidden)),
        b_1=np.zeros(hidden),
        W_2=he(hidden, (hidden, hidden)),
        b_2=np.zeros(hidden),
        W_o=he(hidden, (hidden, 4)),
        b_o=np.zeros(4),
    )


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _as_batch(arr: np.ndarray, dim: int, what: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != dim:
        raise ConfigError(f"{what} has shape {np.asarray(arr).shape}, expected (*, {dim})")
    return a


def _forward_raw(params: RegressorParams, V: np.ndarray, T: np.ndarray) -> dict[str, np.ndarray]:
    """Batched forward pass; returns every intermediate needed by backward."""
    pre_v = V @ params.W_v + params.b_v
    z_v = _relu(pre_v)
    pre_t = T @ params.W_t + params.b_t
    z_t = _relu(pre_t)
    f = np.concatenate([z_v, z_t], axis=1)
    pre_1 = f @ params.W_1 + params.b_1
    h1 = _relu(pre_1)
    pre_2 = h1 @ params.W_2 + params.b_2
    h2 = _relu(pre_2)
    o = _sigmoid(h2 @ params.W_o + params.b_o)

    # Reorder so x1 <= x2 and y1 <= y2, remembering which raw output fed
    # each ordered coordinate so backward can route gradients.
    mask_x = o[:, 0] <= o[:, 2]
    mask_y = o[:, 1] <= o[:, 3]
    boxes = np.stack(
        [
            np.where(mask_x, o[:, 0], o[:, 2]),
            np.where(mask_y, o[:, 1], o[:, 3]),
            np.where(mask_x, o[:, 2], o[:, 0]),
            np.where(mask_y, o[:, 3], o[:, 1]),
        ],
        axis=1,
    )
    return {
        "V": V, "T": T, "pre_v": pre_v, "z_v": z_v, "pre_t": pre_t, "z_t": z_t,
        "f": f, "pre_1": pre_1, "h1": h1, "pre_2": pre_2, "h2": h2, "o": o,
        "mask_x": mask_x, "mask_y": mask_y, "boxes": boxes,
    }


def forward_batch(params: RegressorParams, V: np.ndarray, T: np.ndarray) -> np.ndarray:
    V = _as_batch(V, params.dv, "visual embedding")
    T = _as_batch(T, params.dt, "text embedding")
    if V.shape[0] != T.shape[0]:
        raise ConfigError(f"batch sizes differ: {V.shape[0]} visual vs {T.shape[0]} text")
    return _forward_raw(params, V, T)["boxes"]


def forward(params: RegressorParams, visual: np.ndarray, text: np.ndarray) -> NormBox:
    box = forward_batch(params, visual, text)[0]
    return NormBox(float(box[0]), float(box[1]), float(box[2]), float(box[3]))


def huber_loss(pred: Sequence[float] | np.ndarray, target: Sequence[float] | np.ndarray) -> float:
    """Mean over coordinates of 0.5*d^2 when |d| < 1, |d| - 0.5 otherwise."""
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    ad = np.abs(d)
    per = np.where(ad < 1.0, 0.5 * d * d, ad - 0.5)
    return float(np.mean(per))


def _loss_and_output_grad(boxes: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    d = boxes - targets
    ad = np.abs(d)
    quad = ad < 1.0
    per = np.where(quad, 0.5 * d * d, ad - 0.5)
    loss = float(per.mean())
    # d/dpred of the per-element value, then the two mean reductions.
    g = np.where(quad, d, np.sign(d)) / per.size
    return loss, g


def loss_and_grads(
    params: RegressorParams, V: np.ndarray, T: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Analytic gradients of huber_loss(forward(...)) averaged over the batch."""
    V = _as_batch(V, params.dv, "visual embedding")
    T = _as_batch(T, params.dt, "text embedding")
    targets = _as_batch(targets, 4, "target box")
    if not (V.shape[0] == T.shape[0] == targets.shape[0]):
        raise ConfigError(
            f"batch sizes differ: {V.shape[0]} visual, {T.shape[0]} text, "
            f"{targets.shape[0]} targets"
        )
    cache = _forward_raw(params, V, T)
    loss, g_boxes = _loss_and_output_grad(cache["boxes"], targets)

    # Undo the min/max reordering: each ordered coordinate came from exactly
    # one raw sigmoid output, so its gradient flows there and nowhere else.
    mask_x, mask_y = cache["mask_x"], cache["mask_y"]
    g_o = np.empty_like(g_boxes)
    g_o[:, 0] = np.where(mask_x, g_boxes[:, 0], g_boxes[:, 2])
    g_o[:, 2] = np.where(mask_x, g_boxes[:, 2], g_boxes[:, 0])
    g_o[:, 1] = np.where(mask_y, g_boxes[:, 1], g_boxes[:, 3])
    g_o[:, 3] = np.where(mask_y, g_boxes[:, 3], g_boxes[:, 1])

    o = cache["o"]
    d_pre_o = g_o * o * (1.0 - o)
    g_W_o = cache["h2"].T @ d_pre_o
    g_b_o = d_pre_o.sum(axis=0)

    d_h2 = d_pre_o @ params.W_o.T
    d_pre_2 = d_h2 * (cache["pre_2"] > 0)
    g_W_2 = cache["h1"].T @ d_pre_2
    g_b_2 = d_pre_2.sum(axis=0)

    d_h1 = d_pre_2 @ params.W_2.T
    d_pre_1 = d_h1 * (cache["pre_1"] > 0)
    g_W_1 = cache["f"].T @ d_pre_1
    g_b_1 = d_pre_1.sum(axis=0)

    d_f = d_pre_1 @ params.W_1.T
    latent = params.latent_dim
    d_pre_v = d_f[:, :latent] * (cache["pre_v"] > 0)
    g_W_v = V.T @ d_pre_v
    g_b_v = d_pre_v.sum(axis=0)
    d_pre_t = d_f[:, latent:] * (cache["pre_t"] > 0)
    g_W_t = T.T @ d_pre_t
    g_b_t = d_pre_t.sum(axis=0)

    grads = {
        "W_v": g_W_v, "b_v": g_b_v, "W_t": g_W_t, "b_t": g_b_t,
        "W_1": g_W_1, "b_1": g_b_1, "W_2": g_W_2, "b_2": g_b_2,
        "W_o": g_W_o, "b_o": g_b_o,
    }
    return loss, grads


def backward(
    params: RegressorParams,
    visual: np.ndarray,
    text: np.ndarray,
    target: Sequence[float] | np.ndarray,
) -> dict[str, np.ndarray]:
    return loss_and_grads(params, visual, text, np.asarray(target, dtype=np.float64))[1]


@dataclass(frozen=True)
class Checkpoint:
    params: RegressorParams
    config: TrainConfig
    epoch: int
    val_mean_iou: float
    train_loss: float


def _records_to_arrays(
    records: Sequence[EmbeddingRecord], need_targets: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    if not records:
        raise DataError("no embedding records given")
    dv = records[0].visual.shape[0]
    dt = records[0].text.shape[0]
    for rec in records:
        if rec.visual.shape != (dv,) or rec.text.shape != (dt,):
            raise DataError(
                f"record {rec.qa_id!r}: vector shapes {rec.visual.shape}/{rec.text.shape} "
                f"inconsistent with first record ({dv},)/({dt},)"
            )
        if need_targets and rec.target is None:
            raise DataError(f"record {rec.qa_id!r} has no target box")
    V = np.stack([rec.visual.astype(np.float64) for rec in records])
    T = np.stack([rec.text.astype(np.float64) for rec in records])
    Y = None
    if need_targets:
        Y = np.array([rec.target.as_list() for rec in records], dtype=np.float64)
    return V, T, Y


def _mean_iou_against(params: RegressorParams, V: np.ndarray, T: np.ndarray, Y: np.ndarray) -> float:
    boxes = _forward_raw(params, V, T)["boxes"]
    pairs = [
        (NormBox(*map(float, p)), NormBox(*map(float, g)))
        for p, g in zip(boxes, Y)
    ]
    return mean_iou(pairs)


def train(
    records: Sequence[EmbeddingRecord],
    val: Sequence[EmbeddingRecord],
    cfg: TrainConfig,
) -> tuple[Checkpoint, list[dict]]:
    """Seeded Adam over mini-batches; best epoch = highest val MeanIoU (ties earlier)."""
    V, T, Y = _records_to_arrays(records, need_targets=True)
    if val:
        Vv, Tv, Yv = _records_to_arrays(val, need_targets=True)
    else:
        Vv = Tv = Yv = None
    n = V.shape[0]
    rng = np.random.default_rng(cfg.seed)
    params = init_params(V.shape[1], T.shape[1], cfg, rng)

    m = {k: np.zeros_like(v) for k, v in params.as_dict().items()}
    s = {k: np.zeros_like(v) for k, v in params.as_dict().items()}
    step = 0

    history: list[dict] = []
    best: Checkpoint | None = None
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, V[idx], T[idx], Y[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}"
                )
            step += 1
            for key, grad in grads.items():
                m[key] = _ADAM_BETA1 * m[key] + (1.0 - _ADAM_BETA1) * grad
                s[key] = _ADAM_BETA2 * s[key] + (1.0 - _ADAM_BETA2) * grad * grad
                m_hat = m[key] / (1.0 - _ADAM_BETA1 ** step)
                s_hat = s[key] / (1.0 - _ADAM_BETA2 ** step)
                updated = getattr(params, key) - cfg.learning_rate * m_hat / (
                    np.sqrt(s_hat) + _ADAM_EPS
                )
                if not np.isfinite(updated).all():
                    raise TrainingError(
                        f"non-finite parameter {key} at epoch {epoch}, batch {batch_idx}"
                    )
                setattr(params, key, updated)
            loss_sum += loss * len(idx)
        train_loss = loss_sum / n
        train_miou = _mean_iou_against(params, V, T, Y)
        val_miou = _mean_iou_against(params, Vv, Tv, Yv) if Vv is not None else 0.0
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "train_mean_iou": train_miou,
                "val_mean_iou": val_miou,
            }
        )
        if best is None or val_miou > best.val_mean_iou:
            best = Checkpoint(
                params=params.copy(),
                config=cfg,
                epoch=epoch,
                val_mean_iou=val_miou,
                train_loss=train_loss,
            )
    assert best is not None
    return best, history


def predict(ckpt: Checkpoint, rec: EmbeddingRecord) -> NormBox:
    return forward(ckpt.params, rec.visual, rec.text)


def predict_many(ckpt: Checkpoint, records: Sequence[EmbeddingRecord]) -> list[NormBox]:
    if not records:
        return []
    V, T, _ = _records_to_arrays(records, need_targets=False)
    boxes = forward_batch(ckpt.params, V, T)
    return [NormBox(*map(float, b)) for b in boxes]


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    header = {
        "config": ckpt.config.to_json_dict(),
        "epoch": ckpt.epoch,
        "metrics": {"val_mean_iou": ckpt.val_mean_iou, "train_loss": ckpt.train_loss},
    }
    write_checkpoint_blob(path, header, list(ckpt.params.as_dict().items()))


def load_checkpoint(path: str | Path) -> Checkpoint:
    header, arrays = read_checkpoint_blob(path)
    missing = [name for name in PARAM_ORDER if name not in arrays]
    if missing:
        raise ValidationError(f"{path}: checkpoint missing matrices {missing}")
    params = RegressorParams(**{name: arrays[name] for name in PARAM_ORDER})
    metrics = header.get("metrics", {})
    return Checkpoint(
        params=params,
        config=TrainConfig.from_json_dict(header.get("config", {})),
        epoch=int(header.get("epoch", 0)),
        val_mean_iou=float(metrics.get("val_mean_iou", 0.0)),
        train_loss=float(metrics.get("train_loss", 0.0)),
    )
