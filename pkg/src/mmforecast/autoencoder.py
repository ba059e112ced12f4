"""Sequence autoencoder with multimodal-aware training.

Two GRU encoders map an observation window and a future window to latent
vectors z_x and z_y; a two-layer MLP fuses them; a GRU-cell decoder unrolls
the full observation+future horizon autoregressively; an MLP head predicts a
per-frame per-joint variance grid. Training minimizes the variance-weighted
reconstruction loss against a target whose future half is drawn uniformly at
random from the sample's mined multimodal ground truths each epoch.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from mmforecast.kinematics import PoseSequence, SkeletonTopology, motion_transfer
from mmforecast.mining import MultimodalGTIndex, Sample
from mmforecast.nn import (
    Adam,
    Dense,
    GruCell,
    GruEncoder,
    ParameterStore,
    Tensor,
    concat,
    heteroscedastic_nll,
    stack,
    tensor,
    variance_from_raw,
)
from mmforecast.nn.checkpoint import load_checkpoint, save_checkpoint


@dataclass(frozen=True)
class AutoencoderConfig:
    observed_frames: int = 25
    future_frames: int = 100
    joint_count: int = 17
    latent_dim: int = 128
    seed: int = 0

    def validate(self) -> None:
        for name in ("observed_frames", "future_frames", "joint_count", "latent_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def total_frames(self) -> int:
        return self.observed_frames + self.future_frames

    @property
    def pose_dim(self) -> int:
        return 3 * self.joint_count

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


class AutoencoderModel:
    """Encoders, fusion MLP, autoregressive decoder, and uncertainty head."""

    def __init__(self, config: AutoencoderConfig):
        config.validate()
        self.config = config
        n = config.latent_dim
        d = config.pose_dim
        self.store = ParameterStore(config.seed)
        self.encoder_x = GruEncoder(self.store, "enc_x", d, n)
        self.encoder_y = GruEncoder(self.store, "enc_y", d, n)
        self.fuse_in = Dense(self.store, "fuse.l1", 2 * n, n)
        self.fuse_out = Dense(self.store, "fuse.l2", n, n)
        # the fused latent is re-fed at every step: over a hundred-plus
        # unrolled steps an initial-hidden-only conditioning washes out and
        # the decoder degenerates to a latent-independent mean forecast
        self.decoder_cell = GruCell(self.store, "dec.cell", d + n, n)
        self.decoder_head = Dense(self.store, "dec.head", n, d)
        self.uncertainty_in = Dense(self.store, "unc.l1", n, n)
        self.uncertainty_out = Dense(self.store, "unc.l2", n, config.total_frames * config.joint_count)
        # the root joint is pelvis-centered by construction; zero it structurally
        mask = np.ones(d)
        mask[:3] = 0.0
        self._root_mask = mask

    # -- batched graph-building internals ---------------------------------

    def _flatten(self, frames: np.ndarray) -> np.ndarray:
        return frames.reshape(frames.shape[0], frames.shape[1], -1)

    def _encode_x(self, batch: np.ndarray) -> Tensor:
        return self.encoder_x(batch)

    def _encode_y(self, batch: np.ndarray) -> Tensor:
        return self.encoder_y(batch)

    def _fuse(self, z_x: Tensor, z_y: Tensor) -> Tensor:
        joined = concat([z_x, z_y], axis=-1)
        return self.fuse_out(self.fuse_in(joined).tanh())

    def _decode(self, z_f: Tensor) -> Tensor:
        batch = z_f.shape[0]
        h = z_f
        previous = tensor(np.zeros((batch, self.config.pose_dim)))
        frames = []
        for _ in range(self.config.total_frames):
            h = self.decoder_cell(concat([previous, z_f], axis=-1), h)
            pose = self.decoder_head(h) * self._root_mask
            frames.append(pose)
            previous = pose
        return stack(frames, axis=1)  # (batch, total_frames, pose_dim)

    def _uncertainty_raw(self, z_f: Tensor) -> Tensor:
        raw = self.uncertainty_out(self.uncertainty_in(z_f).tanh())
        return raw.reshape(z_f.shape[0], self.config.total_frames, self.config.joint_count)

    # -- single-sample interface ------------------------------------------

    def _check_window(self, window: PoseSequence, frames: int, kind: str) -> np.ndarray:
        if window.frame_count != frames:
            raise ValueError(f"{kind} window must have {frames} frames, got {window.frame_count}")
        if window.joint_count != self.config.joint_count:
            raise ValueError(
                f"expected {self.config.joint_count} joints, got {window.joint_count}"
            )
        return window.frames.reshape(1, frames, -1)

    def encode_observation(self, window: PoseSequence) -> np.ndarray:
        batch = self._check_window(window, self.config.observed_frames, "observation")
        return self._encode_x(batch).value[0]

    def encode_future(self, window: PoseSequence) -> np.ndarray:
        batch = self._check_window(window, self.config.future_frames, "future")
        return self._encode_y(batch).value[0]

    def _check_latent(self, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        if latent.shape != (self.config.latent_dim,):
            raise ValueError(f"latent must have shape ({self.config.latent_dim},), got {latent.shape}")
        if not np.all(np.isfinite(latent)):
            raise ValueError("non-finite latent")
        return latent

    def fuse(self, z_x: np.ndarray, z_y: np.ndarray) -> np.ndarray:
        z_x = self._check_latent(z_x)
        z_y = self._check_latent(z_y)
        return self._fuse(tensor(z_x[None]), tensor(z_y[None])).value[0]

    def decode(self, z_f: np.ndarray, fps: float = 25.0) -> PoseSequence:
        z_f = self._check_latent(z_f)
        flat = self._decode(tensor(z_f[None])).value[0]
        frames = flat.reshape(self.config.total_frames, self.config.joint_count, 3)
        return PoseSequence(frames=frames, fps=fps)

    def predict_uncertainty(self, z_f: np.ndarray) -> np.ndarray:
        z_f = self._check_latent(z_f)
        raw = self._uncertainty_raw(tensor(z_f[None]))
        return variance_from_raw(raw).value[0]


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    draws: dict[int, int] = field(default_factory=dict)  # sample id -> drawn member id


def _build_epoch_targets(
    samples: Sequence[Sample],
    index: MultimodalGTIndex,
    topology: SkeletonTopology,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, dict[int, int]]:
    """Draw one multimodal future per sample and assemble training arrays."""
    drawn_futures = []
    draws: dict[int, int] = {}
    by_id = {s.id: s for s in samples}
    for sample in samples:
        members = index[sample.id]
        pick = int(members[rng.integers(len(members))])
        draws[sample.id] = pick
        future = motion_transfer(sample.x, by_id[pick].y, topology)
        drawn_futures.append(future.frames)
    futures = np.stack(drawn_futures)  # (N, T_f, J, 3)
    observations = np.stack([s.x.frames for s in samples])  # (N, T_o, J, 3)
    return observations, futures, draws


def _epoch_pass(
    model: AutoencoderModel,
    optimizer: Adam,
    observations: np.ndarray,
    futures: np.ndarray,
    order: np.ndarray,
    batch_size: int,
    z_y_override: np.ndarray | None = None,
    detach_z_x: bool = False,
) -> float:
    cfg = model.config
    n_samples = observations.shape[0]
    total = 0.0
    for start in range(0, n_samples, batch_size):
        pick = order[start : start + batch_size]
        obs = observations[pick]
        fut = futures[pick]
        target = np.concatenate([obs, fut], axis=1)  # (B, T, J, 3)
        obs_flat = obs.reshape(obs.shape[0], cfg.observed_frames, -1)
        fut_flat = fut.reshape(fut.shape[0], cfg.future_frames, -1)
        model.store.zero_grad()
        z_x = model._encode_x(obs_flat)
        if detach_z_x:
            z_x = tensor(z_x.value)
        if z_y_override is None:
            z_y = model._encode_y(fut_flat)
        else:
            z_y = tensor(z_y_override[pick])
        z_f = model._fuse(z_x, z_y)
        pred = model._decode(z_f).reshape(len(pick), cfg.total_frames, cfg.joint_count, 3)
        raw = model._uncertainty_raw(z_f)
        loss = heteroscedastic_nll(pred, target, raw)
        loss.backward()
        optimizer.step()
        total += loss.item() * len(pick)
    return total / n_samples


def train_autoencoder(
    model: AutoencoderModel,
    samples: Sequence[Sample],
    index: MultimodalGTIndex,
    topology: SkeletonTopology,
    epochs: int,
    seed: int,
    lr: float = 1e-3,
    batch_size: int = 32,
    progress: Callable[[EpochRecord], None] | None = None,
) -> list[EpochRecord]:
    """Optimize all model parameters with per-epoch Monte-Carlo GT draws."""
    if not samples:
        raise ValueError("empty training set")
    optimizer = Adam(model.store, lr=lr)
    history: list[EpochRecord] = []
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        observations, futures, draws = _build_epoch_targets(samples, index, topology, rng)
        order = rng.permutation(len(samples))
        loss = _epoch_pass(model, optimizer, observations, futures, order, batch_size)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged at epoch {epoch}: loss={loss}")
        record = EpochRecord(epoch=epoch, loss=loss, draws=draws)
        history.append(record)
        if progress is not None:
            progress(record)
    return history


def finetune(
    model: AutoencoderModel,
    samples: Sequence[Sample],
    index: MultimodalGTIndex,
    topology: SkeletonTopology,
    cell_of_sample: dict[int, tuple[int, int]],
    codebook_mean: Callable[[tuple[int, int]], np.ndarray],
    epochs: int,
    seed: int,
    lr: float = 1e-4,
    batch_size: int = 32,
    progress: Callable[[EpochRecord], None] | None = None,
) -> list[EpochRecord]:
    """Refine fusion and decoder with z_y replaced by codebook cell means.

    Encoders and the uncertainty head stay frozen; every drawn future must
    already have a fitted grid cell (true by construction for training
    futures) and that cell must be populated in the codebook.
    """
    if not samples:
        raise ValueError("empty training set")
    trainable = [n for n in model.store.names() if n.startswith(("fuse.", "dec."))]
    optimizer = Adam(model.store, lr=lr, parameter_names=trainable)
    history: list[EpochRecord] = []
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        observations, futures, draws = _build_epoch_targets(samples, index, topology, rng)
        z_y_bar = np.stack(
            [codebook_mean(cell_of_sample[draws[s.id]]) for s in samples]
        )
        order = rng.permutation(len(samples))
        loss = _epoch_pass(
            model,
            optimizer,
            observations,
            futures,
            order,
            batch_size,
            z_y_override=z_y_bar,
            detach_z_x=True,
        )
        if not np.isfinite(loss):
            raise RuntimeError(f"fine-tuning diverged at epoch {epoch}: loss={loss}")
        record = EpochRecord(epoch=epoch, loss=loss, draws=draws)
        history.append(record)
        if progress is not None:
            progress(record)
    return history


def evaluate_loss(
    model: AutoencoderModel,
    samples: Sequence[Sample],
    index: MultimodalGTIndex,
    topology: SkeletonTopology,
    seed: int,
    z_y_override: np.ndarray | None = None,
) -> float:
    """Loss of the current model on one deterministic draw, no updates."""
    rng = np.random.default_rng([seed, 0])
    observations, futures, _ = _build_epoch_targets(samples, index, topology, rng)
    cfg = model.config
    target = np.concatenate([observations, futures], axis=1)
    z_x = model._encode_x(observations.reshape(len(samples), cfg.observed_frames, -1))
    if z_y_override is None:
        z_y = model._encode_y(futures.reshape(len(samples), cfg.future_frames, -1))
    else:
        z_y = tensor(z_y_override)
    z_f = model._fuse(z_x, z_y)
    pred = model._decode(z_f).reshape(len(samples), cfg.total_frames, cfg.joint_count, 3)
    raw = model._uncertainty_raw(z_f)
    return heteroscedastic_nll(pred, target, raw).item()


def save_autoencoder(path, model: AutoencoderModel, meta: dict | None = None) -> None:
    payload = dict(meta or {})
    payload["config"] = asdict(model.config)
    save_checkpoint(path, model.store.state_dict(), config_hash=model.config.digest(), meta=payload)


def load_autoencoder(path) -> AutoencoderModel:
    ckpt = load_checkpoint(path)
    config = AutoencoderConfig(**ckpt.meta["config"])
    if ckpt.config_hash != config.digest():
        raise ValueError("checkpoint config hash does not match its stored config")
    model = AutoencoderModel(config)
    model.store.load_state_dict(ckpt.arrays)
    return model
