"""Heatmap construction, codebook, heatmap predictor, maxima extraction.

Ground-truth heatmaps are built by stamping an unnormalized Gaussian bump at
each multimodal future's grid cell (bumps combined by elementwise maximum so
values stay in [0, 1]); a codebook maps every populated cell to the mean of
the latents that landed there; a small recurrent-plus-1x1-convolution model
predicts the heatmap from the last three observation frames; local maxima
are extracted deterministically with greedy Chebyshev non-maximum
suppression.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from mmforecast.kinematics import PoseSequence
from mmforecast.nn import (
    Adam,
    Conv1x1,
    Dense,
    GruEncoder,
    ParameterStore,
    Tensor,
    tensor,
    weighted_bce,
)

ENCODED_FRAMES = 3


class CodebookMissError(LookupError):
    """No populated codebook cell within the fallback radius."""


@dataclass(frozen=True)
class MotionMapConfig:
    grid_size: int = 64
    stamp_sigma: float = 1.5
    positive_weight: float = 25.0
    maxima_threshold: float = 0.2
    nms_radius: int = 3
    lookup_radius: float = 5.0

    def validate(self) -> None:
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.stamp_sigma <= 0:
            raise ValueError("stamp_sigma must be positive")
        if self.positive_weight < 1:
            raise ValueError("positive_weight must be >= 1")
        if not 0.0 <= self.maxima_threshold <= 1.0:
            raise ValueError("maxima_threshold must lie in [0, 1]")
        if self.nms_radius < 1:
            raise ValueError("nms_radius must be >= 1")


def _check_cells(cells: Sequence[tuple[int, int]], m: int) -> None:
    for row, col in cells:
        if not (0 <= row < m and 0 <= col < m):
            raise ValueError(f"cell ({row}, {col}) outside the {m}x{m} grid")


def stamp_heatmap(cells: Sequence[tuple[int, int]], sigma: float, m: int) -> np.ndarray:
    """Max-combined Gaussian bumps, peak exactly 1 at each stamped cell."""
    if not cells:
        raise ValueError("cannot stamp an empty cell list")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    _check_cells(cells, m)
    rows = np.arange(m)[:, None]
    cols = np.arange(m)[None, :]
    out = np.zeros((m, m))
    for row, col in sorted(set((int(r), int(c)) for r, c in cells)):
        d2 = (rows - row) ** 2 + (cols - col) ** 2
        np.maximum(out, np.exp(-d2 / (2.0 * sigma**2)), out=out)
    return out


def codebook_size_bits(m: int, n: int) -> int:
    """Dense-table footprint of an m x m codebook of 32-bit n-vectors."""
    return 32 * m * m * n


@dataclass
class Codebook:
    grid_size: int
    latent_dim: int
    means: dict[tuple[int, int], np.ndarray]
    counts: dict[tuple[int, int], int]

    @property
    def cells(self) -> list[tuple[int, int]]:
        return sorted(self.means)

    def size_estimate_bits(self) -> int:
        """Dense-table size at 32-bit entries: one n-vector per grid cell."""
        return codebook_size_bits(self.grid_size, self.latent_dim)

    def resolve(
        self, cell: tuple[int, int], radius: float | None = None
    ) -> tuple[tuple[int, int], np.ndarray]:
        """Populated cell serving a query cell, plus its stored mean.

        Exact hits resolve to themselves; otherwise the nearest populated
        cell within the Euclidean radius wins, ties breaking row-major;
        beyond the radius the lookup fails (surfaced upstream as an
        unpopulated-region error).
        """
        cell = (int(cell[0]), int(cell[1]))
        if cell in self.means:
            return cell, self.means[cell]
        if radius is None:
            radius = 5.0
        best: tuple[float, int, int] | None = None
        for row, col in self.cells:  # sorted row-major, so ties keep the first
            dist = float(np.hypot(row - cell[0], col - cell[1]))
            if dist <= radius and (best is None or dist < best[0]):
                best = (dist, row, col)
        if best is None:
            raise CodebookMissError(
                f"no populated cell within radius {radius} of {cell}"
            )
        return (best[1], best[2]), self.means[(best[1], best[2])]

    def lookup(self, cell: tuple[int, int], radius: float | None = None) -> np.ndarray:
        return self.resolve(cell, radius)[1]


def build_codebook(
    pairs: Sequence[tuple[tuple[int, int], np.ndarray]], m: int, n: int
) -> Codebook:
    """Group latents by cell and store per-cell arithmetic means and counts."""
    if not pairs:
        raise ValueError("cannot build a codebook from no pairs")
    sums: dict[tuple[int, int], np.ndarray] = {}
    counts: dict[tuple[int, int], int] = {}
    for cell, latent in pairs:
        cell = (int(cell[0]), int(cell[1]))
        _check_cells([cell], m)
        latent = np.asarray(latent, dtype=np.float64)
        if latent.shape != (n,):
            raise ValueError(f"latent must have shape ({n},), got {latent.shape}")
        if cell in sums:
            sums[cell] = sums[cell] + latent
            counts[cell] += 1
        else:
            sums[cell] = latent.copy()
            counts[cell] = 1
    means = {cell: sums[cell] / counts[cell] for cell in sums}
    return Codebook(grid_size=m, latent_dim=n, means=means, counts=counts)


@dataclass(frozen=True)
class Mode:
    cell: tuple[int, int]
    confidence: float


def extract_maxima(
    values: np.ndarray,
    threshold: float,
    nms_radius: int,
    max_k: int | None = None,
) -> list[Mode]:
    """Deterministic local maxima with greedy Chebyshev NMS.

    Candidates are cells >= all 8 neighbors and >= threshold, processed in
    descending value (ties row-major); a candidate within nms_radius
    (Chebyshev) of an accepted mode is suppressed.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if nms_radius < 1:
        raise ValueError("nms_radius must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    m, m2 = values.shape
    padded = np.full((m + 2, m2 + 2), -np.inf)
    padded[1:-1, 1:-1] = values
    is_peak = np.ones_like(values, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            is_peak &= values >= padded[1 + dr : 1 + dr + m, 1 + dc : 1 + dc + m2]
    is_peak &= values >= threshold
    rows, cols = np.nonzero(is_peak)
    order = sorted(range(len(rows)), key=lambda i: (-values[rows[i], cols[i]], rows[i], cols[i]))
    accepted: list[Mode] = []
    for i in order:
        r, c = int(rows[i]), int(cols[i])
        if any(max(abs(r - mode.cell[0]), abs(c - mode.cell[1])) <= nms_radius for mode in accepted):
            continue
        accepted.append(Mode(cell=(r, c), confidence=float(values[r, c])))
        if max_k is not None and len(accepted) >= max_k:
            break
    return accepted


@dataclass(frozen=True)
class HeatmapModelConfig:
    joint_count: int = 17
    grid_size: int = 64
    hidden_dim: int = 128
    conv_channels: tuple[int, ...] = (16, 16)
    seed: int = 0

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


class HeatmapModel:
    """Recurrent encoder over the last 3 observation frames -> m x m heatmap."""

    def __init__(self, config: HeatmapModelConfig):
        self.config = config
        m = config.grid_size
        self.store = ParameterStore(config.seed)
        self.encoder = GruEncoder(self.store, "henc", 3 * config.joint_count, config.hidden_dim)
        self.expand = Dense(self.store, "hgrid", config.hidden_dim, m * m)
        self.convs = []
        channels = (1,) + tuple(config.conv_channels) + (1,)
        for i, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
            self.convs.append(Conv1x1(self.store, f"hconv{i}", c_in, c_out))

    def _forward(self, last_frames: np.ndarray) -> Tensor:
        """(batch, 3, 3J) observation tails -> (batch, m, m) heatmaps."""
        m = self.config.grid_size
        h = self.encoder(last_frames)
        grid = self.expand(h).reshape(last_frames.shape[0], m * m, 1)
        for conv in self.convs[:-1]:
            grid = conv(grid).tanh()
        grid = self.convs[-1](grid).sigmoid()
        return grid.reshape(last_frames.shape[0], m, m)

    def _tail(self, observation: PoseSequence) -> np.ndarray:
        if observation.frame_count < ENCODED_FRAMES:
            raise ValueError(
                f"need at least {ENCODED_FRAMES} observation frames, got {observation.frame_count}"
            )
        if observation.joint_count != self.config.joint_count:
            raise ValueError(
                f"expected {self.config.joint_count} joints, got {observation.joint_count}"
            )
        tail = observation.frames[-ENCODED_FRAMES:]
        return tail.reshape(1, ENCODED_FRAMES, -1)

    def predict(self, observation: PoseSequence) -> np.ndarray:
        return self._forward(self._tail(observation)).value[0]


@dataclass
class HeatmapEpochRecord:
    epoch: int
    loss: float


def train_heatmap_model(
    model: HeatmapModel,
    observation_tails: np.ndarray,
    target_heatmaps: np.ndarray,
    epochs: int,
    seed: int,
    positive_weight: float = 25.0,
    lr: float = 1e-3,
    batch_size: int = 32,
    progress: Callable[[HeatmapEpochRecord], None] | None = None,
) -> list[HeatmapEpochRecord]:
    """Minimize weighted BCE between predicted and stamped heatmaps.

    observation_tails: (N, 3, 3J) last-3-frame windows; target_heatmaps:
    (N, m, m) stamped ground truth.
    """
    observation_tails = np.asarray(observation_tails, dtype=np.float64)
    target_heatmaps = np.asarray(target_heatmaps, dtype=np.float64)
    if observation_tails.shape[0] != target_heatmaps.shape[0]:
        raise ValueError("one target heatmap per observation tail required")
    if observation_tails.shape[0] == 0:
        raise ValueError("empty training set")
    optimizer = Adam(model.store, lr=lr)
    n_samples = observation_tails.shape[0]
    history: list[HeatmapEpochRecord] = []
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(n_samples)
        total = 0.0
        for start in range(0, n_samples, batch_size):
            pick = order[start : start + batch_size]
            model.store.zero_grad()
            pred = model._forward(observation_tails[pick])
            loss = weighted_bce(pred, target_heatmaps[pick], positive_weight)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(pick)
        mean_loss = total / n_samples
        if not np.isfinite(mean_loss):
            raise RuntimeError(f"heatmap training diverged at epoch {epoch}: loss={mean_loss}")
        record = HeatmapEpochRecord(epoch=epoch, loss=mean_loss)
        history.append(record)
        if progress is not None:
            progress(record)
    return history


def heatmap_to_tsv(values: np.ndarray) -> str:
    lines = ["\t".join(f"{v:.6f}" for v in row) for row in np.asarray(values, dtype=np.float64)]
    return "\n".join(lines) + "\n"


def heatmap_to_pgm(values: np.ndarray) -> str:
    """ASCII portable grey-map, 0..255, row per line."""
    values = np.asarray(values, dtype=np.float64)
    grey = np.clip(np.round(values * 255.0), 0, 255).astype(int)
    height, width = grey.shape
    lines = ["P2", f"{width} {height}", "255"]
    lines += [" ".join(str(v) for v in row) for row in grey]
    return "\n".join(lines) + "\n"


def codebook_to_arrays(codebook: Codebook) -> tuple[dict[str, np.ndarray], dict]:
    cells = codebook.cells
    arrays = {
        "codebook.cells": np.array(cells, dtype=np.float64).reshape(len(cells), 2),
        "codebook.means": np.stack([codebook.means[c] for c in cells])
        if cells
        else np.zeros((0, codebook.latent_dim)),
        "codebook.counts": np.array([codebook.counts[c] for c in cells], dtype=np.float64),
    }
    meta = {"grid_size": codebook.grid_size, "latent_dim": codebook.latent_dim}
    return arrays, meta


def codebook_from_arrays(arrays: dict[str, np.ndarray], meta: dict) -> Codebook:
    cells = [(int(r), int(c)) for r, c in arrays["codebook.cells"]]
    means = {cell: arrays["codebook.means"][i] for i, cell in enumerate(cells)}
    counts = {cell: int(arrays["codebook.counts"][i]) for i, cell in enumerate(cells)}
    return Codebook(
        grid_size=int(meta["grid_size"]),
        latent_dim=int(meta["latent_dim"]),
        means=means,
        counts=counts,
    )
