"""End-to-end forecasting, evaluation metrics, and training orchestration.

Inference: predict a heatmap from the observation, extract confident modes,
look each mode's mean latent up in the codebook, fuse with the observation
latent, decode, and rank by confidence. When fewer modes than the requested
budget exist, additional cells are taken in descending heatmap value among
cells outside the suppression radius of anything already selected, so the
output always holds exactly `budget` forecasts. Evaluation computes
ADE/FDE/MMADE/MMFDE and pairwise diversity against a zero-velocity baseline.
Training runs five resumable stages in order: autoencoder, embedding,
codebook, heatmap, finetune.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from mmforecast.autoencoder import (
    AutoencoderConfig,
    AutoencoderModel,
    _build_epoch_targets,
    evaluate_loss,
    finetune,
    train_autoencoder,
)
from mmforecast.embedding import (
    Embedding2D,
    EmbeddingConfig,
    embedding_from_arrays,
    embedding_to_arrays,
    fit_embedding,
    fitted_cells,
    scale_to_heatmap,
)
from mmforecast.kinematics import PoseSequence, SkeletonTopology, motion_transfer
from mmforecast.mining import MultimodalGTIndex, Sample
from mmforecast.motionmap import (
    Codebook,
    CodebookMissError,
    HeatmapModel,
    HeatmapModelConfig,
    Mode,
    MotionMapConfig,
    build_codebook,
    codebook_from_arrays,
    codebook_to_arrays,
    extract_maxima,
    stamp_heatmap,
    train_heatmap_model,
)
from mmforecast.nn.checkpoint import load_checkpoint, save_checkpoint

STAGE_ORDER = ("autoencoder", "embedding", "codebook", "heatmap", "finetune")


class NoConfidentFutureError(RuntimeError):
    """Mode selection could not fill the requested prediction budget."""


@dataclass(frozen=True)
class RankedForecast:
    rank: int
    mode: Mode
    forecast: PoseSequence
    reconstruction: PoseSequence
    uncertainty: np.ndarray  # (T_o + T_f, J) variances


@dataclass(frozen=True)
class CellForecast:
    used_cell: tuple[int, int]
    forecast: PoseSequence
    reconstruction: PoseSequence
    uncertainty: np.ndarray


@dataclass(frozen=True)
class MethodMetrics:
    ade: float
    fde: float
    mmade: float
    mmfde: float
    diversity: float | None


@dataclass
class MetricsReport:
    protocol: str
    budget: int
    sample_count: int
    methods: dict[str, MethodMetrics]
    rank_ade: list[float]
    apd_normalization: str = "unordered-pair-mean"

    def render_text(self) -> str:
        lines = [
            "# forecasting metrics",
            f"# protocol: {self.protocol}   budget: {self.budget}   samples: {self.sample_count}",
            f"# diversity: {self.apd_normalization} pairwise L2 over flattened prediction sequences",
            f"{'method':<16}{'diversity':>12}{'ade':>12}{'fde':>12}{'mmade':>12}{'mmfde':>12}",
        ]
        for name in sorted(self.methods):
            m = self.methods[name]
            div = f"{m.diversity:.6f}" if m.diversity is not None else "-"
            lines.append(
                f"{name:<16}{div:>12}{m.ade:>12.6f}{m.fde:>12.6f}{m.mmade:>12.6f}{m.mmfde:>12.6f}"
            )
        ranks = " ".join(f"{v:.6f}" for v in self.rank_ade)
        lines.append(f"# per-rank mean ade: {ranks}")
        return "\n".join(lines) + "\n"

    def to_records(self) -> str:
        rows = [
            {
                "record": "header",
                "protocol": self.protocol,
                "budget": self.budget,
                "sample_count": self.sample_count,
                "apd_normalization": self.apd_normalization,
            }
        ]
        for name in sorted(self.methods):
            m = self.methods[name]
            rows.append(
                {
                    "record": "method",
                    "method": name,
                    "ade": m.ade,
                    "fde": m.fde,
                    "mmade": m.mmade,
                    "mmfde": m.mmfde,
                    "diversity": m.diversity,
                }
            )
        rows.append({"record": "rank_ade", "values": self.rank_ade})
        return "\n".join(json.dumps(row, sort_keys=True) for row in rows) + "\n"


# -- metrics ----------------------------------------------------------------


def _check_same_shape(pred: PoseSequence, gt: PoseSequence) -> None:
    if pred.frames.shape != gt.frames.shape:
        raise ValueError(
            f"prediction shape {pred.frames.shape} does not match ground truth {gt.frames.shape}"
        )


def _frame_distances(pred: PoseSequence, gt: PoseSequence) -> np.ndarray:
    diff = (pred.frames - gt.frames).reshape(pred.frame_count, -1)
    return np.linalg.norm(diff, axis=1)


def ade(preds: Sequence[PoseSequence], gt: PoseSequence) -> float:
    """Minimum over predictions of the mean per-frame whole-pose L2 distance."""
    if not preds:
        raise ValueError("need at least one prediction")
    best = np.inf
    for pred in preds:
        _check_same_shape(pred, gt)
        best = min(best, float(_frame_distances(pred, gt).mean()))
    return best


def fde(preds: Sequence[PoseSequence], gt: PoseSequence) -> float:
    """Minimum over predictions of the final-frame whole-pose L2 distance."""
    if not preds:
        raise ValueError("need at least one prediction")
    best = np.inf
    for pred in preds:
        _check_same_shape(pred, gt)
        best = min(best, float(_frame_distances(pred, gt)[-1]))
    return best


def _transferred(
    gts: Sequence[PoseSequence],
    reference: PoseSequence | None,
    topology: SkeletonTopology | None,
) -> Sequence[PoseSequence]:
    if reference is None:
        return gts
    if topology is None:
        raise ValueError("topology required to transfer ground truths")
    return [motion_transfer(reference, gt, topology) for gt in gts]


def mmade(
    preds: Sequence[PoseSequence],
    gts: Sequence[PoseSequence],
    reference: PoseSequence | None = None,
    topology: SkeletonTopology | None = None,
) -> float:
    """Mean over ground truths of ade; gts re-skeletoned onto the reference."""
    if not gts:
        raise ValueError("need at least one ground truth")
    gts = _transferred(gts, reference, topology)
    return float(sum(ade(preds, gt) for gt in gts) / len(gts))


def mmfde(
    preds: Sequence[PoseSequence],
    gts: Sequence[PoseSequence],
    reference: PoseSequence | None = None,
    topology: SkeletonTopology | None = None,
) -> float:
    if not gts:
        raise ValueError("need at least one ground truth")
    gts = _transferred(gts, reference, topology)
    return float(sum(fde(preds, gt) for gt in gts) / len(gts))


def diversity(preds: Sequence[PoseSequence]) -> float | None:
    """Mean pairwise L2 over flattened sequences; absent below two predictions."""
    if len(preds) < 2:
        return None
    flats = [p.frames.ravel() for p in preds]
    total = 0.0
    pairs = 0
    for i in range(len(flats)):
        for j in range(i + 1, len(flats)):
            total += float(np.linalg.norm(flats[i] - flats[j]))
            pairs += 1
    return total / pairs


def zero_velocity(observation: PoseSequence, future_frames: int) -> PoseSequence:
    """Forecast that repeats the last observed pose."""
    if future_frames <= 0:
        raise ValueError("future_frames must be positive")
    frames = np.repeat(observation.frames[-1:], future_frames, axis=0)
    return PoseSequence(frames=frames, fps=observation.fps)


# -- trained bundle ----------------------------------------------------------


@dataclass
class TrainedModels:
    autoencoder: AutoencoderModel
    heatmap: HeatmapModel
    map_config: MotionMapConfig
    topology: SkeletonTopology
    fps: float = 25.0
    embedding: Embedding2D | None = None
    codebook: Codebook | None = None
    action_histograms: dict[tuple[int, int], dict[str, int]] | None = None
    curves: dict[str, list[float]] = field(default_factory=dict)
    completed_stages: list[str] = field(default_factory=list)
    finetune_loss_before: float | None = None
    finetune_loss_after: float | None = None
    meta: dict | None = None  # provenance echo populated by load_models

    def require_complete(self) -> None:
        missing = [s for s in STAGE_ORDER if s not in self.completed_stages]
        if missing or self.embedding is None or self.codebook is None:
            raise RuntimeError(f"model bundle incomplete; missing stages: {missing}")

    def digest(self) -> str:
        payload = json.dumps(
            {
                "autoencoder": asdict(self.autoencoder.config),
                "heatmap": asdict(self.heatmap.config),
                "map": asdict(self.map_config),
            },
            sort_keys=True,
        ).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def new_models(
    autoencoder_config: AutoencoderConfig,
    heatmap_config: HeatmapModelConfig,
    map_config: MotionMapConfig,
    topology: SkeletonTopology,
    fps: float = 25.0,
) -> TrainedModels:
    map_config.validate()
    return TrainedModels(
        autoencoder=AutoencoderModel(autoencoder_config),
        heatmap=HeatmapModel(heatmap_config),
        map_config=map_config,
        topology=topology,
        fps=fps,
    )


# -- inference ---------------------------------------------------------------


def _decode_with(
    models: TrainedModels, observation: PoseSequence, z_y_bar: np.ndarray
) -> tuple[PoseSequence, PoseSequence, np.ndarray]:
    model = models.autoencoder
    z_x = model.encode_observation(observation)
    fused = model.fuse(z_x, z_y_bar)
    sequence = model.decode(fused, fps=observation.fps)
    t_o = model.config.observed_frames
    reconstruction = PoseSequence(frames=sequence.frames[:t_o], fps=observation.fps)
    forecast_part = PoseSequence(frames=sequence.frames[t_o:], fps=observation.fps)
    return forecast_part, reconstruction, model.predict_uncertainty(fused)


def _select_cells(
    models: TrainedModels, heatmap: np.ndarray, budget: int
) -> list[tuple[Mode, np.ndarray]]:
    cfg = models.map_config
    selected: list[tuple[Mode, np.ndarray]] = []

    def try_add(cell: tuple[int, int], value: float) -> bool:
        try:
            _, mean = models.codebook.resolve(cell, cfg.lookup_radius)
        except CodebookMissError:
            return False
        selected.append((Mode(cell=cell, confidence=float(value)), mean))
        return True

    for mode in extract_maxima(heatmap, cfg.maxima_threshold, cfg.nms_radius):
        if len(selected) == budget:
            break
        try_add(mode.cell, mode.confidence)

    if len(selected) < budget:
        m = heatmap.shape[0]
        flat = heatmap.ravel()
        # descending value, row-major tie break, same ordering rule as maxima
        order = np.lexsort((np.arange(flat.size), -flat))
        taken = {mode.cell for mode, _ in selected}
        for index in order:
            if len(selected) == budget:
                break
            row, col = divmod(int(index), m)
            if (row, col) in taken:
                continue
            if any(
                max(abs(row - mode.cell[0]), abs(col - mode.cell[1])) <= cfg.nms_radius
                for mode, _ in selected
            ):
                continue
            if try_add((row, col), float(heatmap[row, col])):
                taken.add((row, col))

    if len(selected) < budget:
        raise NoConfidentFutureError(
            f"only {len(selected)} decodable cells available for budget {budget}"
        )
    selected.sort(key=lambda pair: (-pair[0].confidence, pair[0].cell))
    return selected


def forecast(
    models: TrainedModels, observation: PoseSequence, budget: int
) -> list[RankedForecast]:
    """Exactly `budget` confidence-ranked forecasts for one observation."""
    models.require_complete()
    if budget < 1:
        raise ValueError("budget must be at least 1")
    heatmap = models.heatmap.predict(observation)
    ranked = []
    for rank, (mode, z_y_bar) in enumerate(_select_cells(models, heatmap, budget), start=1):
        forecast_part, reconstruction, uncertainty = _decode_with(models, observation, z_y_bar)
        ranked.append(
            RankedForecast(
                rank=rank,
                mode=mode,
                forecast=forecast_part,
                reconstruction=reconstruction,
                uncertainty=uncertainty,
            )
        )
    return ranked


def forecast_at_cell(
    models: TrainedModels, observation: PoseSequence, cell: tuple[int, int]
) -> CellForecast:
    """Decode the forecast for one chosen heatmap cell (with lookup fallback)."""
    models.require_complete()
    m = models.map_config.grid_size
    if not (0 <= cell[0] < m and 0 <= cell[1] < m):
        raise ValueError(f"cell {cell} outside the {m}x{m} grid")
    used_cell, z_y_bar = models.codebook.resolve(cell, models.map_config.lookup_radius)
    forecast_part, reconstruction, uncertainty = _decode_with(models, observation, z_y_bar)
    return CellForecast(
        used_cell=used_cell,
        forecast=forecast_part,
        reconstruction=reconstruction,
        uncertainty=uncertainty,
    )


def evaluate(
    models: TrainedModels,
    test_samples: Sequence[Sample],
    pool_samples: Sequence[Sample],
    index: MultimodalGTIndex,
    budget: int,
    protocol: str,
) -> MetricsReport:
    """Aggregate forecasting metrics over a held-out set, plus zero-velocity.

    `index` joins each test sample id to ids in `pool_samples` whose futures
    serve as multimodal ground truths; they are motion-transferred onto the
    query skeleton before comparison. Aggregation iterates samples in sorted
    id order so reports are bit-reproducible.
    """
    models.require_complete()
    if not test_samples:
        raise ValueError("empty test set")
    by_id = {s.id: s for s in pool_samples}
    t_f = models.autoencoder.config.future_frames

    sums = {
        name: {"ade": 0.0, "fde": 0.0, "mmade": 0.0, "mmfde": 0.0}
        for name in ("motionmap", "zero_velocity")
    }
    diversity_sum = 0.0
    rank_sums = np.zeros(budget)
    for sample in sorted(test_samples, key=lambda s: s.id):
        ranked = forecast(models, sample.x, budget)
        preds = [r.forecast for r in ranked]
        gts = [by_id[member].y for member in index[sample.id]]

        sums["motionmap"]["ade"] += ade(preds, sample.y)
        sums["motionmap"]["fde"] += fde(preds, sample.y)
        sums["motionmap"]["mmade"] += mmade(preds, gts, sample.x, models.topology)
        sums["motionmap"]["mmfde"] += mmfde(preds, gts, sample.x, models.topology)
        diversity_sum += diversity(preds) if budget >= 2 else 0.0
        for i, pred in enumerate(preds):
            rank_sums[i] += ade([pred], sample.y)

        baseline = [zero_velocity(sample.x, t_f)]
        sums["zero_velocity"]["ade"] += ade(baseline, sample.y)
        sums["zero_velocity"]["fde"] += fde(baseline, sample.y)
        sums["zero_velocity"]["mmade"] += mmade(baseline, gts, sample.x, models.topology)
        sums["zero_velocity"]["mmfde"] += mmfde(baseline, gts, sample.x, models.topology)

    n = len(test_samples)
    methods = {
        "motionmap": MethodMetrics(
            ade=sums["motionmap"]["ade"] / n,
            fde=sums["motionmap"]["fde"] / n,
            mmade=sums["motionmap"]["mmade"] / n,
            mmfde=sums["motionmap"]["mmfde"] / n,
            diversity=diversity_sum / n if budget >= 2 else None,
        ),
        "zero_velocity": MethodMetrics(
            ade=sums["zero_velocity"]["ade"] / n,
            fde=sums["zero_velocity"]["fde"] / n,
            mmade=sums["zero_velocity"]["mmade"] / n,
            mmfde=sums["zero_velocity"]["mmfde"] / n,
            diversity=None,
        ),
    }
    return MetricsReport(
        protocol=protocol,
        budget=budget,
        sample_count=n,
        methods=methods,
        rank_ade=[float(v / n) for v in rank_sums],
    )


# -- training orchestration ---------------------------------------------------


@dataclass(frozen=True)
class TrainingParams:
    autoencoder_epochs: int = 120
    autoencoder_lr: float = 1e-3
    autoencoder_batch: int = 32
    heatmap_epochs: int = 150
    heatmap_lr: float = 2e-3
    heatmap_batch: int = 32
    finetune_epochs: int = 40
    finetune_lr: float = 1e-4
    embedding: EmbeddingConfig = EmbeddingConfig()
    seed: int = 0


ProgressFn = Callable[[str, dict], None]


def training_cells(
    models: TrainedModels, samples: Sequence[Sample]
) -> dict[int, tuple[int, int]]:
    """Grid cell of each training sample's future, keyed by sample id."""
    cells = fitted_cells(models.embedding)
    if len(cells) != len(samples):
        raise ValueError("embedding size does not match the training sample count")
    return {sample.id: cells[i] for i, sample in enumerate(samples)}


def _future_latents(models: TrainedModels, samples: Sequence[Sample]) -> np.ndarray:
    t_f = models.autoencoder.config.future_frames
    batch = np.stack([s.y.frames.reshape(t_f, -1) for s in samples])
    return models.autoencoder._encode_y(batch).value


def _observation_tails(samples: Sequence[Sample]) -> np.ndarray:
    return np.stack([s.x.frames[-3:].reshape(3, -1) for s in samples])


def _stage_autoencoder(models, samples, index, params, progress):
    history = train_autoencoder(
        models.autoencoder,
        samples,
        index,
        models.topology,
        epochs=params.autoencoder_epochs,
        seed=params.seed,
        lr=params.autoencoder_lr,
        batch_size=params.autoencoder_batch,
        progress=lambda r: progress("autoencoder", {"epoch": r.epoch, "loss": r.loss}),
    )
    models.curves["autoencoder"] = [r.loss for r in history]


def _stage_embedding(models, samples, index, params, progress):
    latents = _future_latents(models, samples)
    embedding = fit_embedding(latents, params.embedding)
    models.embedding = scale_to_heatmap(embedding, models.map_config.grid_size)
    models.curves["embedding_kl"] = list(models.embedding.kl_trace)
    progress("embedding", {"kl": models.embedding.kl_trace[-1]})


def _stage_codebook(models, samples, index, params, progress):
    cell_of = training_cells(models, samples)
    latents = models.embedding.reference_latents
    pairs = [(cell_of[s.id], latents[i]) for i, s in enumerate(samples)]
    models.codebook = build_codebook(
        pairs, models.map_config.grid_size, models.autoencoder.config.latent_dim
    )
    histograms: dict[tuple[int, int], dict[str, int]] = {}
    for sample in samples:
        cell = cell_of[sample.id]
        bucket = histograms.setdefault(cell, {})
        bucket[sample.action_label] = bucket.get(sample.action_label, 0) + 1
    models.action_histograms = histograms
    progress("codebook", {"cells": len(models.codebook.cells)})


def _stage_heatmap(models, samples, index, params, progress):
    cell_of = training_cells(models, samples)
    sigma = models.map_config.stamp_sigma
    m = models.map_config.grid_size
    targets = np.stack(
        [
            stamp_heatmap([cell_of[member] for member in index[s.id]], sigma, m)
            for s in samples
        ]
    )
    history = train_heatmap_model(
        models.heatmap,
        _observation_tails(samples),
        targets,
        epochs=params.heatmap_epochs,
        seed=params.seed,
        positive_weight=models.map_config.positive_weight,
        lr=params.heatmap_lr,
        batch_size=params.heatmap_batch,
        progress=lambda r: progress("heatmap", {"epoch": r.epoch, "loss": r.loss}),
    )
    models.curves["heatmap"] = [r.loss for r in history]


def _stage_finetune(models, samples, index, params, progress):
    cell_of = training_cells(models, samples)
    lookup = lambda cell: models.codebook.lookup(cell, models.map_config.lookup_radius)

    def codebook_draw_latents() -> np.ndarray:
        rng = np.random.default_rng([params.seed, 0])
        _, _, draws = _build_epoch_targets(samples, index, models.topology, rng)
        return np.stack([lookup(cell_of[draws[s.id]]) for s in samples])

    z_y_bar = codebook_draw_latents()
    models.finetune_loss_before = evaluate_loss(
        models.autoencoder, samples, index, models.topology, params.seed, z_y_override=z_y_bar
    )
    history = finetune(
        models.autoencoder,
        samples,
        index,
        models.topology,
        cell_of_sample=cell_of,
        codebook_mean=lookup,
        epochs=params.finetune_epochs,
        seed=params.seed,
        lr=params.finetune_lr,
        batch_size=params.autoencoder_batch,
        progress=lambda r: progress("finetune", {"epoch": r.epoch, "loss": r.loss}),
    )
    models.curves["finetune"] = [r.loss for r in history]
    models.finetune_loss_after = evaluate_loss(
        models.autoencoder, samples, index, models.topology, params.seed, z_y_override=z_y_bar
    )
    progress(
        "finetune",
        {
            "decode_loss_before": models.finetune_loss_before,
            "decode_loss_after": models.finetune_loss_after,
        },
    )


_STAGE_FNS = {
    "autoencoder": _stage_autoencoder,
    "embedding": _stage_embedding,
    "codebook": _stage_codebook,
    "heatmap": _stage_heatmap,
    "finetune": _stage_finetune,
}


def run_training(
    models: TrainedModels,
    samples: Sequence[Sample],
    index: MultimodalGTIndex,
    params: TrainingParams,
    checkpoint_path=None,
    progress: ProgressFn | None = None,
) -> TrainedModels:
    """Run the remaining training stages in order, checkpointing after each."""
    if progress is None:
        progress = lambda stage, payload: None
    for stage in STAGE_ORDER:
        if stage in models.completed_stages:
            continue
        try:
            _STAGE_FNS[stage](models, samples, index, params, progress)
        except RuntimeError as err:
            raise RuntimeError(f"stage '{stage}' failed: {err}") from err
        models.completed_stages.append(stage)
        progress("stage_complete", {"stage": stage})
        if checkpoint_path is not None:
            save_models(checkpoint_path, models)
    return models


# -- persistence ---------------------------------------------------------------


def save_models(path, models: TrainedModels, extra_meta: dict | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, value in models.autoencoder.store.state_dict().items():
        arrays[f"ae.{name}"] = value
    for name, value in models.heatmap.store.state_dict().items():
        arrays[f"hm.{name}"] = value
    meta: dict = {
        "autoencoder_config": asdict(models.autoencoder.config),
        "heatmap_config": asdict(models.heatmap.config),
        "map_config": asdict(models.map_config),
        "topology_parents": list(models.topology.parents),
        "topology_names": list(models.topology.joint_names or []),
        "fps": models.fps,
        "stage_order": list(STAGE_ORDER),
        "completed_stages": list(models.completed_stages),
        "curves": {k: list(v) for k, v in models.curves.items()},
        "finetune_loss_before": models.finetune_loss_before,
        "finetune_loss_after": models.finetune_loss_after,
    }
    if models.embedding is not None:
        e_arrays, e_meta = embedding_to_arrays(models.embedding)
        arrays.update(e_arrays)
        meta["embedding_meta"] = e_meta
    if models.codebook is not None:
        c_arrays, c_meta = codebook_to_arrays(models.codebook)
        arrays.update(c_arrays)
        meta["codebook_meta"] = c_meta
    if models.action_histograms is not None:
        labels = sorted({label for hist in models.action_histograms.values() for label in hist})
        cells = sorted(models.action_histograms)
        counts = np.zeros((len(cells), len(labels)))
        for i, cell in enumerate(cells):
            for j, label in enumerate(labels):
                counts[i, j] = models.action_histograms[cell].get(label, 0)
        arrays["actionmap.cells"] = np.array(cells, dtype=np.float64).reshape(len(cells), 2)
        arrays["actionmap.counts"] = counts
        meta["action_labels"] = labels
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, arrays, config_hash=models.digest(), meta=meta)


def load_models(path) -> TrainedModels:
    ckpt = load_checkpoint(path)
    meta = ckpt.meta
    ae_config = AutoencoderConfig(**meta["autoencoder_config"])
    hm_config = HeatmapModelConfig(
        **{
            **meta["heatmap_config"],
            "conv_channels": tuple(meta["heatmap_config"]["conv_channels"]),
        }
    )
    map_config = MotionMapConfig(**meta["map_config"])
    parents = tuple(meta["topology_parents"])
    names = tuple(meta["topology_names"]) or tuple(f"j{i}" for i in range(len(parents)))
    topology = SkeletonTopology(parents=parents, joint_names=names)
    models = TrainedModels(
        autoencoder=AutoencoderModel(ae_config),
        heatmap=HeatmapModel(hm_config),
        map_config=map_config,
        topology=topology,
        fps=float(meta["fps"]),
        completed_stages=list(meta["completed_stages"]),
        curves={k: list(v) for k, v in meta.get("curves", {}).items()},
        finetune_loss_before=meta.get("finetune_loss_before"),
        finetune_loss_after=meta.get("finetune_loss_after"),
    )
    if ckpt.config_hash != models.digest():
        raise ValueError("checkpoint config hash does not match its stored configs")
    models.autoencoder.store.load_state_dict(
        {name[3:]: arr for name, arr in ckpt.arrays.items() if name.startswith("ae.")}
    )
    models.heatmap.store.load_state_dict(
        {name[3:]: arr for name, arr in ckpt.arrays.items() if name.startswith("hm.")}
    )
    if "embedding_meta" in meta:
        models.embedding = embedding_from_arrays(ckpt.arrays, meta["embedding_meta"])
    if "codebook_meta" in meta:
        models.codebook = codebook_from_arrays(ckpt.arrays, meta["codebook_meta"])
    if "action_labels" in meta:
        labels = meta["action_labels"]
        histograms: dict[tuple[int, int], dict[str, int]] = {}
        for i, (row, col) in enumerate(ckpt.arrays["actionmap.cells"]):
            counts = ckpt.arrays["actionmap.counts"][i]
            histograms[(int(row), int(col))] = {
                label: int(c) for label, c in zip(labels, counts) if c
            }
        models.action_histograms = histograms
    models.meta = meta
    return models
