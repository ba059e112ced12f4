"""Observation/future windowing and multimodal ground-truth mining.

Two observations are multimodal ground truths for each other when, after
transferring the candidate onto the query's skeleton, their last three
observation frames lie within a threshold tau: d(a, b) is the mean over
(3 frames x J joints) of per-joint L2 distance. The candidate is always
rescaled with the query's final observation frame as the skeleton
reference, so the relation is deliberately not symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import MotionCorpus
from .kinematics import (
    ROOT,
    PoseSequence,
    SkeletonTopology,
    cartesian_to_spherical,
    spherical_to_offsets,
    zero_center,
)

MINING_FRAMES = 3  # observation frames compared during mining


@dataclass
class Sample:
    """One windowed (observation, future) pair, both pelvis-centered."""

    id: int
    x: PoseSequence
    y: PoseSequence
    action_label: str
    source_sequence: int


@dataclass
class MultimodalGTIndex:
    tau: float
    members: dict[int, tuple[int, ...]]  # query sample id -> sorted member ids

    def __getitem__(self, sample_id: int) -> tuple[int, ...]:
        return self.members[sample_id]


def window_corpus(
    corpus: MotionCorpus, t_o: int, t_f: int, stride: int
) -> list[Sample]:
    """Slide windows of length t_o + t_f over every sequence.

    Sequences shorter than a full window yield no samples. Sample ids are
    assigned in (sequence, offset) order.
    """
    if t_o < 1 or t_f < 1 or stride < 1:
        raise ValueError("t_o, t_f, and stride must all be >= 1")
    samples = []
    topo = corpus.topology
    next_id = 0
    for seq_index, entry in enumerate(corpus.sequences):
        seq = entry.sequence
        window = t_o + t_f
        for offset in range(0, seq.frame_count - window + 1, stride):
            chunk = PoseSequence(frames=seq.frames[offset : offset + window], fps=seq.fps)
            centered = zero_center(chunk, topo)
            samples.append(
                Sample(
                    id=next_id,
                    x=PoseSequence(frames=centered.frames[:t_o], fps=seq.fps),
                    y=PoseSequence(frames=centered.frames[t_o:], fps=seq.fps),
                    action_label=entry.action_label,
                    source_sequence=seq_index,
                )
            )
            next_id += 1
    return samples


def _observation_features(samples, topo):
    """Spherical decomposition of each sample's last MINING_FRAMES observation
    frames plus the link lengths of its final frame (the skeleton reference)."""
    last3 = np.stack([s.x.frames[-MINING_FRAMES:] for s in samples])  # (N, 3, J, 3)
    n, f, j, _ = last3.shape
    flat = PoseSequence(frames=last3.reshape(n * f, j, 3), fps=samples[0].x.fps)
    sph = cartesian_to_spherical(flat, topo)
    theta = sph.theta.reshape(n, f, j)
    phi = sph.phi.reshape(n, f, j)
    rho_last = sph.rho.reshape(n, f, j)[:, -1, :]  # final-frame link lengths
    return last3, theta, phi, rho_last


def _fk_batch(rho, theta, phi, topo):
    """Forward kinematics for (N, F, J) spherical links with a zero root."""
    offsets = spherical_to_offsets(rho, theta, phi)  # (N, F, J, 3)
    pos = np.zeros_like(offsets)
    for j in topo.topological_order():
        p = topo.parents[j]
        if p == ROOT:
            continue
        pos[..., j, :] = pos[..., p, :] + offsets[..., j, :]
    return pos


def pairwise_observation_distances(
    queries: list[Sample], pool: list[Sample], topo: SkeletonTopology
) -> np.ndarray:
    """d[i, k]: mean per-joint L2 distance between query i's last 3 observation
    frames and pool sample k's, after transferring k onto i's skeleton."""
    for s in list(queries) + list(pool):
        if s.x.frame_count < MINING_FRAMES:
            raise ValueError(
                f"sample {s.id} has fewer than {MINING_FRAMES} observation frames"
            )
    q_last3, _, _, q_rho = _observation_features(queries, topo)
    _, p_theta, p_phi, _ = _observation_features(pool, topo)
    out = np.empty((len(queries), len(pool)))
    for i in range(len(queries)):
        rho = np.broadcast_to(q_rho[i][None, None, :], p_theta.shape)
        rescaled = _fk_batch(rho, p_theta, p_phi, topo)  # (Np, 3, J, 3)
        diff = np.linalg.norm(q_last3[i][None] - rescaled, axis=-1)  # (Np, 3, J)
        out[i] = diff.mean(axis=(1, 2))
    return out


def mine_against(
    queries: list[Sample],
    pool: list[Sample],
    topo: SkeletonTopology,
    tau: float,
    ensure_nonempty: bool = False,
) -> dict[int, tuple[int, ...]]:
    """Pool samples within tau of each query; optionally fall back to the
    single nearest pool sample when nothing matches."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    d = pairwise_observation_distances(queries, pool, topo)
    pool_ids = np.array([s.id for s in pool])
    members = {}
    for i, q in enumerate(queries):
        hit = pool_ids[d[i] <= tau]
        if hit.size == 0 and ensure_nonempty:
            hit = pool_ids[[int(np.argmin(d[i]))]]
        members[q.id] = tuple(sorted(int(h) for h in hit))
    return members


def mine_multimodal_gt(
    samples: list[Sample], topo: SkeletonTopology, tau: float
) -> MultimodalGTIndex:
    """Mine within one sample set; every sample is a member of its own set."""
    members = mine_against(samples, samples, topo, tau)
    for s in samples:
        if s.id not in members[s.id]:
            members[s.id] = tuple(sorted(members[s.id] + (s.id,)))
    return MultimodalGTIndex(tau=tau, members=members)


def split_by_sequence(
    corpus: MotionCorpus, samples: list[Sample], test_fraction: float
) -> tuple[list[Sample], list[Sample]]:
    """Deterministic held-out split: within each action label, the last
    ceil(fraction * count) source sequences go to the test side."""
    if not (0.0 <= test_fraction < 1.0):
        raise ValueError("test_fraction must be in [0, 1)")
    by_label: dict[str, list[int]] = {}
    for idx, entry in enumerate(corpus.sequences):
        by_label.setdefault(entry.action_label, []).append(idx)
    test_sequences = set()
    for label in sorted(by_label):
        indices = by_label[label]
        n_test = int(np.ceil(test_fraction * len(indices))) if test_fraction > 0 else 0
        test_sequences.update(indices[len(indices) - n_test :])
    train = [s for s in samples if s.source_sequence not in test_sequences]
    test = [s for s in samples if s.source_sequence in test_sequences]
    return train, test


INDEX_MAGIC = "#mmindex v1"


def save_index(index: MultimodalGTIndex, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{INDEX_MAGIC}\ttau={index.tau!r}\tcount={len(index.members)}\n")
        for sample_id in sorted(index.members):
            ids = ",".join(str(m) for m in index.members[sample_id])
            fh.write(f"{sample_id}\t{ids}\n")


def load_index(path) -> MultimodalGTIndex:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != INDEX_MAGIC:
            raise ValueError(f"index version mismatch, expected {INDEX_MAGIC!r}")
        tau = float(header[1].split("=", 1)[1])
        members = {}
        for line in fh:
            if not line.strip():
                continue
            sid, ids = line.rstrip("\n").split("\t")
            members[int(sid)] = tuple(int(v) for v in ids.split(",") if v)
    return MultimodalGTIndex(tau=tau, members=members)
