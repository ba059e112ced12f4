"""Motion corpus container and its line-delimited on-disk format.

A corpus file (.mmcorpus) is plain text: one header line naming the format
version, frame rate, and skeleton, then one line per sequence carrying the
action label, actor scale, and the flattened frames at fixed 6-decimal
precision. The format is diffable and streamable; load(save(c)) is exact
for the on-disk precision.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .kinematics import ROOT, PoseSequence, SkeletonTopology

MAGIC = "#mmcorpus v1"


class CorpusFormatError(ValueError):
    """Corpus file is malformed or has an unsupported version."""


@dataclass
class CorpusSequence:
    sequence: PoseSequence
    action_label: str
    actor_scale: float


@dataclass
class MotionCorpus:
    topology: SkeletonTopology
    sequences: list[CorpusSequence]

    def __post_init__(self):
        for entry in self.sequences:
            if entry.sequence.joint_count != self.topology.joint_count:
                raise ValueError("sequence joint count does not match corpus topology")
            if entry.actor_scale <= 0:
                raise ValueError("actor_scale must be positive")

    @property
    def fps(self) -> float:
        return self.sequences[0].sequence.fps if self.sequences else 25.0

    @property
    def action_labels(self) -> list[str]:
        return sorted({s.action_label for s in self.sequences})


def _format_floats(values: np.ndarray) -> str:
    return " ".join(f"{v:.6f}" for v in values.ravel())


def dump_corpus(corpus: MotionCorpus) -> str:
    topo = corpus.topology
    out = io.StringIO()
    out.write(
        f"{MAGIC}\tfps={corpus.fps!r}\tjoints={topo.joint_count}"
        f"\tparents={','.join(str(p) for p in topo.parents)}"
        f"\tnames={','.join(topo.joint_names)}\n"
    )
    for entry in corpus.sequences:
        seq = entry.sequence
        out.write(
            f"seq\t{entry.action_label}\t{entry.actor_scale:.6f}"
            f"\t{seq.frame_count}\t{_format_floats(seq.frames)}\n"
        )
    return out.getvalue()


def save_corpus(corpus: MotionCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_corpus(corpus))


def _parse_header(line: str) -> tuple[float, SkeletonTopology]:
    fields = line.rstrip("\n").split("\t")
    if fields[0] != MAGIC:
        raise CorpusFormatError(
            f"line 1: version mismatch, expected {MAGIC!r}, got {fields[0]!r}"
        )
    kv = {}
    for token in fields[1:]:
        if "=" not in token:
            raise CorpusFormatError(f"line 1: malformed header field {token!r}")
        key, value = token.split("=", 1)
        kv[key] = value
    try:
        fps = float(kv["fps"])
        joints = int(kv["joints"])
        parents = tuple(int(p) for p in kv["parents"].split(","))
        names = tuple(kv["names"].split(","))
    except (KeyError, ValueError) as exc:
        raise CorpusFormatError(f"line 1: malformed header: {exc}") from exc
    if len(parents) != joints or len(names) != joints:
        raise CorpusFormatError("line 1: header joint count mismatch")
    return fps, SkeletonTopology(parents=parents, joint_names=names)


def load_corpus(path) -> MotionCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise CorpusFormatError("line 1: empty file")
        fps, topo = _parse_header(header)
        sequences = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 5 or fields[0] != "seq":
                raise CorpusFormatError(f"line {lineno}: malformed record")
            label = fields[1]
            try:
                scale = float(fields[2])
                frame_count = int(fields[3])
                values = np.array(fields[4].split(), dtype=np.float64)
            except ValueError as exc:
                raise CorpusFormatError(f"line {lineno}: malformed record: {exc}") from exc
            expected = frame_count * topo.joint_count * 3
            if values.size != expected:
                raise CorpusFormatError(
                    f"line {lineno}: expected {expected} values, got {values.size}"
                )
            frames = values.reshape(frame_count, topo.joint_count, 3)
            sequences.append(
                CorpusSequence(
                    sequence=PoseSequence(frames=frames, fps=fps),
                    action_label=label,
                    actor_scale=scale,
                )
            )
    return MotionCorpus(topology=topo, sequences=sequences)
