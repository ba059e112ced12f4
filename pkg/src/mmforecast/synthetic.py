"""Procedural motion corpus generator.

Sequences are built on a 17-joint humanoid. Every sequence starts with a
shared idle prefix (identical sway program across all families, so samples
windowed at the sequence start share their observation by construction and
are genuinely multimodal), followed by one of up to five parameterized
motion programs: walk, arm_raise, turn, sit, sway. Per-sequence parameter
jitter, per-frame angle noise, and a random actor scale give within-family
variety; generation is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusSequence, MotionCorpus
from .kinematics import ROOT, PoseSequence, SkeletonTopology

HUMANOID_17 = SkeletonTopology(
    parents=(ROOT, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15),
    joint_names=(
        "pelvis", "spine", "chest", "neck", "head",
        "l_shoulder", "l_elbow", "l_wrist",
        "r_shoulder", "r_elbow", "r_wrist",
        "l_hip", "l_knee", "l_ankle",
        "r_hip", "r_knee", "r_ankle",
    ),
)

# base link offsets (parent -> joint), meters, for a ~1.7 m standing figure;
# x: left, y: forward, z: up
_BASE_OFFSETS = np.array([
    [0.00, 0.00, 0.00],    # pelvis (root)
    [0.00, 0.00, 0.22],    # spine
    [0.00, 0.00, 0.26],    # chest
    [0.00, 0.00, 0.10],    # neck
    [0.00, 0.00, 0.15],    # head
    [0.20, 0.00, -0.02],   # l_shoulder
    [0.05, 0.00, -0.28],   # l_elbow
    [0.02, 0.00, -0.26],   # l_wrist
    [-0.20, 0.00, -0.02],  # r_shoulder
    [-0.05, 0.00, -0.28],  # r_elbow
    [-0.02, 0.00, -0.26],  # r_wrist
    [0.11, 0.00, -0.06],   # l_hip
    [0.00, 0.00, -0.42],   # l_knee
    [0.00, 0.00, -0.44],   # l_ankle
    [-0.11, 0.00, -0.06],  # r_hip
    [0.00, 0.00, -0.42],   # r_knee
    [0.00, 0.00, -0.44],   # r_ankle
])

FAMILY_NAMES = ("walk", "arm_raise", "turn", "sit", "sway")

_SPINE = [1, 2, 3, 4]
_L_ARM, _R_ARM = [6, 7], [9, 10]
_L_LEG, _R_LEG = [12, 13], [15, 16]


@dataclass
class GeneratorConfig:
    joint_count: int = 17
    fps: float = 25.0
    families: int = 5
    sequences_per_family: tuple[int, ...] = (12, 10, 8, 6, 4)
    frames_per_sequence: int = 164
    prefix_frames: int = 25
    actor_scale_range: tuple[float, float] = (0.85, 1.15)
    noise_level: float = 0.01  # per-frame angle jitter, radians

    def validate(self):
        if self.families < 2:
            raise ValueError("need at least 2 motion families")
        if self.families > len(FAMILY_NAMES):
            raise ValueError(f"at most {len(FAMILY_NAMES)} motion families available")
        if self.joint_count != 17:
            raise ValueError("generator is defined for the 17-joint humanoid")
        if self.fps <= 0 or self.frames_per_sequence <= 0:
            raise ValueError("fps and frames_per_sequence must be positive")
        if self.prefix_frames < 3 or self.prefix_frames >= self.frames_per_sequence:
            raise ValueError("prefix_frames must be in [3, frames_per_sequence)")
        lo, hi = self.actor_scale_range
        if not (0 < lo <= hi):
            raise ValueError("invalid actor_scale_range")

    def family_counts(self) -> list[int]:
        counts = list(self.sequences_per_family)
        if len(counts) == 1:
            counts = counts * self.families
        if len(counts) < self.families:
            raise ValueError("sequences_per_family shorter than family count")
        return counts[: self.families]


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(a), np.ones_like(a)
    return np.stack([
        np.stack([one, zero, zero], -1),
        np.stack([zero, c, -s], -1),
        np.stack([zero, s, c], -1),
    ], -2)


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(a), np.ones_like(a)
    return np.stack([
        np.stack([c, -s, zero], -1),
        np.stack([s, c, zero], -1),
        np.stack([zero, zero, one], -1),
    ], -2)


def _envelope(t: np.ndarray, ramp: float = 0.4) -> np.ndarray:
    return np.clip(t / ramp, 0.0, 1.0)


def _family_angles(name: str, t: np.ndarray, p: dict) -> dict[int, np.ndarray]:
    """Per-joint rotation angles over time; keys are joint indices.

    Values are (T, 2) arrays of (x-rotation, z-rotation) applied to the
    joint's base link offset.
    """
    T = t.shape[0]
    env = _envelope(t)
    out: dict[int, np.ndarray] = {}

    def put(joints, ax, az):
        for j in joints:
            cur = out.setdefault(j, np.zeros((T, 2)))
            cur[:, 0] += ax
            cur[:, 1] += az

    if name == "walk":
        swing = p["amp"] * env * np.sin(2 * np.pi * p["freq"] * t)
        put([12], swing, 0.0)            # left thigh
        put([15], -swing, 0.0)           # right thigh
        put([13], 0.6 * np.abs(swing), 0.0)   # left shin trails
        put([16], 0.6 * np.abs(-swing), 0.0)  # right shin trails
        put([6, 7], -0.5 * swing, 0.0)   # arms counter-swing
        put([9, 10], 0.5 * swing, 0.0)
    elif name == "arm_raise":
        lift = p["amp"] * env * np.minimum(t / p["duration"], 1.0)
        put([6, 7], -lift, 0.0)          # both arms rotate up-forward
        put([9, 10], -lift, 0.0)
        put(_SPINE, -0.08 * lift, 0.0)
    elif name == "turn":
        yaw = p["amp"] * env * np.minimum(t / p["duration"], 1.0)
        put(range(1, 17), 0.0, yaw)
        put([4], 0.0, 0.4 * yaw)         # head leads the turn
    elif name == "sit":
        fold = env * np.minimum(t / p["duration"], 1.0)
        put([12, 15], p["amp"] * fold, 0.0)       # thighs up
        put([13, 16], -p["knee"] * fold, 0.0)     # shins back
        put(_SPINE, 0.3 * p["amp"] * fold, 0.0)   # lean forward
    elif name == "sway":
        wave = p["amp"] * env * np.sin(2 * np.pi * p["freq"] * t)
        put(_SPINE, wave, 0.0)
        put([6, 7, 9, 10], 0.5 * wave, 0.0)
    else:
        raise ValueError(f"unknown motion family {name!r}")
    return out


def _family_params(name: str, rng: np.random.Generator) -> dict:
    jitter = lambda base, rel: base * (1.0 + rng.uniform(-rel, rel))
    if name == "walk":
        return {"amp": jitter(0.55, 0.15), "freq": jitter(1.2, 0.1)}
    if name == "arm_raise":
        return {"amp": jitter(1.9, 0.12), "duration": jitter(1.6, 0.1)}
    if name == "turn":
        return {"amp": jitter(1.5, 0.15), "duration": jitter(1.8, 0.1)}
    if name == "sit":
        return {"amp": jitter(1.3, 0.1), "knee": jitter(1.2, 0.1),
                "duration": jitter(1.5, 0.1)}
    return {"amp": jitter(0.06, 0.2), "freq": jitter(0.5, 0.1)}


_PREFIX_SWAY = {"amp": 0.03, "freq": 0.5}


def _generate_sequence(
    family: str, config: GeneratorConfig, rng: np.random.Generator, scale: float
) -> PoseSequence:
    total = config.frames_per_sequence
    fps = config.fps
    frames_t = np.arange(total) / fps
    prefix_t = config.prefix_frames / fps

    # shared idle prefix: fixed-phase sway for every family, every sequence
    sway = _PREFIX_SWAY["amp"] * np.sin(2 * np.pi * _PREFIX_SWAY["freq"] * frames_t)
    angles = np.zeros((total, 17, 2))
    for j in _SPINE:
        angles[:, j, 0] += sway

    # family motion starts after the prefix
    action_t = np.maximum(frames_t - prefix_t, 0.0)
    active = frames_t >= prefix_t
    params = _family_params(family, rng)
    for j, a in _family_angles(family, action_t, params).items():
        angles[active, j, :] += a[active]

    angles += rng.normal(scale=config.noise_level, size=angles.shape)

    offsets = scale * _BASE_OFFSETS[None, :, :].repeat(total, axis=0)
    rot = _rot_z(angles[..., 1]) @ _rot_x(angles[..., 0])
    offsets = np.einsum("tjab,tjb->tja", rot, offsets)

    frames = np.zeros((total, 17, 3))
    frames[:, 0, 2] = 0.95 * scale  # pelvis height; removed by zero-centering
    if family == "walk":
        frames[:, 0, 1] += 0.3 * np.maximum(frames_t - prefix_t, 0.0)
    for j in HUMANOID_17.topological_order():
        if HUMANOID_17.parents[j] == ROOT:
            continue
        frames[:, j, :] = frames[:, HUMANOID_17.parents[j], :] + offsets[:, j, :]
    return PoseSequence(frames=frames, fps=fps)


def generate_synthetic_corpus(config: GeneratorConfig, seed: int) -> MotionCorpus:
    """Build a deterministic corpus of parameterized motion families."""
    config.validate()
    lo, hi = config.actor_scale_range
    sequences = []
    for fi, count in enumerate(config.family_counts()):
        family = FAMILY_NAMES[fi]
        for si in range(count):
            rng = np.random.default_rng([seed, fi, si])
            scale = float(rng.uniform(lo, hi))
            seq = _generate_sequence(family, config, rng, scale)
            sequences.append(
                CorpusSequence(sequence=seq, action_label=family, actor_scale=scale)
            )
    return MotionCorpus(topology=HUMANOID_17, sequences=sequences)
