"""Skeleton topology, cartesian/spherical link coordinates, motion transfer.

Every pose is a (J, 3) array of joint positions in meters. Links are
parent->child segments; each non-root joint is expressed in spherical
coordinates (rho, theta, phi) relative to its parent, which lets us swap
link lengths between skeletons while keeping the motion (the angles).

Conventions: theta is the polar angle from +z, phi = atan2(y, x) in
(-pi, pi]. Zero-length links map to (0, 0, 0); phi at the poles is 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROOT = -1


class TopologyError(ValueError):
    """Skeleton/pose structure mismatch."""


@dataclass(frozen=True)
class SkeletonTopology:
    """Tree of joints; parents[j] is the parent index, ROOT for the pelvis."""

    parents: tuple[int, ...]
    joint_names: tuple[str, ...]

    def __post_init__(self):
        j = len(self.parents)
        if j == 0:
            raise TopologyError("empty topology")
        if len(self.joint_names) != j:
            raise TopologyError("joint_names length does not match parents")
        roots = [i for i, p in enumerate(self.parents) if p == ROOT]
        if len(roots) != 1:
            raise TopologyError(f"expected exactly one root joint, got {len(roots)}")
        for i, p in enumerate(self.parents):
            if p == ROOT:
                continue
            if not (0 <= p < j) or p == i:
                raise TopologyError(f"joint {i} has invalid parent {p}")
        # cycle check: walking up from any joint must reach the root
        for i in range(j):
            seen = set()
            k = i
            while self.parents[k] != ROOT:
                if k in seen:
                    raise TopologyError(f"cycle through joint {i}")
                seen.add(k)
                k = self.parents[k]

    @property
    def joint_count(self) -> int:
        return len(self.parents)

    @property
    def root(self) -> int:
        return self.parents.index(ROOT)

    def topological_order(self) -> list[int]:
        """Joint indices ordered so parents always precede children."""
        order = [self.root]
        remaining = set(range(self.joint_count)) - {self.root}
        placed = {self.root}
        while remaining:
            progressed = [i for i in remaining if self.parents[i] in placed]
            order.extend(sorted(progressed))
            placed.update(progressed)
            remaining -= set(progressed)
        return order


@dataclass
class PoseSequence:
    """Timed series of (J, 3) poses; frames has shape (T, J, 3), meters."""

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise ValueError(f"frames must be (T, J, 3), got {self.frames.shape}")
        if self.frames.shape[0] == 0:
            raise ValueError("empty pose sequence")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def joint_count(self) -> int:
        return self.frames.shape[1]


@dataclass
class SphericalMotion:
    """Per-frame link coordinates: rho/theta/phi are (T, J); root column is zero.

    root_positions (T, 3) carries the root verbatim so the cartesian
    reconstruction is exact.
    """

    rho: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    root_positions: np.ndarray
    fps: float = field(default=25.0)


def _check_topology(seq: PoseSequence, topo: SkeletonTopology):
    if seq.joint_count != topo.joint_count:
        raise TopologyError(
            f"sequence has {seq.joint_count} joints, topology {topo.joint_count}"
        )


def offsets_to_spherical(d: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convert (..., 3) parent->child offsets to (rho, theta, phi) arrays.

    Degenerate cases are total: rho=0 links give theta=phi=0, and phi is 0
    on the polar axis. phi is normalized to (-pi, pi].
    """
    d = np.asarray(d, dtype=np.float64)
    rho = np.linalg.norm(d, axis=-1)
    safe = np.where(rho > 0.0, rho, 1.0)
    cos_theta = np.clip(d[..., 2] / safe, -1.0, 1.0)
    theta = np.where(rho > 0.0, np.arccos(cos_theta), 0.0)
    phi = np.arctan2(d[..., 1], d[..., 0])
    # deterministic angles for degenerate links and polar-axis links
    on_pole = (np.sin(theta) * rho) < 1e-15
    phi = np.where(on_pole, 0.0, phi)
    phi = np.where(phi <= -np.pi, np.pi, phi)
    return rho, theta, phi


def spherical_to_offsets(rho: np.ndarray, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Inverse of offsets_to_spherical; returns (..., 3) offsets."""
    sin_t = np.sin(theta)
    return np.stack(
        [rho * sin_t * np.cos(phi), rho * sin_t * np.sin(phi), rho * np.cos(theta)],
        axis=-1,
    )


def cartesian_to_spherical(seq: PoseSequence, topo: SkeletonTopology) -> SphericalMotion:
    """Express every link of every frame in spherical coordinates."""
    _check_topology(seq, topo)
    if not np.all(np.isfinite(seq.frames)):
        raise ValueError("non-finite coordinates in pose sequence")
    frames = seq.frames
    parents = np.asarray([p if p != ROOT else 0 for p in topo.parents])
    d = frames - frames[:, parents, :]
    rho, theta, phi = offsets_to_spherical(d)
    root = topo.root
    rho[:, root] = 0.0
    theta[:, root] = 0.0
    phi[:, root] = 0.0
    return SphericalMotion(
        rho=rho,
        theta=theta,
        phi=phi,
        root_positions=frames[:, root, :].copy(),
        fps=seq.fps,
    )


def spherical_to_cartesian(sph: SphericalMotion, topo: SkeletonTopology) -> PoseSequence:
    """Reconstruct joint positions root-outward along the topology tree."""
    if sph.rho.shape[1] != topo.joint_count:
        raise TopologyError(
            f"spherical motion has {sph.rho.shape[1]} joints, topology {topo.joint_count}"
        )
    t = sph.rho.shape[0]
    offsets = spherical_to_offsets(sph.rho, sph.theta, sph.phi)
    frames = np.zeros((t, topo.joint_count, 3))
    frames[:, topo.root, :] = sph.root_positions
    for j in topo.topological_order():
        if topo.parents[j] == ROOT:
            continue
        frames[:, j, :] = frames[:, topo.parents[j], :] + offsets[:, j, :]
    return PoseSequence(frames=frames, fps=sph.fps)


def motion_transfer(
    x: PoseSequence, y: PoseSequence, topo: SkeletonTopology
) -> PoseSequence:
    """Replay y's motion (angles) on x's skeleton (last-frame link lengths).

    The output has y's frame count and root trajectory; every link keeps
    y's per-frame angles but x's final-frame length.
    """
    _check_topology(x, topo)
    _check_topology(y, topo)
    reference = PoseSequence(frames=x.frames[-1:], fps=x.fps)
    ref_sph = cartesian_to_spherical(reference, topo)
    y_sph = cartesian_to_spherical(y, topo)
    rho = np.repeat(ref_sph.rho, y.frame_count, axis=0)
    return spherical_to_cartesian(
        SphericalMotion(
            rho=rho,
            theta=y_sph.theta,
            phi=y_sph.phi,
            root_positions=y_sph.root_positions,
            fps=y.fps,
        ),
        topo,
    )


def zero_center(seq: PoseSequence, topo: SkeletonTopology) -> PoseSequence:
    """Translate every frame so the root joint sits at the origin."""
    _check_topology(seq, topo)
    centered = seq.frames - seq.frames[:, topo.root : topo.root + 1, :]
    return PoseSequence(frames=centered, fps=seq.fps)
