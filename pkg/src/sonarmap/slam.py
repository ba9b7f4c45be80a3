"""Keyframe pose-graph back-end for planar vehicle motion.

Dead reckoning drives pose prediction between keyframes; scan matching of the
horizontal sonar's planar detections supplies sequential and loop-closing
constraints; a pairwise-consistency filter rejects bad loop closures; batch
nonlinear least squares re-estimates all keyframe poses.  Depth, roll, and
pitch are measured directly, so optimization runs over (x, y, yaw) only and
full 6-DoF poses are recovered by composing the planar estimate with the
measured values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud, Pose2, Pose3, wrap_angle

FACTOR_KINDS = ("prior", "odometry", "ssm", "nssm")


def information_matrix(sigma_xy: float, sigma_yaw: float) -> np.ndarray:
    """Diagonal information for a planar relative-pose measurement."""
    if sigma_xy <= 0 or sigma_yaw <= 0:
        raise ValueError("sigmas must be positive")
    return np.diag([sigma_xy**-2, sigma_xy**-2, sigma_yaw**-2])


@dataclass
class Keyframe:
    """A pose node: dead-reckoning pose at creation, current planar estimate,
    and the sensor data captured at that instant (clouds in body frame)."""

    id: int
    dr_pose: Pose2
    estimate: Pose2
    planar_cloud: PointCloud
    fused_cloud: PointCloud
    depth: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    time: float = 0.0
    submap: object | None = None
    augmented_cloud: PointCloud | None = None

    def __post_init__(self):
        if self.id < 0:
            raise ValueError("keyframe id must be non-negative")
        if self.planar_cloud.frame != "body":
            raise ValueError("planar_cloud must be in the body frame at capture")
        if len(self.planar_cloud) and np.max(np.abs(self.planar_cloud.points[:, 2])) > 1e-9:
            raise ValueError("planar_cloud must have z = 0")
        if self.augmented_cloud is not None and self.augmented_cloud.frame != "body":
            raise ValueError("augmented_cloud must be in the body frame at capture")


@dataclass(frozen=True, eq=False)
class Factor:
    """A measurement tying one keyframe (prior) or two keyframes together.

    ``relative_pose`` is the measured pose of ``j`` in ``i``'s frame (for the
    prior, the pinned absolute pose of ``i``).  ``information`` is the 3x3
    measurement information; loop-closure (nssm) endpoints must be
    non-adjacent keyframes.
    """

    kind: str
    i: int
    j: int | None
    relative_pose: Pose2
    information: np.ndarray

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.kind == "prior":
            if self.j is not None:
                raise ValueError("prior factors are unary")
        else:
            if self.j is None or self.j == self.i:
                raise ValueError("binary factors need two distinct endpoints")
            if self.kind == "nssm" and abs(self.i - self.j) < 2:
                raise ValueError("loop-closure endpoints must be non-adjacent")
        info = np.asarray(self.information, dtype=float)
        if info.shape != (3, 3) or not np.allclose(info, info.T, atol=1e-9):
            raise ValueError("information must be 3x3 symmetric")
        if np.min(np.linalg.eigvalsh(info)) <= 0:
            raise ValueError("information must be positive definite")
        object.__setattr__(self, "information", info)


@dataclass(frozen=True)
class OptimizeStats:
    converged: bool
    iterations: int
    initial_cost: float
    final_cost: float


class PoseGraph:
    """Keyframes plus factors; owns the current estimates."""

    def __init__(self):
        self.keyframes: dict[int, Keyframe] = {}
        self.factors: list[Factor] = []
        self.last_stats: OptimizeStats | None = None

    def add_keyframe(self, kf: Keyframe) -> None:
        if kf.id != len(self.keyframes):
            raise ValueError("keyframe ids must be assigned sequentially from 0")
        self.keyframes[kf.id] = kf

    def add_factor(self, factor: Factor) -> None:
        if factor.i not in self.keyframes:
            raise ValueError(f"factor endpoint {factor.i} is not a keyframe")
        if factor.j is not None and factor.j not in self.keyframes:
            raise ValueError(f"factor endpoint {factor.j} is not a keyframe")
        self.factors.append(factor)

    def __len__(self) -> int:
        return len(self.keyframes)


def should_create_keyframe(
    current_dr: Pose2, last_kf_dr: Pose2, d_thresh: float, r_thresh: float
) -> bool:
    """True when motion since the last keyframe reaches either threshold
    (boundary inclusive)."""
    if d_thresh <= 0 or r_thresh <= 0:
        raise ValueError("thresholds must be positive")
    d = math.hypot(current_dr.x - last_kf_dr.x, current_dr.y - last_kf_dr.y)
    r = abs(wrap_angle(current_dr.yaw - last_kf_dr.yaw))
    return d >= d_thresh or r >= r_thresh


# ---------------------------------------------------------------------------
# ICP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IcpParams:
    max_correspondence: float = 1.0
    max_iterations: int = 50
    tolerance: float = 1e-6
    fitness_min: float = 0.5

    def __post_init__(self):
        if self.max_correspondence <= 0 or self.max_iterations < 1 or self.tolerance <= 0:
            raise ValueError("invalid ICP parameters")
        if not 0.0 <= self.fitness_min <= 1.0:
            raise ValueError("fitness_min must be in [0, 1]")


@dataclass(frozen=True)
class IcpResult:
    transform: Pose2
    fitness: float
    status: str  # "ok" | "failed"
    iterations: int = 0


def _fit_rigid(src: np.ndarray, dst: np.ndarray) -> Pose2:
    """Least-squares rigid transform mapping src points onto dst points."""
    ca = src.mean(axis=0)
    cb = dst.mean(axis=0)
    h = (src - ca).T @ (dst - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, d]) @ u.T
    yaw = math.atan2(rot[1, 0], rot[0, 0])
    t = cb - rot @ ca
    return Pose2(float(t[0]), float(t[1]), yaw)


def _require_planar(cloud: PointCloud, name: str) -> np.ndarray:
    if len(cloud) and np.max(np.abs(cloud.points[:, 2])) > 1e-9:
        raise ValueError(f"{name} cloud must be planar (z = 0)")
    return cloud.points[:, :2]


def icp_2d(
    source: PointCloud, target: PointCloud, initial: Pose2, params: IcpParams = IcpParams()
) -> IcpResult:
    """Point-to-point planar ICP of ``source`` onto ``target``.

    Returns the pose mapping source coordinates into the target frame, the
    inlier fraction of source points (within ``max_correspondence`` at the
    final pose), and a status that is "failed" when the fitness falls below
    ``fitness_min`` or a usable alignment never forms.
    """
    src = _require_planar(source, "source")
    tgt = _require_planar(target, "target")
    if len(src) < 3 or len(tgt) < 3:
        return IcpResult(initial, 0.0, "failed", 0)

    tree = cKDTree(tgt)
    pose = initial
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        moved = pose.transform(src)
        dist, idx = tree.query(moved, distance_upper_bound=params.max_correspondence)
        inlier = np.isfinite(dist)
        if int(inlier.sum()) < 3:
            return IcpResult(pose, float(inlier.sum()) / len(src), "failed", iterations)
        new_pose = _fit_rigid(src[inlier], tgt[idx[inlier]])
        step = pose.inverse().compose(new_pose)
        delta = math.hypot(step.x, step.y) + abs(wrap_angle(step.yaw))
        pose = new_pose
        if delta < params.tolerance:
            break

    moved = pose.transform(src)
    dist, _ = tree.query(moved, distance_upper_bound=params.max_correspondence)
    fitness = float(np.isfinite(dist).sum()) / len(src)
    finite = all(np.isfinite(v) for v in (pose.x, pose.y, pose.yaw))
    status = "ok" if finite and fitness >= params.fitness_min else "failed"
    return IcpResult(pose, fitness, status, iterations)


# ---------------------------------------------------------------------------
# loop-closure proposal
# ---------------------------------------------------------------------------


def propose_nssm(
    graph: PoseGraph,
    current: Keyframe,
    exclusion: int = 10,
    search_radius: float = 10.0,
    icp_params: IcpParams = IcpParams(),
    sigma_xy: float = 0.1,
    sigma_yaw: float = 0.02,
) -> list[Factor]:
    """Propose a loop closure by matching the current keyframe's planar cloud
    against the aggregated clouds of old keyframes near the current estimate.

    Keyframes newer than ``current.id - exclusion - 1`` never participate, so
    a proposal always ties non-adjacent keyframes.  The factor is anchored to
    the nearest participating keyframe.  Returns [] when the graph is still
    short, nothing is in range, or ICP fails.
    """
    if len(graph) <= exclusion:
        return []
    eligible = [
        kf
        for kf_id, kf in sorted(graph.keyframes.items())
        if kf_id < current.id - exclusion
    ]
    cur = current.estimate
    in_range = [
        kf
        for kf in eligible
        if math.hypot(kf.estimate.x - cur.x, kf.estimate.y - cur.y) <= search_radius
    ]
    if not in_range:
        return []

    pieces = [
        kf.estimate.transform(kf.planar_cloud.points[:, :2])
        for kf in in_range
        if len(kf.planar_cloud)
    ]
    if not pieces:
        return []
    world_xy = np.vstack(pieces)
    target = PointCloud(
        points=np.column_stack([world_xy, np.zeros(len(world_xy))]), frame="world"
    )
    result = icp_2d(current.planar_cloud, target, cur, icp_params)
    if result.status != "ok":
        return []

    anchor = min(
        in_range,
        key=lambda kf: (math.hypot(kf.estimate.x - cur.x, kf.estimate.y - cur.y), kf.id),
    )
    if current.id - anchor.id < 2:
        return []
    relative = anchor.estimate.inverse().compose(result.transform)
    return [
        Factor(
            kind="nssm",
            i=anchor.id,
            j=current.id,
            relative_pose=relative,
            information=information_matrix(sigma_xy, sigma_yaw),
        )
    ]


# ---------------------------------------------------------------------------
# pairwise consistency filtering
# ---------------------------------------------------------------------------


def _cycle_consistent(estimates, a: Factor, b: Factor, thresh: float) -> bool:
    """Mahalanobis test of the discrepancy between measurement ``a`` and its
    prediction through measurement ``b`` plus the current estimates."""
    predicted = (
        estimates[a.i]
        .inverse()
        .compose(estimates[b.i])
        .compose(b.relative_pose)
        .compose(estimates[b.j].inverse().compose(estimates[a.j]))
    )
    err = a.relative_pose.inverse().compose(predicted)
    e = np.array([err.x, err.y, wrap_angle(err.yaw)])
    cov = np.linalg.inv(a.information) + np.linalg.inv(b.information)
    return float(e @ np.linalg.solve(cov, e)) < thresh


def _max_clique(adjacency: list[set[int]]) -> set[int]:
    """Exact maximum clique (Bron-Kerbosch with pivoting)."""
    best: set[int] = set()

    def expand(r: set[int], p: set[int], x: set[int]):
        nonlocal best
        if not p and not x:
            if len(r) > len(best):
                best = set(r)
            return
        if len(r) + len(p) <= len(best):
            return
        pivot = max(p | x, key=lambda v: len(adjacency[v] & p))
        for v in sorted(p - adjacency[pivot]):
            expand(r | {v}, p & adjacency[v], x & adjacency[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(range(len(adjacency))), set())
    return best


def pcm_filter(
    candidates: list[Factor], graph: PoseGraph, mahalanobis_thresh: float = 11.34
) -> list[Factor]:
    """Keep the largest mutually consistent subset of candidate loop closures.

    Two closures are consistent when the cycle formed with the current
    estimates has Mahalanobis norm below ``mahalanobis_thresh``; the maximum
    clique of the consistency graph is found exactly.
    """
    if not candidates:
        return []
    for f in candidates:
        if f.i not in graph.keyframes or f.j not in graph.keyframes:
            raise ValueError("candidate references a keyframe not in the graph")
    estimates = {k: kf.estimate for k, kf in graph.keyframes.items()}
    n = len(candidates)
    adjacency = [set() for _ in range(n)]
    for p in range(n):
        for q in range(p + 1, n):
            if _cycle_consistent(estimates, candidates[p], candidates[q], mahalanobis_thresh):
                adjacency[p].add(q)
                adjacency[q].add(p)
    clique = _max_clique(adjacency)
    return [candidates[k] for k in sorted(clique)]


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------


def _pose_error_and_jacobians(xi, xj, z: Pose2):
    """Residual of one relative-pose factor and its Jacobians.

    Residual: the measured pose of j in i's frame, removed from the predicted
    one, expressed in the measurement frame; yaw wrapped.
    """
    ci, si = math.cos(xi[2]), math.sin(xi[2])
    cz, sz = math.cos(z.yaw), math.sin(z.yaw)
    ri_t = np.array([[ci, si], [-si, ci]])
    rz_t = np.array([[cz, sz], [-sz, cz]])
    dt_world = np.array([xj[0] - xi[0], xj[1] - xi[1]])
    delta_t = ri_t @ dt_world
    e_t = rz_t @ (delta_t - np.array([z.x, z.y]))
    e_theta = wrap_angle(xj[2] - xi[2] - z.yaw)
    e = np.array([e_t[0], e_t[1], e_theta])

    d_ri_t = np.array([[-si, ci], [-ci, -si]])
    ji = np.zeros((3, 3))
    ji[:2, :2] = -rz_t @ ri_t
    ji[:2, 2] = rz_t @ (d_ri_t @ dt_world)
    ji[2, 2] = -1.0
    jj = np.zeros((3, 3))
    jj[:2, :2] = rz_t @ ri_t
    jj[2, 2] = 1.0
    return e, ji, jj


def _graph_cost(poses, factors) -> float:
    cost = 0.0
    for f in factors:
        if f.kind == "prior":
            continue
        e, _, _ = _pose_error_and_jacobians(poses[f.i], poses[f.j], f.relative_pose)
        cost += float(e @ f.information @ e)
    return cost


def optimize(graph: PoseGraph, max_iterations: int = 100, tolerance: float = 1e-9) -> OptimizeStats:
    """Batch re-estimation of all keyframe poses.

    Gauss-Newton on the weighted relative-pose residuals, with a Levenberg
    damping fallback whenever a step fails to decrease the cost.  The prior
    keyframe is pinned at the prior pose (removed from the variables), which
    fixes the gauge.  Converged when the cost decrease falls below
    ``tolerance``; on damping breakdown the last iterate is kept and the
    stats report non-convergence.
    """
    priors = [f for f in graph.factors if f.kind == "prior"]
    if len(priors) != 1:
        raise ValueError("optimize requires exactly one prior factor")
    prior = priors[0]
    _require_connected(graph, prior.i)

    ids = sorted(graph.keyframes)
    poses = {}
    for k in ids:
        e = graph.keyframes[k].estimate
        poses[k] = np.array([e.x, e.y, e.yaw])
    poses[prior.i] = np.array([prior.relative_pose.x, prior.relative_pose.y, prior.relative_pose.yaw])

    free = [k for k in ids if k != prior.i]
    slot = {k: 3 * s for s, k in enumerate(free)}
    n_var = 3 * len(free)

    def write_back():
        for k in ids:
            x, y, yaw = poses[k]
            graph.keyframes[k].estimate = Pose2(float(x), float(y), wrap_angle(float(yaw)))

    cost = _graph_cost(poses, graph.factors)
    initial_cost = cost
    if n_var == 0:
        write_back()
        stats = OptimizeStats(True, 0, initial_cost, cost)
        graph.last_stats = stats
        return stats

    converged = False
    lam = 0.0
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        h = np.zeros((n_var, n_var))
        b = np.zeros(n_var)
        for f in graph.factors:
            if f.kind == "prior":
                continue
            e, ji, jj = _pose_error_and_jacobians(poses[f.i], poses[f.j], f.relative_pose)
            blocks = []
            if f.i in slot:
                blocks.append((slot[f.i], ji))
            if f.j in slot:
                blocks.append((slot[f.j], jj))
            for sa, ja in blocks:
                b[sa : sa + 3] += ja.T @ f.information @ e
                for sb, jb in blocks:
                    h[sa : sa + 3, sb : sb + 3] += ja.T @ f.information @ jb

        accepted = False
        while not accepted:
            damped = h + lam * np.diag(np.diag(h)) if lam > 0 else h
            try:
                delta = np.linalg.solve(damped, -b)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                trial = {k: v.copy() for k, v in poses.items()}
                for k in free:
                    s = slot[k]
                    trial[k][0] += delta[s]
                    trial[k][1] += delta[s + 1]
                    trial[k][2] = wrap_angle(trial[k][2] + delta[s + 2])
                new_cost = _graph_cost(trial, graph.factors)
                if new_cost <= cost + 1e-15:
                    poses = trial
                    lam = lam * 0.3 if lam > 1e-9 else 0.0
                    accepted = True
                    break
            lam = max(lam * 10.0, 1e-6)
            if lam > 1e10:
                write_back()
                stats = OptimizeStats(False, iterations, initial_cost, cost)
                graph.last_stats = stats
                return stats

        decrease = cost - new_cost
        cost = new_cost
        if decrease < tolerance:
            converged = True
            break

    write_back()
    stats = OptimizeStats(converged, iterations, initial_cost, cost)
    graph.last_stats = stats
    return stats


def _require_connected(graph: PoseGraph, root: int) -> None:
    parent = {k: k for k in graph.keyframes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for f in graph.factors:
        if f.j is None:
            continue
        ra, rb = find(f.i), find(f.j)
        if ra != rb:
            parent[ra] = rb
    anchor = find(root)
    for k in graph.keyframes:
        if find(k) != anchor:
            raise ValueError(f"pose graph is disconnected: keyframe {k} unreachable from the prior")


# ---------------------------------------------------------------------------
# lifting and export
# ---------------------------------------------------------------------------


def lift_to_6dof(kf: Keyframe) -> Pose3:
    """Compose the planar estimate with the directly measured depth, roll,
    and pitch."""
    return Pose3.from_planar(kf.estimate, depth=kf.depth, roll=kf.roll, pitch=kf.pitch)


def export_trajectory(graph: PoseGraph, path) -> None:
    """Write one CSV row per keyframe: time, id, planar estimate, and the
    directly measured depth/roll/pitch."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "kf_id", "x", "y", "yaw", "depth", "roll", "pitch"])
        for k in sorted(graph.keyframes):
            kf = graph.keyframes[k]
            e = kf.estimate
            writer.writerow(
                [
                    repr(float(kf.time)),
                    kf.id,
                    repr(float(e.x)),
                    repr(float(e.y)),
                    repr(float(e.yaw)),
                    repr(float(kf.depth)),
                    repr(float(kf.roll)),
                    repr(float(kf.pitch)),
                ]
            )
