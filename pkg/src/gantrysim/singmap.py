"""Generic serial-chain Jacobian engine and workspace discontinuity maps.

Grids the workspace, solves position IK per cell with damped least squares,
and scores each cell by manipulability and condition number of the selected
task rows.  Cells that sit below a manipulability threshold or border
unreachable space are marked as discontinuity boundary: crossing them in task
space demands diverging joint velocities.

The IK and scoring kernels are batched over cells, so whole grids iterate as
numpy array operations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import Pose, rot_x, rot_y, rot_z

TASK_ROW_INDEX = {"x": 0, "y": 1, "z": 2, "wx": 3, "wy": 4, "wz": 5}


class DimensionMismatch(ValueError):
    pass


def _pose_from_xyz_rpy(xyz, rpy) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = np.asarray(xyz, dtype=float)
    m[:3, :3] = rot_z(rpy[2]) @ rot_y(rpy[1]) @ rot_x(rpy[0])
    return m


@dataclass(frozen=True)
class DhLink:
    """Standard Denavit-Hartenberg link: Rz(theta) Tz(d) Tx(a) Rx(alpha).

    The joint variable is theta for revolute links and d for prismatic ones;
    theta_offset / d are the constant parts either way.
    """

    kind: str
    a: float = 0.0
    alpha: float = 0.0
    d: float = 0.0
    theta_offset: float = 0.0
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in ("revolute", "prismatic"):
            raise ValueError("kind must be 'revolute' or 'prismatic'")
        if self.lo > self.hi:
            raise ValueError("limits must satisfy lo <= hi")

    def transform(self, q: float) -> np.ndarray:
        return self.transform_batch(np.array([q]))[0]

    def transform_batch(self, q: np.ndarray) -> np.ndarray:
        """(m, 4, 4) link transforms for a vector of joint values."""
        q = np.asarray(q, dtype=float)
        if self.kind == "revolute":
            theta = q + self.theta_offset
            d = np.full_like(q, self.d)
        else:
            theta = np.full_like(q, self.theta_offset)
            d = self.d + q
        ct, st = np.cos(theta), np.sin(theta)
        ca, sa = math.cos(self.alpha), math.sin(self.alpha)
        t = np.zeros((len(q), 4, 4))
        t[:, 0, 0] = ct
        t[:, 0, 1] = -st * ca
        t[:, 0, 2] = st * sa
        t[:, 0, 3] = self.a * ct
        t[:, 1, 0] = st
        t[:, 1, 1] = ct * ca
        t[:, 1, 2] = -ct * sa
        t[:, 1, 3] = self.a * st
        t[:, 2, 1] = sa
        t[:, 2, 2] = ca
        t[:, 2, 3] = d
        t[:, 3, 3] = 1.0
        return t


@dataclass(frozen=True)
class DhChain:
    links: tuple[DhLink, ...]
    base: np.ndarray = field(default_factory=lambda: np.eye(4))
    tool: np.ndarray = field(default_factory=lambda: np.eye(4))
    name: str = ""

    def __post_init__(self) -> None:
        if not self.links:
            raise ValueError("chain needs at least one link")
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float).reshape(4, 4))
        object.__setattr__(self, "tool", np.asarray(self.tool, dtype=float).reshape(4, 4))

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def joint_lo(self) -> np.ndarray:
        return np.array([l.lo for l in self.links])

    @property
    def joint_hi(self) -> np.ndarray:
        return np.array([l.hi for l in self.links])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_lo, self.joint_hi)

    @classmethod
    def from_dict(cls, obj: dict) -> "DhChain":
        links = tuple(
            DhLink(
                kind=l["kind"],
                a=float(l.get("a", 0.0)),
                alpha=float(l.get("alpha", 0.0)),
                d=float(l.get("d", 0.0)),
                theta_offset=float(l.get("theta_offset", 0.0)),
                lo=float(l.get("limits", [-math.inf, math.inf])[0]),
                hi=float(l.get("limits", [-math.inf, math.inf])[1]),
            )
            for l in obj["links"]
        )
        base = np.eye(4)
        tool = np.eye(4)
        if "base" in obj:
            base = _pose_from_xyz_rpy(
                obj["base"].get("xyz", [0, 0, 0]), obj["base"].get("rpy", [0, 0, 0])
            )
        if "tool" in obj:
            tool = _pose_from_xyz_rpy(
                obj["tool"].get("xyz", [0, 0, 0]), obj["tool"].get("rpy", [0, 0, 0])
            )
        return cls(links=links, base=base, tool=tool, name=obj.get("name", ""))

    @classmethod
    def from_json(cls, path) -> "DhChain":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "links": [
                {
                    "kind": l.kind,
                    "a": l.a,
                    "alpha": l.alpha,
                    "d": l.d,
                    "theta_offset": l.theta_offset,
                    "limits": [l.lo, l.hi],
                }
                for l in self.links
            ],
            "base": self.base.tolist(),
            "tool": self.tool.tolist(),
        }


def load_chain_spec(path) -> tuple[DhChain, list, tuple[str, ...]]:
    """Load a chain JSON file plus its suggested IK seeds and task rows."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    chain = DhChain.from_dict(obj)
    seeds = obj.get("seeds") or [[0.0] * chain.n]
    task_rows = tuple(obj.get("task_rows", ("x", "y", "z")))
    return chain, seeds, task_rows


def _batch_frames(chain: DhChain, q: np.ndarray) -> list[np.ndarray]:
    """World frame after each joint for a batch of configurations.

    q is (m, n); returns n+1 arrays of shape (m, 4, 4), the first being the
    base frame.
    """
    m = q.shape[0]
    frames = [np.broadcast_to(chain.base, (m, 4, 4))]
    t = frames[0]
    for i, link in enumerate(chain.links):
        t = t @ link.transform_batch(q[:, i])
        frames.append(t)
    return frames


def _batch_tool_positions(chain: DhChain, frames) -> np.ndarray:
    return frames[-1][:, :3, :3] @ chain.tool[:3, 3] + frames[-1][:, :3, 3]


def _batch_jacobian(chain: DhChain, frames, translational_only: bool = False) -> np.ndarray:
    """Geometric Jacobian for a batch: (m, 3, n) or (m, 6, n)."""
    m = frames[0].shape[0]
    p_e = _batch_tool_positions(chain, frames)
    rows = 3 if translational_only else 6
    j = np.zeros((m, rows, chain.n))
    for i, link in enumerate(chain.links):
        z = frames[i][:, :3, 2]
        if link.kind == "revolute":
            j[:, :3, i] = np.cross(z, p_e - frames[i][:, :3, 3])
            if not translational_only:
                j[:, 3:, i] = z
        else:
            j[:, :3, i] = z
    return j


def chain_frames(chain: DhChain, q) -> list[np.ndarray]:
    """World frame after each joint: frames[0] is the base, frames[i] follows link i."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n,):
        raise DimensionMismatch(f"expected {chain.n} joint values, got {q.shape}")
    return [f[0] for f in _batch_frames(chain, q[None, :])]


def chain_fk(chain: DhChain, q) -> Pose:
    """Tool pose: product of the standard DH link transforms."""
    t = chain_frames(chain, q)[-1] @ chain.tool
    return Pose(t[:3, 3], t[:3, :3])


def chain_jacobian(chain: DhChain, q) -> np.ndarray:
    """Geometric Jacobian (6 x n) at the tool point, world frame.

    Column i is the screw of joint i: revolute (z x (p_e - p_i); z),
    prismatic (z; 0).
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n,):
        raise DimensionMismatch(f"expected {chain.n} joint values, got {q.shape}")
    return _batch_jacobian(chain, _batch_frames(chain, q[None, :]))[0]


def manipulability(j: np.ndarray) -> float:
    """w = sqrt(det(J J^T)) over the supplied task rows; 0 at singularities."""
    g = np.asarray(j, dtype=float)
    det = float(np.linalg.det(g @ g.T))
    return math.sqrt(det) if det > 0.0 else 0.0


def _manipulability_batch(j: np.ndarray) -> np.ndarray:
    det = np.linalg.det(j @ np.swapaxes(j, -1, -2))
    return np.sqrt(np.maximum(det, 0.0))


def condition_number(j: np.ndarray) -> float:
    """sigma_max / sigma_min of the supplied rows; inf when rank deficient."""
    s = np.linalg.svd(np.asarray(j, dtype=float), compute_uv=False)
    if s[0] == 0.0 or s[-1] <= s[0] * 1e-12:
        return math.inf
    return float(s[0] / s[-1])


def _condition_batch(j: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(j, compute_uv=False)
    lead = s[:, 0]
    last = s[:, -1]
    out = np.full(len(j), math.inf)
    ok = (lead > 0.0) & (last > lead * 1e-12)
    out[ok] = lead[ok] / last[ok]
    return out


def ik_scan_batch(
    chain: DhChain,
    targets: np.ndarray,
    seeds,
    damping: float = 0.01,
    max_iter: int = 200,
    tol: float = 1e-6,
    step_clamp: float = 0.5,
    task_rows: tuple[int, ...] = (0, 1, 2),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Damped-least-squares position IK for a batch of targets.

    Runs every seed over all targets; among converged solutions the one with
    the highest manipulability of the selected task rows wins, so maps report
    the best-case configuration per position.  The damping is scaled down
    with the error norm (base lambda at errors >= 1 m), which keeps the
    near-singular crawl at full extension inside the iteration budget.

    Returns (q, converged, manipulability) with shapes (m, n), (m,), (m,).
    """
    if len(seeds) == 0:
        raise ValueError("seeds must be non-empty")
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    m = len(targets)
    lam2 = damping * damping
    eye = np.eye(3)
    rows = list(task_rows)

    best_q = np.zeros((m, chain.n))
    best_w = np.full(m, -1.0)
    any_converged = np.zeros(m, dtype=bool)

    for seed in seeds:
        seed = np.asarray(seed, dtype=float)
        if seed.shape != (chain.n,):
            raise DimensionMismatch(f"seed must have {chain.n} values")
        q = np.broadcast_to(chain.clamp(seed), (m, chain.n)).copy()
        converged = np.zeros(m, dtype=bool)
        active = np.arange(m)
        for it in range(max_iter + 1):
            if len(active) == 0:
                break
            qa = q[active]
            frames = _batch_frames(chain, qa)
            err = targets[active] - _batch_tool_positions(chain, frames)
            err2 = np.einsum("ij,ij->i", err, err)
            done = err2 < tol * tol
            if np.any(done):
                converged[active[done]] = True
                keep = ~done
                active = active[keep]
                if len(active) == 0 or it == max_iter:
                    break
                qa = qa[keep]
                frames = [f[keep] for f in frames]
                err = err[keep]
                err2 = err2[keep]
            elif it == max_iter:
                break
            jt = _batch_jacobian(chain, frames, translational_only=True)
            lam_eff = lam2 * np.minimum(1.0, np.sqrt(err2))
            a = jt @ np.swapaxes(jt, 1, 2) + lam_eff[:, None, None] * eye
            dq = np.swapaxes(jt, 1, 2) @ np.linalg.solve(a, err[:, :, None])
            dq = dq[:, :, 0]
            mx = np.max(np.abs(dq), axis=1)
            over = mx > step_clamp
            if np.any(over):
                dq[over] *= (step_clamp / mx[over])[:, None]
            q[active] = chain.clamp(qa + dq)
        if np.any(converged):
            idx = np.nonzero(converged)[0]
            frames = _batch_frames(chain, q[idx])
            w = _manipulability_batch(_batch_jacobian(chain, frames)[:, rows, :])
            better = w > best_w[idx]
            upd = idx[better]
            best_w[upd] = w[better]
            best_q[upd] = q[upd]
            any_converged[idx] = True
    return best_q, any_converged, np.where(any_converged, best_w, 0.0)


def ik_scan(
    chain: DhChain,
    target,
    seeds,
    damping: float = 0.01,
    max_iter: int = 200,
    tol: float = 1e-6,
    step_clamp: float = 0.5,
    task_rows: tuple[int, ...] = (0, 1, 2),
) -> np.ndarray | None:
    """Single-target damped-least-squares IK; None when unreachable."""
    q, converged, _ = ik_scan_batch(
        chain, np.asarray(target, dtype=float).reshape(1, 3), seeds,
        damping, max_iter, tol, step_clamp, task_rows,
    )
    return q[0] if converged[0] else None


@dataclass(frozen=True)
class WorkspaceGrid:
    """Axis-aligned box sampled at cell centers."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    shape: tuple[int, int, int]

    def __post_init__(self) -> None:
        for lo, hi, n in zip(self.lo, self.hi, self.shape):
            if n < 1:
                raise ValueError("resolution must be >= 1 per axis")
            if hi < lo or (hi == lo and n > 1):
                raise ValueError("grid extents must be positive (or a single layer)")

    def axis_centers(self, i: int) -> np.ndarray:
        lo, hi, n = self.lo[i], self.hi[i], self.shape[i]
        width = (hi - lo) / n
        return lo + (np.arange(n) + 0.5) * width

    def centers(self) -> np.ndarray:
        """(nx*ny*nz, 3) cell centers in C (x-major, z-fastest) order."""
        gx, gy, gz = np.meshgrid(
            self.axis_centers(0), self.axis_centers(1), self.axis_centers(2), indexing="ij"
        )
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def cell_size(self) -> tuple[float, float, float]:
        return tuple((h - l) / n for l, h, n in zip(self.lo, self.hi, self.shape))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "shape": list(self.shape)}


@dataclass
class DisconMap:
    """Per-cell manipulability/condition map with marked boundary cells."""

    grid: WorkspaceGrid
    manipulability: np.ndarray  # (nx, ny, nz)
    condition: np.ndarray
    reachable: np.ndarray  # bool
    boundary: np.ndarray  # bool
    threshold: float
    chain_name: str = ""
    seeds: list = field(default_factory=list)
    task_rows: tuple[str, ...] = ("x", "y", "z")

    def boundary_cell_count(self) -> int:
        return int(np.count_nonzero(self.boundary))

    def interior_boundary_count(self) -> int:
        """Boundary cells excluding the outermost grid shell."""
        core = self.boundary
        for axis in range(3):
            if core.shape[axis] > 2:
                sl = [slice(None)] * 3
                sl[axis] = slice(1, -1)
                core = core[tuple(sl)]
        return int(np.count_nonzero(core))

    def to_csv(self, path) -> None:
        xs = self.grid.axis_centers(0)
        ys = self.grid.axis_centers(1)
        zs = self.grid.axis_centers(2)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,y,z,manipulability,condition_number,reachable,boundary\n")
            for ix in range(self.grid.shape[0]):
                for iy in range(self.grid.shape[1]):
                    for iz in range(self.grid.shape[2]):
                        fh.write(
                            f"{xs[ix]:.9g},{ys[iy]:.9g},{zs[iz]:.9g},"
                            f"{self.manipulability[ix, iy, iz]:.9g},"
                            f"{self.condition[ix, iy, iz]:.9g},"
                            f"{int(self.reachable[ix, iy, iz])},"
                            f"{int(self.boundary[ix, iy, iz])}\n"
                        )

    def sidecar(self, chain: DhChain) -> dict:
        return {
            "schema_version": 1,
            "chain": chain.to_dict(),
            "grid": self.grid.to_dict(),
            "threshold": self.threshold,
            "seeds": [list(map(float, s)) for s in self.seeds],
            "task_rows": list(self.task_rows),
        }


def build_map(
    chain: DhChain,
    grid: WorkspaceGrid,
    threshold: float | str = "auto",
    seeds=None,
    task_rows: tuple[str, ...] = ("x", "y", "z"),
    damping: float = 0.01,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> DisconMap:
    """Evaluate the chain across the grid and mark discontinuity boundaries.

    Boundary cells are reachable cells whose manipulability falls below the
    threshold, plus reachable cells adjacent to unreachable ones.  The 'auto'
    threshold is 1% of the median manipulability over reachable cells.
    Deterministic: fixed chain/grid/seeds give identical maps.
    """
    if seeds is None:
        seeds = [np.zeros(chain.n)]
    rows = tuple(TASK_ROW_INDEX[r] for r in task_rows)
    targets = grid.centers()
    q, reached, manip_flat = ik_scan_batch(
        chain, targets, seeds, damping, max_iter, tol, task_rows=rows
    )
    cond_flat = np.full(len(targets), math.inf)
    if np.any(reached):
        idx = np.nonzero(reached)[0]
        frames = _batch_frames(chain, q[idx])
        j = _batch_jacobian(chain, frames)[:, list(rows), :]
        cond_flat[idx] = _condition_batch(j)

    manip = manip_flat.reshape(grid.shape)
    cond = cond_flat.reshape(grid.shape)
    reach = reached.reshape(grid.shape)

    if threshold == "auto":
        reachable_w = manip[reach]
        threshold_value = 0.01 * float(np.median(reachable_w)) if reachable_w.size else 0.0
    else:
        threshold_value = float(threshold)
    boundary = reach & (manip < threshold_value)
    # reachability transitions: reachable cells with an unreachable 6-neighbor
    for axis in range(3):
        if grid.shape[axis] < 2:
            continue
        lo_sl = [slice(None)] * 3
        hi_sl = [slice(None)] * 3
        lo_sl[axis] = slice(None, -1)
        hi_sl[axis] = slice(1, None)
        lo_sl, hi_sl = tuple(lo_sl), tuple(hi_sl)
        boundary[lo_sl] |= reach[lo_sl] & ~reach[hi_sl]
        boundary[hi_sl] |= reach[hi_sl] & ~reach[lo_sl]
    return DisconMap(
        grid=grid,
        manipulability=manip,
        condition=cond,
        reachable=reach,
        boundary=boundary,
        threshold=threshold_value,
        chain_name=chain.name,
        seeds=[list(map(float, s)) for s in seeds],
        task_rows=task_rows,
    )
