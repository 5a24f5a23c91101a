"""Simulation of the chamber-valued radial process.

The radial process solves dX = dβ + ∇ log ϖ_k(X) dt inside the chamber C,
with ∇ log ϖ_k(x) = Σ_{α∈R₊} k(α) α/(x·α).  When every multiplicity is at
least 1/2 the solution never reaches ∂C and proposals that cross a wall
are pure discretization error (rejected and bisected).  When some
multiplicity is below 1/2 the process genuinely hits the wall in finite
time; paths then terminate at the first time the wall distance drops
below ε_wall·(1 + ‖x‖), reported as the hitting time T₀.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _engine
from .calculus import drift as drift_field
from .errors import InvalidArgumentError
from .root_systems import Multiplicity, RootSystem, chamber_contains


@dataclass(frozen=True)
class SimulationConfig:
    """Horizon, grid, path count, seed, and wall policy for one run.

    ``wall_policy``: "reject_halve" rejects and bisects wall-crossing
    proposals; "stop_at_t0" terminates the path instead; "auto" picks
    reject_halve when min k ≥ 1/2 and stop_at_t0 otherwise.
    """

    horizon: float
    dt: float
    n_paths: int
    seed: int
    wall_policy: str = "auto"
    max_halvings: int = 20
    eps_wall: float = 1e-8

    def __post_init__(self):
        if not (self.horizon > 0 and self.dt > 0 and self.dt <= self.horizon):
            raise InvalidArgumentError("need 0 < dt ≤ horizon")
        if self.n_paths < 1:
            raise InvalidArgumentError("need at least one path")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be a nonnegative integer")
        if self.wall_policy not in ("auto", "reject_halve", "stop_at_t0"):
            raise InvalidArgumentError(f"unknown wall policy {self.wall_policy!r}")
        if self.max_halvings < 1:
            raise InvalidArgumentError("max_halvings must be ≥ 1")

    def time_grid(self):
        n_steps = int(math.ceil(self.horizon / self.dt - 1e-12))
        grid = np.minimum(np.arange(n_steps + 1) * self.dt, self.horizon)
        grid[-1] = self.horizon
        return grid

    def resolve_policy(self, k: Multiplicity) -> str:
        if self.wall_policy != "auto":
            return self.wall_policy
        return "reject_halve" if k.min_value >= 0.5 else "stop_at_t0"


@dataclass(frozen=True)
class JumpEvent:
    """One reflection jump: ``post`` is exactly pre − (α·pre)α for root α."""

    time: float
    root: int          # position in the positive enumeration
    pre: np.ndarray
    post: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """A recorded path: grid times, states, jump log, and how it ended."""

    path_id: int
    times: np.ndarray
    states: np.ndarray
    events: tuple = ()
    termination: str = "horizon"
    t0_time: Optional[float] = None
    flags: tuple = ()

    def final_state(self):
        return self.states[-1]


@dataclass
class RadialRun:
    """Batch output: summary arrays always, trajectories when recorded."""

    tgrid: np.ndarray
    final_states: np.ndarray
    termination: np.ndarray      # label per path
    t0_times: np.ndarray         # NaN unless the path hit the wall
    wall_contact: np.ndarray
    min_wall_distance: np.ndarray
    n_rejected: np.ndarray
    trajectories: Optional[list] = None

    @property
    def hit_fraction(self):
        """Fraction of paths whose wall distance dipped below threshold."""
        return float(np.mean(self.wall_contact | (self.termination == "T0")))


def _trajectories_from_engine(res: _engine.EngineResult, events_per_path=None):
    out = []
    for j in range(len(res.final)):
        stop = int(res.stop_index[j])
        term = _engine.TERMINATION_LABELS[int(res.termination[j])]
        flags = []
        if res.wall_contact[j]:
            flags.append("wall_contact")
        if term == "step_failure":
            flags.append("step_failure")
        raw_events = events_per_path[j] if events_per_path is not None else res.events[j]
        events = tuple(
            JumpEvent(time=float(t), root=int(r), pre=np.array(pre), post=np.array(post))
            for (t, r, pre, post) in raw_events
        )
        out.append(
            Trajectory(
                path_id=j,
                times=res.tgrid[: stop + 1].copy(),
                states=(res.states[j, : stop + 1].copy()
                        if res.states is not None else None),
                events=events,
                termination=term,
                t0_time=(float(res.t0_time[j])
                         if np.isfinite(res.t0_time[j]) else None),
                flags=tuple(flags),
            )
        )
    return out


def run_radial(system: RootSystem, k: Multiplicity, x0, config: SimulationConfig,
               *, record=True, threads=1, noise_transform=None) -> RadialRun:
    """Simulate the radial process; see ``simulate_radial`` for the contract.

    ``noise_transform`` premultiplies every Gaussian increment by a fixed
    orthogonal matrix; with matched seeds this realizes the same driving
    noise in a rotated frame (used by equivariance checks).
    """
    x0 = np.asarray(x0, dtype=float)
    if chamber_contains(system.positive_roots, x0) != "interior":
        raise InvalidArgumentError("x0 must lie in the open chamber")
    policy = config.resolve_policy(k)
    params = _engine.EngineParams(
        positive_roots=system.positive_roots,
        kvec=k.per_positive(),
        clock_positions=(),
        clock_rates=np.zeros(0),
        x0=x0,
        tgrid=config.time_grid(),
        seed=config.seed,
        policy=policy,
        t0_detect=k.min_value < 0.5,
        eps_wall=config.eps_wall,
        max_halvings=config.max_halvings,
        record=record,
        noise_transform=noise_transform,
    )
    res = _engine.run_paths(params, config.n_paths, threads=threads)
    return RadialRun(
        tgrid=res.tgrid,
        final_states=res.final,
        termination=np.array([_engine.TERMINATION_LABELS[int(c)]
                              for c in res.termination]),
        t0_times=res.t0_time,
        wall_contact=res.wall_contact,
        min_wall_distance=res.min_wall_distance,
        n_rejected=res.n_rejected,
        trajectories=_trajectories_from_engine(res) if record else None,
    )


def simulate_radial(system, k, x0, config, *, threads=1):
    """Euler–Maruyama paths of the radial process on [0, horizon].

    Returns one ``Trajectory`` per path.  Paths with min k < 1/2 terminate
    at the first wall contact (T₀); with min k ≥ 1/2 early termination can
    only be a discretization artifact and is reported through flags.
    """
    return run_radial(system, k, x0, config, record=True,
                      threads=threads).trajectories


def em_step(system, k, x, dt, dw, *, rng=None, max_halvings=20):
    """One explicit Euler–Maruyama step from ``x`` with increment ``dw``.

    The candidate is x + ∇log ϖ_k(x)·dt + dw.  If it leaves the chamber
    the interval is covered by bisection with fresh increments drawn from
    ``rng`` (required in that case); exhausting the halving budget raises
    ``StepFailureError``.
    """
    x = np.asarray(x, dtype=float)
    dw = np.asarray(dw, dtype=float)
    candidate = x + drift_field(system, k, x) * dt + dw
    if chamber_contains(system.positive_roots, candidate) == "interior":
        return candidate
    if rng is None:
        raise InvalidArgumentError(
            "candidate leaves the chamber; pass rng to allow halved retries"
        )
    params = _engine.EngineParams(
        positive_roots=system.positive_roots,
        kvec=k.per_positive(),
        clock_positions=(),
        clock_rates=np.zeros(0),
        x0=x,
        tgrid=np.array([0.0, dt]),
        seed=0,
        policy="reject_halve",
        t0_detect=False,
        eps_wall=0.0,
        max_halvings=max_halvings,
        record=False,
    )
    ps = _engine._PathState(0, 0, np.sign(system.positive_roots @ x),
                            np.zeros(0), np.zeros(0))
    ps._retry = rng
    return _engine.cover_interval(params, ps, x.copy(), dt, 0.0,
                                  max_halvings, first_xi=dw / math.sqrt(dt))


def squared_norm_series(trajectory: Trajectory):
    """(times, ‖x‖²) along a trajectory, for squared-Bessel comparisons."""
    return trajectory.times, np.einsum("ij,ij->i", trajectory.states,
                                       trajectory.states)


# ---------------------------------------------------------------------------
# CSV trajectory exchange format
#
# Header: path_id,t,x_1,...,x_n,event with event in {"", "jump:<root>", "T0"};
# floats are written with 17 significant digits so replays are byte-identical.


def _fmt(v):
    return f"{float(v):.17g}"


def write_trajectories_csv(trajectories, fileobj_or_path):
    if isinstance(fileobj_or_path, (str,)) or hasattr(fileobj_or_path, "__fspath__"):
        with open(fileobj_or_path, "w", newline="") as f:
            _write_csv(trajectories, f)
    else:
        _write_csv(trajectories, fileobj_or_path)


def _write_csv(trajectories, f):
    if not trajectories:
        raise InvalidArgumentError("no trajectories to export")
    n = trajectories[0].states.shape[1]
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["path_id", "t"] + [f"x_{i+1}" for i in range(n)] + ["event"])
    for traj in trajectories:
        rows = [(float(t), [_fmt(v) for v in state], "")
                for t, state in zip(traj.times, traj.states)]
        for ev in traj.events:
            rows.append((float(ev.time), [_fmt(v) for v in ev.post],
                         f"jump:{ev.root}"))
        rows.sort(key=lambda r: (r[0], r[2]))
        if traj.termination == "T0" and rows:
            t_last, coords, _ = rows[-1]
            rows[-1] = (t_last, coords, "T0")
        for t, coords, event in rows:
            writer.writerow([str(traj.path_id), _fmt(t)] + coords + [event])


def read_trajectories_csv(fileobj_or_path):
    """Parse the CSV format back into plain per-path dicts (for tooling)."""
    if isinstance(fileobj_or_path, (str,)) or hasattr(fileobj_or_path, "__fspath__"):
        with open(fileobj_or_path, newline="") as f:
            return _read_csv(f)
    return _read_csv(fileobj_or_path)


def _read_csv(f):
    reader = csv.reader(f)
    header = next(reader)
    if header[:2] != ["path_id", "t"] or header[-1] != "event":
        raise InvalidArgumentError("not a trajectory CSV (bad header)")
    n = len(header) - 3
    paths = {}
    for row in reader:
        pid = int(row[0])
        rec = paths.setdefault(pid, {"t": [], "x": [], "event": []})
        rec["t"].append(float(row[1]))
        rec["x"].append([float(v) for v in row[2:2 + n]])
        rec["event"].append(row[-1])
    for rec in paths.values():
        rec["t"] = np.array(rec["t"])
        rec["x"] = np.array(rec["x"])
    return paths
