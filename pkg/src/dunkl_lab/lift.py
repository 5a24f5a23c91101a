"""Reconstruction of the full jump process from its radial part.

Jumps are added one positive root at a time.  For the enumeration
(α_1, …, α_m) the i-th lift turns a process Y^{i−1} into Y^i whose
generator gains the term k(α_i)(u(σ_{α_i}x) − u(x))/(x·α_i)².  Two
equivalent-in-law realizations are provided:

* general-clock: the process is simulated stepwise while the integrated
  intensity Λ_i(t) = c_i ∫ ds/(Y_s·α_i)² accumulates; when Λ_i crosses an
  independent Exp(1) threshold the state reflects across α_i and the same
  dynamics continue from the reflected point.

* shortcut: when σ_{α_i} maps {±α_1, …, ±α_{i−1}} onto itself, the lift
  is an independent unit-rate Poisson flip evaluated along the additive
  clock, Y^i_t = σ_{α_i}^{N(c_i·Ã_t)} Y^{i−1}_t with
  Ã_t = ∫_0^t ds/(Y^{i−1}_s·α_i)².

A plan mixing modes is realized in two phases: every stage up to the last
general-mode stage runs inside one stepwise engine as a clock (legal for
the shortcut-marked stages among them because their invariance condition
makes the two realizations agree in law), and the remaining shortcut
stages are applied as Poisson flips over the recorded paths.  Flipping a
recorded path is only lawful under the invariance condition, which is why
general mode can never be realized on top of a frozen path.

A flipped path's inherited jumps change direction: a jump across α_j seen
through σ_{α_i} is a jump across ±σ_{α_i}(α_j), which the invariance
condition keeps inside the already-lifted roots.  The jump log re-labels
such events accordingly, so every logged event satisfies
post = pre − (α·pre)α for its recorded root exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _engine
from .errors import (
    InvalidArgumentError,
    InvalidPlanError,
    SingularClockError,
    UnsupportedRegimeError,
)
from .radial import (
    JumpEvent,
    SimulationConfig,
    Trajectory,
    _trajectories_from_engine,
)
from .rng import FLIP, stream
from .root_systems import (
    Multiplicity,
    RootSystem,
    _as_enumeration,
    _dedup_key,
    _match_root,
    check_invariance_condition,
    reflect,
)

REGION_TOL = 1e-9


@dataclass(frozen=True)
class LiftPlan:
    """A full lift recipe: enumeration of R₊, per-stage rates and modes."""

    system: RootSystem
    k: Multiplicity
    enumeration: tuple
    rates: tuple
    modes: tuple

    @property
    def n_stages(self):
        return len(self.enumeration)

    def to_dict(self):
        return {
            "enumeration": [int(i) for i in self.enumeration],
            "modes": list(self.modes),
            "rates": [float(r) for r in self.rates],
        }


def build_lift_plan(system, k, *, rates=None, enumeration=None, mode="auto"):
    """Assemble and validate a ``LiftPlan``.

    ``rates`` is the multiplicity family feeding the jump intensities (the
    drift multiplicity ``k`` itself for the standard process, k′ for the
    two-parameter variant); ``mode`` is "auto", "shortcut", "general", or
    one mode string per stage.  Shortcut stages must satisfy the
    invariance condition σ_{α_i}({±α_1, …, ±α_{i−1}}) = {±α_1, …, ±α_{i−1}}.
    """
    enumeration = _as_enumeration(system, enumeration)
    m = system.n_positive
    if len(enumeration) != m:
        raise InvalidArgumentError("enumeration must order all positive roots")
    rate_mult = k if rates is None else rates
    per_pos = rate_mult.per_positive()
    stage_rates = tuple(float(per_pos[i]) for i in enumeration)
    if isinstance(mode, str):
        if mode == "auto":
            modes = tuple(
                "shortcut" if check_invariance_condition(system, i + 1, enumeration)
                else "general"
                for i in range(m)
            )
        elif mode in ("shortcut", "general"):
            modes = (mode,) * m
        else:
            raise InvalidArgumentError(f"unknown lift mode {mode!r}")
    else:
        modes = tuple(mode)
        if len(modes) != m or any(md not in ("shortcut", "general") for md in modes):
            raise InvalidArgumentError("modes must list 'shortcut'/'general' per stage")
    for i, md in enumerate(modes):
        if md == "shortcut" and not check_invariance_condition(system, i + 1, enumeration):
            raise InvalidPlanError(
                f"stage {i + 1}: shortcut requested but σ_α does not preserve "
                "the previously lifted roots"
            )
    return LiftPlan(system=system, k=k, enumeration=enumeration,
                    rates=stage_rates, modes=modes)


def plan_from_dict(system, k, doc, rates=None):
    return build_lift_plan(
        system, k, rates=rates,
        enumeration=tuple(doc["enumeration"]), mode=tuple(doc["modes"]),
    )


@dataclass(frozen=True)
class ChamberRegion:
    """A union of closed Weyl-chamber images ∪_w w(C̄)."""

    elements: tuple  # tuple of (n, n) arrays, deterministic order

    def contains(self, system, states, tol=REGION_TOL):
        """Boolean mask: which rows of ``states`` lie in the region."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        pos_t = system.positive_roots.T
        inside = np.zeros(len(states), dtype=bool)
        for w in self.elements:
            inside |= ((states @ w) @ pos_t >= -tol).all(axis=1)
        return inside


@dataclass(frozen=True)
class FoldRegions:
    """The nested regions C_0 ⊆ C_1 ⊆ … and per-stage disjointness flags."""

    regions: tuple          # n_stages + 1 ChamberRegion entries
    disjoint: tuple         # stage i (1-based): C_{i−1} ∩ σ_{α_i}(C_{i−1}) = ∅
    covers_space: bool      # last region is all of ℝⁿ


def fold_check_regions(plan, n_stages=None):
    """Chamber sequence C_{i+1} = C_i ∪ σ_{α_{i+1}}(C_i) with C_0 = C."""
    system = plan.system
    if n_stages is None:
        n_stages = plan.n_stages
    n = system.dimension
    elems = [np.eye(n)]
    keys = {_dedup_key(elems[0])}
    regions = [ChamberRegion(elements=tuple(elems))]
    disjoint = []
    for s in range(n_stages):
        alpha = system.positive_roots[plan.enumeration[s]]
        sigma = np.eye(n) - np.outer(alpha, alpha)
        reflected = [sigma @ w for w in elems]
        overlap = any(_dedup_key(r) in keys for r in reflected)
        disjoint.append(not overlap)
        for r in reflected:
            key = _dedup_key(r)
            if key not in keys:
                keys.add(key)
                elems.append(r)
        regions.append(ChamberRegion(elements=tuple(elems)))
    covers = len(elems) == len(system.weyl_group)
    return FoldRegions(regions=tuple(regions), disjoint=tuple(disjoint),
                       covers_space=covers)


def cumulative_time_change(trajectory, alpha):
    """Trapezoidal Ã_t = ∫_0^t ds/(Y_s·α)² along a recorded path.

    Strictly increasing; raises ``SingularClockError`` if the path touches
    the hyperplane of α on the grid.
    """
    alpha = np.asarray(alpha, dtype=float)
    dots = trajectory.states @ alpha
    if np.any(dots == 0.0):
        raise SingularClockError("(Y·α)² vanishes at a grid point")
    inv2 = dots**-2.0
    dtv = np.diff(trajectory.times)
    seg = 0.5 * (inv2[:-1] + inv2[1:]) * dtv
    return trajectory.times, np.concatenate([[0.0], np.cumsum(seg)])


def _interp_raw_state(trajectory, t):
    """Path state at time ``t``, honoring jump discontinuities in the log."""
    times, states = trajectory.times, trajectory.states
    j = int(np.searchsorted(times, t))
    j = min(max(j, 1), len(times) - 1)
    t_lo, x_lo = float(times[j - 1]), states[j - 1]
    t_hi, x_hi = float(times[j]), states[j]
    for ev in trajectory.events:
        if t_lo < ev.time <= t:
            t_lo, x_lo = float(ev.time), ev.post
        if t <= ev.time < t_hi:
            t_hi, x_hi = float(ev.time), ev.pre
    if t_hi <= t_lo:
        return np.array(x_lo, dtype=float)
    w = (t - t_lo) / (t_hi - t_lo)
    return np.asarray(x_lo) + w * (np.asarray(x_hi) - np.asarray(x_lo))


def _flip_stage(trajectories, system, root_position, rate, seed, stage_index):
    """Apply the independent-Poisson lift to recorded paths.

    Only lawful when the invariance condition holds at this stage (the
    plan builder enforces that).  Flip times are the crossings of the
    additive clock by cumulative Exp(1) draws from the per-path flip
    stream.
    """
    alpha = system.positive_roots[root_position]
    pos = system.positive_roots
    out = []
    for traj in trajectories:
        rng = stream(seed, FLIP, stage_index, traj.path_id)
        _, lam_raw = cumulative_time_change(traj, alpha)
        lam_grid = rate * lam_raw
        total = float(lam_grid[-1])
        flip_times = []
        acc = float(rng.standard_exponential())
        while acc < total:
            flip_times.append(float(np.interp(acc, lam_grid, traj.times)))
            acc += float(rng.standard_exponential())
        flip_times = np.asarray(flip_times)

        parity = np.searchsorted(flip_times, traj.times, side="right") % 2
        dots = traj.states @ alpha
        reflected = traj.states - np.outer(dots, alpha)
        new_states = np.where(parity[:, None] == 1, reflected, traj.states)

        new_events = []
        for ev in traj.events:
            p = int(np.searchsorted(flip_times, ev.time, side="right")) % 2
            if p == 0:
                new_events.append(ev)
                continue
            pre = reflect(alpha, ev.pre)
            image = reflect(alpha, pos[ev.root])
            new_root = _match_root(pos, image)
            if new_root < 0:
                new_root = _match_root(pos, -image)
            if new_root < 0:
                raise InvalidPlanError(
                    "flip stage moved a jump outside the positive system; "
                    "invariance condition violated"
                )
            beta = pos[new_root]
            new_events.append(JumpEvent(time=ev.time, root=int(new_root),
                                        pre=pre, post=pre - (pre @ beta) * beta))
        for idx, t_flip in enumerate(flip_times):
            raw = _interp_raw_state(traj, float(t_flip))
            pre = reflect(alpha, raw) if idx % 2 == 1 else raw
            post = pre - (pre @ alpha) * alpha
            new_events.append(JumpEvent(time=float(t_flip), root=int(root_position),
                                        pre=pre, post=post))
        new_events.sort(key=lambda e: e.time)
        out.append(Trajectory(
            path_id=traj.path_id,
            times=traj.times,
            states=new_states,
            events=tuple(new_events),
            termination=traj.termination,
            t0_time=traj.t0_time,
            flags=traj.flags,
        ))
    return out


@dataclass
class LiftRun:
    """Output of a lift simulation: final-stage paths plus diagnostics."""

    trajectories: list
    stage_trajectories: Optional[dict]  # stage index -> paths (engine stage onward)
    final_states: np.ndarray
    termination: np.ndarray
    wall_contact: np.ndarray
    min_wall_distance: np.ndarray
    n_rejected: np.ndarray

    @property
    def n_jumps(self):
        return np.array([len(t.events) for t in self.trajectories])


def _validate_start(system, x0):
    x0 = np.asarray(x0, dtype=float)
    if np.any(system.positive_roots @ x0 == 0.0):
        raise InvalidArgumentError("x0 lies on a reflecting hyperplane")
    return x0


def simulate_dunkl(plan, x0, config: SimulationConfig, *, stages=None,
                   keep_stage_paths=False, threads=1,
                   noise_transform=None) -> LiftRun:
    """Simulate Y^i for i = ``stages`` (default: all m) under a lift plan.

    The start point may sit in any chamber; the recipe starts from the
    extended radial dynamics at x0 and adds jumps stage by stage.  All
    drift multiplicities must be ≥ 1/2 (below that the radial part can
    reach the walls and the construction does not apply).
    """
    system = plan.system
    x0 = _validate_start(system, x0)
    if plan.k.min_value < 0.5:
        raise UnsupportedRegimeError(
            "the jump reconstruction requires every k(α) ≥ 1/2"
        )
    if any(r < 0 for r in plan.rates):
        raise InvalidArgumentError("jump rates must be ≥ 0")
    m = plan.n_stages
    n_stages = m if stages is None else int(stages)
    if not 0 <= n_stages <= m:
        raise InvalidArgumentError(f"stages must lie in 0..{m}")
    modes = plan.modes[:n_stages]
    g = 0
    for i, md in enumerate(modes, start=1):
        if md == "general":
            g = i

    params = _engine.EngineParams(
        positive_roots=system.positive_roots,
        kvec=plan.k.per_positive(),
        clock_positions=tuple(plan.enumeration[:g]),
        clock_rates=np.asarray(plan.rates[:g], dtype=float),
        x0=x0,
        tgrid=config.time_grid(),
        seed=config.seed,
        policy="reject_halve",
        t0_detect=False,
        eps_wall=config.eps_wall,
        max_halvings=config.max_halvings,
        record=True,
        noise_transform=noise_transform,
    )
    res = _engine.run_paths(params, config.n_paths, threads=threads)
    trajs = _trajectories_from_engine(res)
    stage_trajs = {g: trajs} if keep_stage_paths else None
    for s in range(g + 1, n_stages + 1):
        trajs = _flip_stage(trajs, system, plan.enumeration[s - 1],
                            plan.rates[s - 1], config.seed, s)
        if keep_stage_paths:
            stage_trajs[s] = trajs
    return LiftRun(
        trajectories=trajs,
        stage_trajectories=stage_trajs,
        final_states=np.stack([t.states[-1] for t in trajs]),
        termination=np.array([_engine.TERMINATION_LABELS[int(c)]
                              for c in res.termination]),
        wall_contact=res.wall_contact,
        min_wall_distance=res.min_wall_distance,
        n_rejected=res.n_rejected,
    )


@dataclass(frozen=True)
class DunklSimulator:
    """A lift pipeline built one root at a time (see ``lift_one_root``)."""

    system: RootSystem
    k: Multiplicity
    stage_roots: tuple = ()
    stage_rates: tuple = ()
    stage_modes: tuple = ()

    def run(self, x0, config, *, keep_stage_paths=False, threads=1):
        plan = _partial_plan(self)
        return simulate_dunkl(plan, x0, config, stages=len(self.stage_roots),
                              keep_stage_paths=keep_stage_paths, threads=threads)


def _partial_plan(sim: DunklSimulator):
    # Pad the unlifted tail so the plan covers the whole positive system;
    # the run is truncated to the built stages.
    m = sim.system.n_positive
    rest = tuple(i for i in range(m) if i not in sim.stage_roots)
    enumeration = tuple(sim.stage_roots) + rest
    rates = tuple(sim.stage_rates) + (0.0,) * len(rest)
    modes = tuple(sim.stage_modes) + ("general",) * len(rest)
    return LiftPlan(system=sim.system, k=sim.k, enumeration=enumeration,
                    rates=rates, modes=modes)


def radial_simulator(system, k) -> DunklSimulator:
    """Stage-0 simulator: the extended radial dynamics, no jumps yet."""
    return DunklSimulator(system=system, k=k)


def lift_one_root(sim: DunklSimulator, root_position, rate, mode) -> DunklSimulator:
    """Extend a pipeline by one root lift.

    ``mode`` is "shortcut" (independent Poisson flip; requires the
    invariance condition against the roots already lifted) or "general"
    (stepwise clock; always lawful).  Zero rate is allowed and produces no
    jumps.
    """
    if mode not in ("shortcut", "general"):
        raise InvalidArgumentError(f"unknown lift mode {mode!r}")
    if rate < 0:
        raise InvalidArgumentError("jump rate must be ≥ 0")
    root_position = int(root_position)
    if root_position in sim.stage_roots:
        raise InvalidArgumentError("root already lifted")
    enumeration = tuple(sim.stage_roots) + (root_position,)
    stage = len(enumeration)
    if mode == "shortcut" and not check_invariance_condition(
        sim.system, stage,
        enumeration + tuple(i for i in range(sim.system.n_positive)
                            if i not in enumeration),
    ):
        raise InvalidPlanError(
            f"stage {stage}: shortcut requested but the invariance condition fails"
        )
    return DunklSimulator(
        system=sim.system,
        k=sim.k,
        stage_roots=enumeration,
        stage_rates=tuple(sim.stage_rates) + (float(rate),),
        stage_modes=tuple(sim.stage_modes) + (mode,),
    )
