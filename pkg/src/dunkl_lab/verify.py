"""Statistical and numerical acceptance checks with structured reports.

Every check returns a ``Report`` whose pass criterion is declared up
front: either |estimate − target| ≤ tolerance for moment/identity checks,
or p ≥ significance for two-sample distribution checks (Bonferroni across
coordinates inside a check).  Checks draw their randomness from streams
derived off a master seed, so a whole suite is reproducible bit for bit
from (seed, configuration); only the recorded runtimes vary.

Each statistical check is paired with a negative control that feeds it a
deliberately mismatched pair; a suite treats a passing control as an
error, since a check that cannot fail verifies nothing.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

from . import rng as rngmod
from .calculus import (
    GeneratorSpec,
    TestFunction,
    apply_generator,
    generator_scale,
    harmonicity_residual,
    rotate_spec,
    rotate_system,
    sample_interior_points,
)
from .errors import InvalidArgumentError
from .lift import (
    build_lift_plan,
    fold_check_regions,
    lift_one_root,
    radial_simulator,
    simulate_dunkl,
)
from .radial import SimulationConfig, run_radial
from .root_systems import (
    Multiplicity,
    build_rank_one,
    multiplicity,
    project_batch,
    reflect,
)

DEFAULT_ALPHA = 0.01


@dataclass
class Report:
    """Outcome of one verification check."""

    name: str
    estimate: float
    stderr: Optional[float]
    tolerance: Optional[float]
    alpha: Optional[float]
    sample_size: int
    passed: bool
    skipped: bool = False
    runtime: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self):
        def clean(v):
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {kk: clean(vv) for kk, vv in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(vv) for vv in v]
            if isinstance(v, np.bool_):
                return bool(v)
            return v

        return {
            "name": self.name,
            "estimate": clean(self.estimate),
            "stderr": clean(self.stderr),
            "tolerance": clean(self.tolerance),
            "alpha": clean(self.alpha),
            "sample_size": int(self.sample_size),
            "passed": bool(self.passed),
            "skipped": bool(self.skipped),
            "runtime": float(self.runtime),
            "details": clean(self.details),
        }


def reports_to_json(reports, **kwargs):
    return json.dumps([r.to_dict() for r in reports], **kwargs)


def render_table(reports):
    lines = []
    header = f"{'check':42s} {'estimate':>12s} {'crit':>10s} {'n':>7s} {'time':>7s} status"
    lines.append(header)
    lines.append("-" * len(header))
    for r in reports:
        crit = ""
        if r.tolerance is not None:
            crit = f"tol {r.tolerance:g}"
        elif r.alpha is not None:
            crit = f"α {r.alpha:g}"
        status = "SKIP" if r.skipped else ("PASS" if r.passed else "FAIL")
        lines.append(
            f"{r.name:42s} {r.estimate:12.5g} {crit:>10s} {r.sample_size:7d} "
            f"{r.runtime:6.1f}s {status}"
        )
    return "\n".join(lines)


def derived_seed(master, tag):
    """Stable 63-bit seed for a named sub-experiment."""
    h = zlib.crc32(tag.encode())
    seq = np.random.SeedSequence(int(master), spawn_key=(rngmod.CHECK, h))
    return int(seq.generate_state(2, dtype=np.uint32)[0])


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    rep = fn(*args, **kwargs)
    rep.runtime = time.perf_counter() - t0
    return rep


def stack_paths(trajectories, require_full=True):
    """(times, states (N, M+1, n)) for paths that reached the horizon.

    Returns the kept-path mask as third element; early-terminated paths
    cannot be stacked on the common grid and are dropped.
    """
    full_len = max(len(t.times) for t in trajectories)
    kept = np.array([len(t.times) == full_len and t.termination == "horizon"
                     for t in trajectories])
    if require_full and not kept.all():
        frac = 1.0 - kept.mean()
        if frac > 0.05:
            raise InvalidArgumentError(
                f"{frac:.1%} of paths terminated early; check the regime"
            )
    idx = np.nonzero(kept)[0]
    times = trajectories[idx[0]].times
    states = np.stack([trajectories[i].states for i in idx])
    return times, states, kept


# ---------------------------------------------------------------------------
# test-function battery


def function_battery(dim):
    """Five smooth functions with distinct symmetry and growth profiles."""
    v = np.arange(1, dim + 1, dtype=float)
    v /= np.linalg.norm(v)
    w = np.array([(-1.0) ** i * (0.8 + 0.1 * i) for i in range(dim)])

    return [
        TestFunction(lambda x: np.einsum("...i,...i->...", x, x), name="sq_norm"),
        TestFunction(lambda x: np.exp(-0.25 * np.einsum("...i,...i->...", x, x)),
                     name="gauss"),
        TestFunction(lambda x: x @ v, name="linear"),
        TestFunction(lambda x: np.sin(x @ w), name="sine"),
        TestFunction(lambda x: 1.0 / (1.0 + np.einsum("...i,...i->...", x, x)),
                     name="inv_quad"),
    ]


def control_function(dim):
    """A deliberately non-symmetric function: sensitive to missing jump terms."""
    v = np.zeros(dim)
    v[0] = 1.0
    return TestFunction(lambda x: x @ v, name="first_coord")


# ---------------------------------------------------------------------------
# martingale residuals


def calibrate_bias_coefficient(system, t, n_paths, seed):
    """Per-dt bias allowance from the zero-multiplicity (Brownian) case.

    With k ≡ 0 the generator is ½Δ, Brownian marginals are exact, and the
    only systematic residual is the left-Riemann error of the time
    integral, (dt/2)·(E g(X_0) − E g(X_T)) + O(dt²) for g = ½Δu.  The
    returned c is the largest such half-difference over the battery, with
    a two-sigma sampling margin, so b(dt) = c·dt covers the quadrature
    bias at any step size.
    """
    n = system.dimension
    rng = rngmod.stream(seed, rngmod.CHECK, 0)
    x0 = np.arange(2 * n, n, -1, dtype=float)  # generic off-wall start
    finals = x0 + np.sqrt(t) * rng.standard_normal((n_paths, n))
    k0 = multiplicity(system, 0.0)
    spec = GeneratorSpec.radial(system, k0)
    c = 0.0
    for u in function_battery(n):
        g0 = float(apply_generator(spec, u, x0))
        gt = apply_generator(spec, u, finals)
        se = float(gt.std(ddof=1) / np.sqrt(n_paths))
        c = max(c, 0.5 * (abs(float(gt.mean()) - g0) + 2.0 * se))
    return float(c)


def _path_residuals(states, times, spec, u):
    """u(X_T) − u(X_0) − Σ A u(X_{t_j}) Δt_j per path (left Riemann sum)."""
    au = apply_generator(spec, u, states[:, :-1, :])
    integral = au @ np.diff(times)
    return u(states[:, -1, :]) - u(states[:, 0, :]) - integral


def martingale_residual(sample_paths, spec, u, *, bias_allowance=0.0,
                        name="martingale"):
    """Mean martingale residual of ``u`` under the declared generator.

    ``sample_paths`` is a zero-argument callable returning recorded
    trajectories; pass iff |mean| ≤ 3·SE + bias allowance.
    """
    trajs = sample_paths()
    times, states, kept = stack_paths(trajs)
    resid = _path_residuals(states, times, spec, u)
    est = float(resid.mean())
    se = float(resid.std(ddof=1) / np.sqrt(len(resid)))
    tol = 3.0 * se + bias_allowance
    return Report(
        name=name,
        estimate=est,
        stderr=se,
        tolerance=tol,
        alpha=None,
        sample_size=int(kept.sum()),
        passed=abs(est) <= tol,
        details={"bias_allowance": bias_allowance, "function": u.name,
                 "dropped_paths": int((~kept).sum())},
    )


# ---------------------------------------------------------------------------
# one-dimensional Bessel oracle (independent of the chamber engine)


def bessel_em_oracle(dim, x0, horizon, dt, n_paths, rng, absorb_eps=1e-8):
    """Plain 1-D Euler scheme for dX = dβ + ((dim−1)/2)/X dt.

    Paths are absorbed when they propose a value ≤ ``absorb_eps``; returns
    (final values, hit mask).  Written independently of the multi-
    dimensional engine on purpose: it is the least-shared-code reference
    for norm laws and hitting behavior.
    """
    n_steps = int(round(horizon / dt))
    x = np.full(n_paths, float(x0))
    alive = np.ones(n_paths, dtype=bool)
    coef = 0.5 * (dim - 1.0)
    sq = np.sqrt(dt)
    for _ in range(n_steps):
        idx = np.nonzero(alive)[0]
        if not len(idx):
            break
        xi = rng.standard_normal(len(idx))
        prop = x[idx] + coef / x[idx] * dt + sq * xi
        hit = prop <= absorb_eps
        x[idx[~hit]] = prop[~hit]
        if hit.any():
            x[idx[hit]] = np.maximum(prop[hit], 0.0)
            alive[idx[hit]] = False
    return x, ~alive


def norm_is_bessel(norm_samples, dim, start_norm, horizon, *, n_oracle=None,
                   dt_oracle=1e-4, seed=0, alpha=DEFAULT_ALPHA, name="norm-bessel"):
    """Two-sample KS of ‖X_T‖ against the 1-D Bessel oracle of ``dim``."""
    norm_samples = np.asarray(norm_samples, dtype=float)
    if n_oracle is None:
        n_oracle = len(norm_samples)
    rng = rngmod.stream(seed, rngmod.CHECK, 1)
    oracle, hit = bessel_em_oracle(dim, start_norm, horizon, dt_oracle,
                                   n_oracle, rng)
    res = sps.ks_2samp(norm_samples, oracle[~hit])
    mean_obs = float(np.mean(norm_samples**2))
    mean_target = start_norm**2 + dim * horizon
    se = float(np.std(norm_samples**2, ddof=1) / np.sqrt(len(norm_samples)))
    return Report(
        name=name,
        estimate=float(res.pvalue),
        stderr=None,
        tolerance=None,
        alpha=alpha,
        sample_size=len(norm_samples),
        passed=bool(res.pvalue >= alpha),
        details={
            "ks_statistic": float(res.statistic),
            "oracle_dim": dim,
            "oracle_hits": int(hit.sum()),
            "mean_sq_norm": mean_obs,
            "mean_sq_target": mean_target,
            "mean_within_3se": bool(abs(mean_obs - mean_target) <= 3 * se),
        },
    )


def moment_besq(sq_norm_samples, x0, gamma, dim, horizon, name="moment-besq"):
    """Sample mean of ‖X_T‖² against ‖x₀‖² + (n + 2γ)·T within 3 SE."""
    samples = np.asarray(sq_norm_samples, dtype=float)
    target = float(np.dot(x0, x0) + (dim + 2.0 * gamma) * horizon)
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(len(samples)))
    return Report(
        name=name,
        estimate=est,
        stderr=se,
        tolerance=3.0 * se,
        alpha=None,
        sample_size=len(samples),
        passed=abs(est - target) <= 3.0 * se,
        details={"target": target, "deviation": est - target},
    )


# ---------------------------------------------------------------------------
# projection, folding, mode equivalence


def projection_agreement(full_states, radial_states, system, *,
                         alpha=DEFAULT_ALPHA, name="projection"):
    """Coordinatewise KS between π(Y_T) and the radial X_T (Bonferroni)."""
    projected = project_batch(system, np.asarray(full_states, dtype=float))
    radial_states = np.asarray(radial_states, dtype=float)
    n = system.dimension
    pvals = [float(sps.ks_2samp(projected[:, i], radial_states[:, i]).pvalue)
             for i in range(n)]
    threshold = alpha / n
    return Report(
        name=name,
        estimate=float(min(pvals)),
        stderr=None,
        tolerance=None,
        alpha=threshold,
        sample_size=len(projected),
        passed=bool(min(pvals) >= threshold),
        details={"pvalues": pvals, "bonferroni_m": n},
    )


def default_rectangles():
    """Ten boxes inside the chamber x₁ > x₂ > 0 with useful mass at T = 1."""
    return [
        ((1.0, 1.5), (0.0, 0.9)),
        ((1.5, 2.5), (0.0, 0.7)),
        ((1.5, 2.5), (0.7, 1.4)),
        ((2.5, 3.5), (0.0, 0.8)),
        ((2.5, 3.5), (0.8, 1.6)),
        ((2.5, 3.5), (1.6, 2.4)),
        ((3.5, 4.5), (0.0, 1.0)),
        ((3.5, 4.5), (1.0, 2.0)),
        ((3.5, 4.5), (2.0, 3.0)),
        ((4.5, 6.0), (0.0, 1.5)),
    ]


def _in_rect(states, rect):
    inside = np.ones(len(states), dtype=bool)
    for axis, (lo, hi) in enumerate(rect):
        inside &= (states[:, axis] >= lo) & (states[:, axis] < hi)
    return inside


def _rect_corners(rect):
    corners = [[]]
    for lo, hi in rect:
        corners = [c + [v] for c in corners for v in (lo, hi)]
    return np.array(corners)


def folding_identity(plan, j, x0, config: SimulationConfig, *, rectangles=None,
                     seed=None, name=None, drop_reflected_mass=False,
                     threads=1):
    """Semigroup folding at stage ``j``: P^{j−1}(A) vs P^j(A) + P^j(σ_j A).

    Requires the pre-stage region to be disjoint from its reflection;
    otherwise the check is reported as skipped, not failed.  With
    ``drop_reflected_mass`` the reflected term is omitted — the negative
    control, which must fail wherever jumps carry mass out of the region.
    """
    if name is None:
        name = f"folding-j{j}"
    regions = fold_check_regions(plan, j)
    if not regions.disjoint[j - 1]:
        return Report(name=name, estimate=float("nan"), stderr=None,
                      tolerance=None, alpha=None, sample_size=0, passed=True,
                      skipped=True,
                      details={"reason": "regions not disjoint; hypothesis not met"})
    if rectangles is None:
        rectangles = default_rectangles()
    region = regions.regions[j - 1]
    for rect in rectangles:
        if not region.contains(plan.system, _rect_corners(rect)).all():
            raise InvalidArgumentError(f"rectangle {rect} leaves the pre-stage region")
    seed = config.seed if seed is None else seed
    cfg_a = SimulationConfig(horizon=config.horizon, dt=config.dt,
                             n_paths=config.n_paths,
                             seed=derived_seed(seed, f"{name}:pre"))
    cfg_b = SimulationConfig(horizon=config.horizon, dt=config.dt,
                             n_paths=config.n_paths,
                             seed=derived_seed(seed, f"{name}:post"))
    pre = simulate_dunkl(plan, x0, cfg_a, stages=j - 1, threads=threads)
    post = simulate_dunkl(plan, x0, cfg_b, stages=j, threads=threads)
    alpha_j = plan.system.positive_roots[plan.enumeration[j - 1]]
    pre_states = pre.final_states
    post_states = post.final_states
    post_reflected = reflect(alpha_j, post_states)
    worst = 0.0
    rows = []
    ok = True
    for rect in rectangles:
        p0 = float(np.mean(_in_rect(pre_states, rect)))
        in_a = _in_rect(post_states, rect)
        if not drop_reflected_mass:
            in_a = in_a | _in_rect(post_reflected, rect)
        q = float(np.mean(in_a))
        se = float(np.sqrt(p0 * (1 - p0) / len(pre_states)
                           + q * (1 - q) / len(post_states)))
        diff = abs(p0 - q)
        rect_ok = diff <= 3.0 * se if se > 0 else diff == 0.0
        ok &= rect_ok
        z = diff / se if se > 0 else (0.0 if diff == 0 else np.inf)
        worst = max(worst, z)
        rows.append({"rect": rect, "p_pre": p0, "p_post": q, "z": z, "ok": rect_ok})
    return Report(
        name=name,
        estimate=float(worst),
        stderr=None,
        tolerance=3.0,
        alpha=None,
        sample_size=config.n_paths,
        passed=bool(ok),
        details={"rectangles": rows,
                 "reflected_mass_dropped": drop_reflected_mass},
    )


def mode_equivalence(system, k, x0, root_position, config: SimulationConfig, *,
                     vectors=None, rate=None, alpha=DEFAULT_ALPHA,
                     seed=None, name="mode-equivalence", threads=1):
    """KS agreement of the shortcut and general one-root lifts at T."""
    if rate is None:
        rate = float(k.per_positive()[root_position])
    if vectors is None:
        n = system.dimension
        vectors = [np.eye(n)[0], np.eye(n)[-1], np.ones(n) / np.sqrt(n)]
    seed = config.seed if seed is None else seed
    base = radial_simulator(system, k)
    sims = {}
    for mode in ("shortcut", "general"):
        cfg = SimulationConfig(horizon=config.horizon, dt=config.dt,
                               n_paths=config.n_paths,
                               seed=derived_seed(seed, f"{name}:{mode}"))
        sim = lift_one_root(base, root_position, rate, mode)
        sims[mode] = sim.run(x0, cfg, threads=threads).final_states
    pvals = []
    for v in vectors:
        a = sims["shortcut"] @ v
        b = sims["general"] @ v
        pvals.append(float(sps.ks_2samp(a, b).pvalue))
    threshold = alpha / len(vectors)
    return Report(
        name=name,
        estimate=float(min(pvals)),
        stderr=None,
        tolerance=None,
        alpha=threshold,
        sample_size=config.n_paths,
        passed=bool(min(pvals) >= threshold),
        details={"pvalues": pvals, "rate": rate,
                 "root_position": int(root_position)},
    )


# ---------------------------------------------------------------------------
# wall-hitting profile


def wall_hitting_profile(n_paths, seed, *, ks=(0.1, 0.3, 0.45, 0.5, 0.6, 1.0),
                         x0=0.2, horizon=1.0, dt=1e-4,
                         name="wall-profile", threads=1, mislabel_shift=0):
    """Hit fractions of the rank-1 process across the k = 1/2 boundary.

    Pass: fractions nonincreasing in k, ≥ 50% at k = 0.1, ≤ 1% for
    k ≥ 0.6.  ``mislabel_shift`` rotates the simulated samples against the
    k labels — the negative control (simulating k = 1 data into the
    k = 0.1 slot must break the profile).
    """
    system = build_rank_one()
    fractions = []
    stepfail = []
    for i, kval in enumerate(ks):
        k_sim = ks[(i + mislabel_shift) % len(ks)]
        cfg = SimulationConfig(horizon=horizon, dt=dt, n_paths=n_paths,
                               seed=derived_seed(seed, f"{name}:{i}"))
        run = run_radial(system, multiplicity(system, k_sim), [x0], cfg,
                         record=False, threads=threads)
        fractions.append(run.hit_fraction)
        stepfail.append(float(np.mean(run.termination == "step_failure")))
    fractions = np.array(fractions)
    nonincreasing = bool(np.all(np.diff(fractions) <= 0))
    low_k_ok = bool(fractions[0] >= 0.5)
    high_k_ok = bool(np.all(fractions[np.asarray(ks) >= 0.6] <= 0.01))
    return Report(
        name=name,
        estimate=float(fractions[0]),
        stderr=None,
        tolerance=None,
        alpha=None,
        sample_size=n_paths,
        passed=nonincreasing and low_k_ok and high_k_ok,
        details={
            "k_values": list(ks),
            "hit_fractions": fractions.tolist(),
            "step_failure_fractions": stepfail,
            "nonincreasing": nonincreasing,
            "low_k_ok": low_k_ok,
            "high_k_ok": high_k_ok,
        },
    )


# ---------------------------------------------------------------------------
# rotational covariance


def haar_orthogonal(n, rng):
    """Haar-distributed orthogonal matrix via sign-fixed QR."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _random_smooth_function(rng, n):
    w1 = rng.standard_normal(n)
    w2 = rng.standard_normal(n)
    b = rng.standard_normal()
    c = rng.standard_normal(3)

    def fn(x):
        return (c[0] * np.sin(x @ w1 + b)
                + c[1] * np.cos(x @ w2)
                + c[2] * np.exp(-0.1 * np.einsum("...i,...i->...", x, x)))

    return TestFunction(fn=fn, name="random_smooth")


def _random_offwall_point(rng, system, min_dot=0.2):
    while True:
        x = 1.5 * rng.standard_normal(system.dimension)
        if np.min(np.abs(system.positive_roots @ x)) > min_dot:
            return x


def rotation_covariance_generator(system, k, *, trials=50, seed=0, tol=1e-6,
                                  wrong_transport=False, name="rotate-generator"):
    """Deterministic identity L^{θR}_{k_θ} u(θx) = L^R_k (u∘θ)(x).

    The residual is compared against ``tol`` times the generator's own
    term-magnitude scale.  With ``wrong_transport`` the orbit values of
    k_θ are rotated by one position (meaningful on multi-orbit systems):
    the negative control.
    """
    rng = rngmod.stream(seed, rngmod.CHECK, 2)
    spec = GeneratorSpec.full(system, k)
    worst = 0.0
    for _ in range(trials):
        theta = haar_orthogonal(system.dimension, rng)
        u = _random_smooth_function(rng, system.dimension)
        x = _random_offwall_point(rng, system)
        rotated = rotate_spec(spec, theta)
        if wrong_transport:
            vals = rotated.k.by_orbit
            wrong = Multiplicity(system=rotated.system,
                                 by_orbit=vals[1:] + vals[:1])
            rotated = GeneratorSpec(system=rotated.system, k=wrong,
                                    jump_k=None, active=rotated.active)
        u_theta = TestFunction(lambda y, u=u, th=theta: u(y @ th.T),
                               name="u∘θ")
        lhs = apply_generator(rotated, u, theta @ x)
        rhs = apply_generator(spec, u_theta, x)
        scale = generator_scale(rotated, u, theta @ x) + 1e-30
        worst = max(worst, float(abs(lhs - rhs) / scale))
    return Report(
        name=name,
        estimate=worst,
        stderr=None,
        tolerance=tol,
        alpha=None,
        sample_size=trials,
        passed=worst <= tol,
        details={"wrong_transport": wrong_transport},
    )


def rotation_covariance_paths(system, k, x0, config: SimulationConfig, *,
                              seed=None, alpha=DEFAULT_ALPHA,
                              name="rotate-paths", threads=1):
    """Statistical check: θ·paths(k, R, x0) vs paths(k_θ, θR, θx0) at T."""
    seed = config.seed if seed is None else seed
    rng = rngmod.stream(seed, rngmod.CHECK, 3)
    theta = haar_orthogonal(system.dimension, rng)
    x0 = np.asarray(x0, dtype=float)

    plan = build_lift_plan(system, k, mode="auto")
    cfg_a = SimulationConfig(horizon=config.horizon, dt=config.dt,
                             n_paths=config.n_paths,
                             seed=derived_seed(seed, f"{name}:base"))
    base = simulate_dunkl(plan, x0, cfg_a, threads=threads)
    rotated_states = base.final_states @ theta.T

    rot_system = rotate_system(system, theta)
    rot_k = Multiplicity(system=rot_system, by_orbit=k.by_orbit)
    rot_plan = build_lift_plan(rot_system, rot_k, mode="auto")
    cfg_b = SimulationConfig(horizon=config.horizon, dt=config.dt,
                             n_paths=config.n_paths,
                             seed=derived_seed(seed, f"{name}:rotated"))
    other = simulate_dunkl(rot_plan, theta @ x0, cfg_b, threads=threads)

    n = system.dimension
    pvals = [float(sps.ks_2samp(rotated_states[:, i],
                                other.final_states[:, i]).pvalue)
             for i in range(n)]
    threshold = alpha / n
    return Report(
        name=name,
        estimate=float(min(pvals)),
        stderr=None,
        tolerance=None,
        alpha=threshold,
        sample_size=config.n_paths,
        passed=bool(min(pvals) >= threshold),
        details={"pvalues": pvals},
    )


# ---------------------------------------------------------------------------
# harmonicity spot check


def harmonicity_check(system, k, *, n_points=100, seed=0, tol=1e-5,
                      which="delta", name=None, margin=0.3):
    """Max relative residual of a harmonicity identity at random points."""
    if name is None:
        name = f"harmonic-{which}"
    rng = rngmod.stream(seed, rngmod.CHECK, 4)
    pts = sample_interior_points(system, n_points, rng, margin=margin)
    res, scale = harmonicity_residual(system, k, which, pts)
    worst = float(np.max(np.abs(res) / scale))
    return Report(
        name=name,
        estimate=worst,
        stderr=None,
        tolerance=tol,
        alpha=None,
        sample_size=n_points,
        passed=worst <= tol,
        details={"which": which},
    )


# ---------------------------------------------------------------------------
# the assembled battery


def run_suite(system, k, x0, *, horizon=1.0, dt=1e-3, n_paths=2000,
              seed=0, k_prime=None, threads=1, include_controls=True,
              martingale_paths=None):
    """Run the full verification battery for one (system, k, x₀) setup.

    Returns a list of reports.  Controls (deliberately mismatched pairs)
    carry a ":control" suffix and pass exactly when the underlying check
    fails, so a fully green list means the checks verify what they claim.
    """
    reports = []
    x0 = np.asarray(x0, dtype=float)
    n = system.dimension
    gamma = k.gamma
    dim_besq = n + 2.0 * gamma
    if martingale_paths is None:
        martingale_paths = max(800, n_paths // 2)

    # deterministic identities
    reports.append(_timed(harmonicity_check, system, k, which="delta",
                          seed=derived_seed(seed, "harmonic-delta")))
    if 0.5 in k.by_orbit:
        reports.append(_timed(harmonicity_check, system, k, which="delta_bar",
                              seed=derived_seed(seed, "harmonic-deltabar")))
    reports.append(_timed(harmonicity_check, system, k, which="pi", tol=1e-6,
                          seed=derived_seed(seed, "harmonic-pi")))
    reports.append(_timed(harmonicity_check, system, 0.8, which="pi_power",
                          tol=1e-6, seed=derived_seed(seed, "harmonic-pipow"),
                          name="harmonic-pi_power"))

    # simulations reused across checks
    cfg_radial = SimulationConfig(horizon=horizon, dt=dt, n_paths=n_paths,
                                  seed=derived_seed(seed, "radial"))
    radial = run_radial(system, k, x0, cfg_radial, record=False, threads=threads)
    plan = build_lift_plan(system, k, mode="auto")
    cfg_full = SimulationConfig(horizon=horizon, dt=dt, n_paths=n_paths,
                                seed=derived_seed(seed, "full"))
    full = simulate_dunkl(plan, x0, cfg_full, threads=threads)

    sq = np.einsum("ij,ij->i", radial.final_states, radial.final_states)
    t0 = time.perf_counter()
    rep = moment_besq(sq, x0, gamma, n, horizon, name="moment-besq-radial")
    rep.runtime = time.perf_counter() - t0
    reports.append(rep)

    radial_norms = np.sqrt(sq)
    full_norms = np.linalg.norm(full.final_states, axis=1)
    reports.append(_timed(
        norm_is_bessel, radial_norms, dim_besq, float(np.linalg.norm(x0)),
        horizon, seed=derived_seed(seed, "bessel-radial"), name="ks-norm-radial"))
    reports.append(_timed(
        norm_is_bessel, full_norms, dim_besq, float(np.linalg.norm(x0)),
        horizon, seed=derived_seed(seed, "bessel-full"), name="ks-norm-full"))
    if include_controls:
        ctrl = _timed(
            norm_is_bessel, radial_norms, dim_besq - 1.0,
            float(np.linalg.norm(x0)), horizon,
            seed=derived_seed(seed, "bessel-ctrl"), name="ks-norm:control")
        ctrl.passed = not ctrl.passed
        ctrl.details["expected"] = "off-by-one dimension must be rejected"
        reports.append(ctrl)

    # projection agreement
    rep = _timed(projection_agreement, full.final_states, radial.final_states,
                 system, name="projection-agreement")
    reports.append(rep)
    if include_controls:
        k_wrong = multiplicity(system, [v + 0.5 for v in k.by_orbit])
        cfg_w = SimulationConfig(horizon=horizon, dt=dt, n_paths=n_paths,
                                 seed=derived_seed(seed, "radial-wrong"))
        radial_wrong = run_radial(system, k_wrong, x0, cfg_w, record=False,
                                  threads=threads)
        ctrl = _timed(projection_agreement, full.final_states,
                      radial_wrong.final_states, system,
                      name="projection:control")
        ctrl.passed = not ctrl.passed
        ctrl.details["expected"] = "mismatched multiplicity must be rejected"
        reports.append(ctrl)

    # skew-product mode equivalence on the first shortcut-eligible stage
    first_ok = next((i for i, md in enumerate(plan.modes) if md == "shortcut"),
                    None)
    if first_ok == 0:
        reports.append(_timed(
            mode_equivalence, system, k, x0, plan.enumeration[0],
            SimulationConfig(horizon=horizon, dt=dt, n_paths=n_paths,
                             seed=derived_seed(seed, "modes")),
            threads=threads))

    # folding at the first disjoint stage
    regions = fold_check_regions(plan)
    fold_j = next((j for j in range(1, plan.n_stages + 1)
                   if regions.disjoint[j - 1]), None)
    if fold_j is not None and n == 2:
        cfg_fold = SimulationConfig(horizon=horizon, dt=dt, n_paths=n_paths,
                                    seed=derived_seed(seed, "folding"))
        reports.append(_timed(folding_identity, plan, fold_j, x0, cfg_fold,
                              threads=threads))
        if include_controls:
            ctrl = _timed(folding_identity, plan, fold_j, x0, cfg_fold,
                          drop_reflected_mass=True,
                          name=f"folding-j{fold_j}:control", threads=threads)
            ctrl.passed = not ctrl.passed
            ctrl.details["expected"] = "dropping reflected mass must be rejected"
            reports.append(ctrl)

    # wall-hitting profile (rank-1, fixed setup)
    reports.append(_timed(wall_hitting_profile, max(800, n_paths // 4),
                          derived_seed(seed, "wall"), threads=threads))
    if include_controls:
        ctrl = _timed(wall_hitting_profile, max(800, n_paths // 4),
                      derived_seed(seed, "wall-ctrl"), mislabel_shift=5,
                      name="wall-profile:control", threads=threads)
        ctrl.passed = not ctrl.passed
        ctrl.details["expected"] = "mislabeled simulations must break the profile"
        reports.append(ctrl)

    # rotational covariance
    reports.append(_timed(rotation_covariance_generator, system, k,
                          seed=derived_seed(seed, "rotgen")))
    if include_controls and len(system.orbits) >= 2 and len(set(k.by_orbit)) > 1:
        ctrl = _timed(rotation_covariance_generator, system, k,
                      seed=derived_seed(seed, "rotgen-ctrl"),
                      wrong_transport=True, name="rotate-generator:control")
        ctrl.passed = not ctrl.passed
        ctrl.details["expected"] = "untransported multiplicity must be rejected"
        reports.append(ctrl)
    reports.append(_timed(
        rotation_covariance_paths, system, k, x0,
        SimulationConfig(horizon=horizon, dt=dt,
                         n_paths=max(1000, n_paths // 2),
                         seed=derived_seed(seed, "rotpaths")),
        threads=threads))

    # martingale residual battery
    bias_c = calibrate_bias_coefficient(system, horizon, 4000,
                                        derived_seed(seed, "bias"))
    allowance = bias_c * dt
    battery = function_battery(n)
    cfg_m = SimulationConfig(horizon=horizon, dt=dt, n_paths=martingale_paths,
                             seed=derived_seed(seed, "mart"))
    radial_paths = run_radial(system, k, x0, cfg_m, record=True,
                              threads=threads).trajectories
    cfg_mf = SimulationConfig(horizon=horizon, dt=dt, n_paths=martingale_paths,
                              seed=derived_seed(seed, "mart-full"))
    full_paths = simulate_dunkl(plan, x0, cfg_mf, threads=threads).trajectories
    if k_prime is None:
        k_prime = multiplicity(system, [v + 0.5 for v in k.by_orbit])
    plan_kp = build_lift_plan(system, k, rates=k_prime, mode="auto")
    cfg_mk = SimulationConfig(horizon=horizon, dt=dt, n_paths=martingale_paths,
                              seed=derived_seed(seed, "mart-kp"))
    kp_paths = simulate_dunkl(plan_kp, x0, cfg_mk, threads=threads).trajectories

    spec_radial = GeneratorSpec.radial(system, k)
    spec_full = GeneratorSpec.full(system, k)
    spec_kp = GeneratorSpec.full(system, k, jump_k=k_prime)
    for u in battery:
        for tag, paths, spec in [("radial", radial_paths, spec_radial),
                                 ("full", full_paths, spec_full),
                                 ("two-param", kp_paths, spec_kp)]:
            reports.append(_timed(
                martingale_residual, lambda p=paths: p, spec, u,
                bias_allowance=allowance,
                name=f"martingale-{tag}-{u.name}"))
    if include_controls:
        ctrl = _timed(
            martingale_residual, lambda: full_paths, spec_radial,
            control_function(n), bias_allowance=allowance,
            name="martingale:control")
        ctrl.passed = not ctrl.passed
        ctrl.details["expected"] = "full paths against the radial generator must fail"
        reports.append(ctrl)
    for r in reports:
        if "bias" not in r.details and r.name.startswith("martingale"):
            r.details["bias_coefficient"] = bias_c
    return reports


def suite_passed(reports):
    return all(r.passed for r in reports if not r.skipped)
