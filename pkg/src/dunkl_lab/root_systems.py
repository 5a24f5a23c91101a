"""Root systems, Weyl groups, chambers, and multiplicity functions.

All roots are stored in the normalization α·α = 2, so the reflection across
the hyperplane orthogonal to α takes the short form σ_α(x) = x − (α·x)α.
A (reduced) root system is a finite set R ⊂ ℝⁿ \\ {0} with R ∩ ℝα = {±α}
and σ_α(R) = R for every α ∈ R; the Weyl group is the finite group
generated by the reflections σ_α.

Roots are stored positives first, so ``roots[positive]`` is the default
enumeration (α_1, …, α_m) of the positive subsystem.  For the type-B
builder that order matches the conventional one: difference roots, then
sum roots, then the rescaled axis roots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDirectionError,
    GroupCapExceededError,
    InvalidArgumentError,
)

ROOT_MATCH_TOL = 1e-9     # entrywise tolerance for identifying two roots
GROUP_DEDUP_TOL = 1e-9    # max-entry tolerance for identifying group elements
NORM_TOL = 1e-12          # tolerance on α·α = 2
DEFAULT_BOUNDARY_TOL = 1e-12
WEYL_GROUP_CAP = 10**6


def reflect(alpha, x):
    """Reflection σ_α(x) = x − (α·x)α for a root with α·α = 2.

    ``x`` may carry leading batch axes; the last axis is the coordinate
    axis.  Involutive and norm preserving.
    """
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    return x - np.multiply.outer(x @ alpha, alpha)


def reflection_matrix(alpha):
    """Matrix of σ_α, i.e. I − α αᵀ in the α·α = 2 normalization."""
    alpha = np.asarray(alpha, dtype=float)
    return np.eye(alpha.shape[0]) - np.outer(alpha, alpha)


def normalize_roots(raw_roots):
    """Rescale each root to α·α = 2.

    Rescaling commutes with reflections, so a reflection-closed set stays
    reflection-closed.  Raises on a zero vector.
    """
    roots = np.atleast_2d(np.asarray(raw_roots, dtype=float))
    norms = np.linalg.norm(roots, axis=1)
    if np.any(norms == 0.0):
        raise InvalidArgumentError("zero vector cannot be a root")
    return roots * (np.sqrt(2.0) / norms)[:, None]


def _match_root(roots, v, tol=ROOT_MATCH_TOL):
    """Index of ``v`` in ``roots`` up to entrywise tolerance, or -1."""
    dist = np.max(np.abs(roots - v), axis=1)
    i = int(np.argmin(dist))
    return i if dist[i] <= tol else -1


def _dedup_key(mat, tol=GROUP_DEDUP_TOL):
    # adding 0.0 maps -0.0 to +0.0 so keys are sign-of-zero stable
    decimals = int(round(-np.log10(tol)))
    return (np.round(np.asarray(mat), decimals) + 0.0).tobytes()


@dataclass(frozen=True)
class RootSystem:
    """Immutable root-system data: roots, positive subsystem, Weyl group, orbits.

    ``roots`` has shape (2m, n) with the m positive roots first;
    ``positive`` indexes them; ``weyl_group`` stacks orthogonal matrices in
    their deterministic closure-discovery order (identity first);
    ``orbits`` partitions root indices into Weyl orbits.
    """

    dimension: int
    roots: np.ndarray
    positive: np.ndarray
    weyl_group: np.ndarray
    orbits: tuple

    def __post_init__(self):
        for name in ("roots", "positive", "weyl_group"):
            getattr(self, name).setflags(write=False)

    @property
    def positive_roots(self):
        return self.roots[self.positive]

    @property
    def n_positive(self):
        return len(self.positive)

    def orbit_of_root(self, root_index):
        for i, orbit in enumerate(self.orbits):
            if root_index in orbit:
                return i
        raise InvalidArgumentError(f"no orbit contains root {root_index}")

    def positive_orbit_index(self):
        """Orbit index of each positive root, aligned with ``positive``."""
        return np.array([self.orbit_of_root(int(r)) for r in self.positive])


def validate_root_system(roots, norm_tol=NORM_TOL, match_tol=ROOT_MATCH_TOL):
    """Check the root-system axioms; raise ``InvalidArgumentError`` on failure."""
    roots = np.atleast_2d(np.asarray(roots, dtype=float))
    if roots.size == 0:
        raise InvalidArgumentError("empty root set")
    sq = np.einsum("ij,ij->i", roots, roots)
    if np.any(np.abs(sq - 2.0) > norm_tol):
        raise InvalidArgumentError("roots must satisfy α·α = 2; run normalize_roots first")
    for i, alpha in enumerate(roots):
        dup = np.max(np.abs(roots - alpha), axis=1) <= match_tol
        if dup.sum() != 1:
            raise InvalidArgumentError("duplicate root detected")
        if _match_root(roots, -alpha, match_tol) < 0:
            raise InvalidArgumentError(f"root {i}: −α missing (R ∩ ℝα = {{±α}} fails)")
    # closure under its own reflections
    for alpha in roots:
        images = reflect(alpha, roots)
        for j, im in enumerate(images):
            if _match_root(roots, im, match_tol) < 0:
                raise InvalidArgumentError(
                    f"reflection closure fails: σ_α({roots[j]}) not in R"
                )


def positive_subsystem(roots, beta):
    """Indices of the positive subsystem {α : α·β > 0}, in storage order.

    Raises ``DegenerateDirectionError`` when β lies on a reflecting
    hyperplane, since the split is then ill defined.
    """
    roots = np.atleast_2d(np.asarray(roots, dtype=float))
    beta = np.asarray(beta, dtype=float)
    dots = roots @ beta
    if np.any(dots == 0.0):
        raise DegenerateDirectionError("β is orthogonal to a root")
    return np.nonzero(dots > 0.0)[0]


def generate_weyl_group(roots, cap=WEYL_GROUP_CAP):
    """Breadth-first closure of the reflections σ_α under composition.

    Deterministic element order: identity, then discovery order when
    multiplying by the generators in root order.  Raises
    ``GroupCapExceededError`` if the closure exceeds ``cap`` elements,
    which guards against accidental non-root input.
    """
    roots = np.atleast_2d(np.asarray(roots, dtype=float))
    n = roots.shape[1]
    gens = [reflection_matrix(a) for a in roots]
    identity = np.eye(n)
    elements = [identity]
    seen = {_dedup_key(identity)}
    frontier = [identity]
    while frontier:
        new_frontier = []
        for w in frontier:
            for g in gens:
                cand = g @ w
                key = _dedup_key(cand)
                if key not in seen:
                    seen.add(key)
                    elements.append(cand)
                    new_frontier.append(cand)
                    if len(elements) > cap:
                        raise GroupCapExceededError(
                            f"reflection closure exceeded {cap} elements"
                        )
        frontier = new_frontier
    return np.stack(elements)


def orbit_decomposition(roots, weyl_group, match_tol=ROOT_MATCH_TOL):
    """Partition root indices into Weyl orbits (sorted, smallest index first)."""
    roots = np.atleast_2d(np.asarray(roots, dtype=float))
    unassigned = set(range(len(roots)))
    orbits = []
    while unassigned:
        start = min(unassigned)
        members = set()
        for w in weyl_group:
            j = _match_root(roots, w @ roots[start], match_tol)
            if j < 0:
                raise InvalidArgumentError("Weyl group does not map R onto R")
            members.add(j)
        orbits.append(tuple(sorted(members)))
        unassigned -= members
    return tuple(orbits)


def build_root_system(raw_roots, beta=None, cap=WEYL_GROUP_CAP):
    """Assemble a validated ``RootSystem`` from a full set of raw roots.

    Roots are rescaled to α·α = 2 and reordered positives-first using the
    direction ``beta`` (default: the generic vector (n, n−1, …, 1)).
    """
    roots = normalize_roots(raw_roots)
    validate_root_system(roots)
    n = roots.shape[1]
    if beta is None:
        beta = np.arange(n, 0, -1, dtype=float)
    pos = positive_subsystem(roots, beta)
    neg = np.array([_match_root(roots, -roots[i]) for i in pos])
    ordered = np.concatenate([roots[pos], roots[neg]])
    m = len(pos)
    weyl = generate_weyl_group(ordered, cap=cap)
    orbits = orbit_decomposition(ordered, weyl)
    return RootSystem(
        dimension=n,
        roots=ordered,
        positive=np.arange(m),
        weyl_group=weyl,
        orbits=orbits,
    )


def _from_ordered(positive_roots, cap=WEYL_GROUP_CAP):
    """System from an explicitly ordered positive list (negatives appended)."""
    pos = np.asarray(positive_roots, dtype=float)
    ordered = np.concatenate([pos, -pos])
    validate_root_system(ordered)
    weyl = generate_weyl_group(ordered, cap=cap)
    orbits = orbit_decomposition(ordered, weyl)
    return RootSystem(
        dimension=pos.shape[1],
        roots=ordered,
        positive=np.arange(len(pos)),
        weyl_group=weyl,
        orbits=orbits,
    )


def build_type_a(n):
    """Type A_{n−1} in ℝⁿ: roots e_i − e_j, chamber x_1 > x_2 > … > x_n.

    Positive roots are ordered lexicographically by (i, j), i < j.
    """
    if n < 2:
        raise InvalidArgumentError("type A needs n ≥ 2")
    eye = np.eye(n)
    pos = [eye[i] - eye[j] for i in range(n) for j in range(i + 1, n)]
    return _from_ordered(np.array(pos))


def build_type_b(n):
    """Type B_n with short roots rescaled: ±(e_i ± e_j) and ±√2 e_i.

    The rescaling puts every root on norm² = 2 so σ_α(x) = x − (α·x)α holds
    verbatim.  Positive order: differences e_i − e_j, sums e_i + e_j, then
    axis roots √2 e_i — for n = 2 this is the enumeration
    (e₁−e₂, e₁+e₂, √2e₁, √2e₂).  Chamber: x_1 > … > x_n > 0.  Two orbits:
    orbit 0 holds the ±e_i±e_j ("long") roots, orbit 1 the axis ("short")
    roots.
    """
    if n < 2:
        raise InvalidArgumentError("type B needs n ≥ 2")
    eye = np.eye(n)
    pos = [eye[i] - eye[j] for i in range(n) for j in range(i + 1, n)]
    pos += [eye[i] + eye[j] for i in range(n) for j in range(i + 1, n)]
    pos += [np.sqrt(2.0) * eye[i] for i in range(n)]
    return _from_ordered(np.array(pos))


def build_rank_one():
    """The rank-1 system {±√2 e₁} on the line; chamber x > 0."""
    return _from_ordered(np.array([[np.sqrt(2.0)]]))


def chamber_contains(positive_roots, x, tol=DEFAULT_BOUNDARY_TOL):
    """Classify ``x`` against C = {y : y·α > 0 ∀α ∈ R₊}.

    Returns "interior", "boundary", or "exterior".  Boundary means at
    least one wall product within ``tol`` of zero and none below −tol.
    """
    dots = np.asarray(positive_roots, dtype=float) @ np.asarray(x, dtype=float)
    if np.all(dots > tol):
        return "interior"
    if np.all(dots >= -tol):
        return "boundary"
    return "exterior"


def project_to_chamber(system, x, tol=DEFAULT_BOUNDARY_TOL):
    """Chamber representative of the W-orbit of ``x``.

    Returns ``(w·x, w)`` for the first group element (in the canonical
    closure order) with w·x in the closed chamber; the fixed order makes
    boundary ties deterministic.
    """
    x = np.asarray(x, dtype=float)
    pos = system.positive_roots
    for w in system.weyl_group:
        y = w @ x
        if np.all(pos @ y >= -tol):
            return y, w
    raise RuntimeError("no chamber representative found; corrupt Weyl group")


def project_batch(system, states, tol=DEFAULT_BOUNDARY_TOL):
    """Vectorized ``project_to_chamber`` over rows of ``states`` (N, n)."""
    states = np.asarray(states, dtype=float)
    out = np.empty_like(states)
    pending = np.ones(len(states), dtype=bool)
    pos_t = system.positive_roots.T
    for w in system.weyl_group:
        if not pending.any():
            break
        cand = states[pending] @ w.T
        ok = np.all(cand @ pos_t >= -tol, axis=1)
        idx = np.nonzero(pending)[0][ok]
        out[idx] = cand[ok]
        pending[idx] = False
    if pending.any():
        raise RuntimeError("no chamber representative found; corrupt Weyl group")
    return out


def check_invariance_condition(system, i, enumeration=None, tol=ROOT_MATCH_TOL):
    """Whether σ_{α_i} maps {±α_1, …, ±α_{i−1}} onto itself.

    ``i`` is 1-based (1 ≤ i ≤ m) to match the usual enumeration of R₊;
    ``enumeration`` lists positions into the positive order (default: the
    stored order).  Stages 1 and m are always invariant.
    """
    m = system.n_positive
    enumeration = _as_enumeration(system, enumeration)
    if not 1 <= i <= m:
        raise InvalidArgumentError(f"stage index {i} out of range 1..{m}")
    pos = system.positive_roots
    alpha_i = pos[enumeration[i - 1]]
    prev = pos[list(enumeration[: i - 1])]
    if len(prev) == 0:
        return True
    prev_full = np.concatenate([prev, -prev])
    images = reflect(alpha_i, prev_full)
    return all(_match_root(prev_full, im, tol) >= 0 for im in images)


def _as_enumeration(system, enumeration):
    m = system.n_positive
    if enumeration is None:
        return tuple(range(m))
    enumeration = tuple(int(e) for e in enumeration)
    if not all(0 <= e < m for e in enumeration):
        raise InvalidArgumentError("enumeration entries must index positive roots")
    if len(set(enumeration)) != len(enumeration):
        raise InvalidArgumentError("enumeration repeats a root")
    return enumeration


@dataclass(frozen=True)
class Multiplicity:
    """W-invariant multiplicity function: one nonnegative value per orbit.

    Constancy on orbits is structural (values are stored per orbit), which
    is exactly the W-invariance k∘w = k.
    """

    system: RootSystem
    by_orbit: tuple

    def __post_init__(self):
        if len(self.by_orbit) != len(self.system.orbits):
            raise InvalidArgumentError(
                f"need {len(self.system.orbits)} orbit values, got {len(self.by_orbit)}"
            )
        if any(not np.isfinite(v) or v < 0 for v in self.by_orbit):
            raise InvalidArgumentError("multiplicity values must be finite and ≥ 0")

    def of_root(self, root_index):
        return self.by_orbit[self.system.orbit_of_root(root_index)]

    def per_positive(self):
        """Values aligned with the positive enumeration, shape (m,)."""
        vals = np.asarray(self.by_orbit, dtype=float)
        return vals[self.system.positive_orbit_index()]

    @property
    def gamma(self):
        """γ = Σ_{α ∈ R₊} k(α), summed over the stored orbit values."""
        return float(np.sum(self.per_positive()))

    @property
    def min_value(self):
        return float(min(self.by_orbit))


def multiplicity(system, values):
    """Build a ``Multiplicity`` from a scalar, per-orbit sequence, or mapping."""
    n_orbits = len(system.orbits)
    if np.isscalar(values):
        by_orbit = (float(values),) * n_orbits
    elif isinstance(values, dict):
        per_orbit = {int(k): float(v) for k, v in values.items()}
        missing = set(range(n_orbits)) - set(per_orbit)
        if missing:
            raise InvalidArgumentError(f"missing multiplicity for orbits {sorted(missing)}")
        by_orbit = tuple(per_orbit[k] for k in sorted(per_orbit))
    else:
        by_orbit = tuple(float(v) for v in values)
    return Multiplicity(system=system, by_orbit=by_orbit)


def system_to_dict(system):
    """JSON-ready document: {dimension, roots, positive, orbits}.

    Coordinates serialize as exact shortest-roundtrip decimals (√2 becomes
    1.4142135623730951); the Weyl group is regenerated on load.
    """
    return {
        "dimension": int(system.dimension),
        "roots": [[float(c) for c in row] for row in system.roots],
        "positive": [int(i) for i in system.positive],
        "orbits": [[int(i) for i in orbit] for orbit in system.orbits],
    }


def system_from_dict(doc, cap=WEYL_GROUP_CAP):
    roots = np.asarray(doc["roots"], dtype=float)
    validate_root_system(roots)
    positive = np.asarray(doc["positive"], dtype=int)
    if roots.shape[1] != int(doc["dimension"]):
        raise InvalidArgumentError("dimension does not match root coordinates")
    if len(set(int(i) for i in positive)) != len(positive):
        raise InvalidArgumentError("positive indices repeat")
    seen = set()
    for i in positive:
        j = _match_root(roots, -roots[i])
        if j < 0 or j in seen:
            raise InvalidArgumentError("positive indices must pick one of each ±α pair")
        seen.add(int(i))
    if 2 * len(positive) != len(roots):
        raise InvalidArgumentError("positive must select exactly half of the roots")
    weyl = generate_weyl_group(roots, cap=cap)
    orbits = orbit_decomposition(roots, weyl)
    declared = tuple(tuple(sorted(int(i) for i in orbit)) for orbit in doc["orbits"])
    if tuple(sorted(declared)) != tuple(sorted(orbits)):
        raise InvalidArgumentError("declared orbits disagree with the Weyl action")
    return RootSystem(
        dimension=roots.shape[1],
        roots=roots,
        positive=positive,
        weyl_group=weyl,
        orbits=orbits,
    )


def system_to_json(system, **kwargs):
    return json.dumps(system_to_dict(system), **kwargs)


def system_from_json(text):
    return system_from_dict(json.loads(text))
