"""Counterfactual search: find x' near x with f(x') close to a target score.

The solver minimizes ``lambda * (f(x') - target)^2 + d(x, x')`` over x' with
the model weights held fixed, re-solving with an increasing lambda until the
achieved score lands within tolerance of the target. Runs restart from
randomly perturbed copies of the original point; categorical features can be
handled by clamping them to each assignment in turn and keeping the closest
converged run ("hybrid" mode).

All candidate coordinates live in the model's input space (standardized
features); distances are always evaluated in original units through the
supplied FeatureSpace.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSpace
from .distances import DistanceSpec, distance
from .model import MlpModel

# reporting threshold on the standardized scale: deltas at or below this are
# optimizer dust, not changes
CHANGE_THRESHOLD = 1e-3

# minimum pairwise distance (under the query's own metric) for two
# counterfactuals to count as diverse
DEDUP_DELTA = 0.1

# cartesian clamp runs are capped; lock features to get under the limit
MAX_CLAMP_COMBINATIONS = 32

RESTART_NOISE_SIGMA = 0.5

ONE_WAY_CAVEAT = (
    "A counterfactual that changes a protected attribute shows the decision "
    "depends on it; the converse does not hold - counterfactuals that leave "
    "the attribute alone are NOT evidence of independence."
)


class SearchConfigError(ValueError):
    """Query is inconsistent with the schema or guard limits."""


@dataclass
class LambdaSchedule:
    """Increasing-penalty schedule for the score-gap term."""

    lambda_init: float = 0.1
    growth_factor: float = 2.0
    max_rounds: int = 30
    inner_steps: int = 200
    adam_step_size: float = 0.05

    def validate(self):
        if self.lambda_init <= 0 or self.growth_factor <= 1:
            raise SearchConfigError("need lambda_init > 0 and growth_factor > 1")
        if self.max_rounds < 1 or self.inner_steps < 1:
            raise SearchConfigError("need at least one round and one inner step")


@dataclass
class CfQuery:
    x_original: np.ndarray
    target_score: float
    distance: DistanceSpec
    locked_features: frozenset = frozenset()
    n_restarts: int = 4
    n_diverse: int = 1
    tolerance_eps: float = 0.01
    cap_to_training_range: bool = False
    rng_seed: int = 0
    schedule: LambdaSchedule = field(default_factory=LambdaSchedule)

    def __post_init__(self):
        self.x_original = np.asarray(self.x_original, dtype=float)
        self.locked_features = frozenset(self.locked_features)
        if self.tolerance_eps <= 0:
            raise SearchConfigError("tolerance_eps must be positive")
        if self.n_restarts < 1 or self.n_diverse < 1:
            raise SearchConfigError("n_restarts and n_diverse must be positive")
        self.schedule.validate()

    def to_doc(self) -> dict:
        return {
            "x_original": self.x_original.tolist(),
            "target_score": self.target_score,
            "distance_kind": self.distance.kind,
            "locked_features": sorted(self.locked_features),
            "n_restarts": self.n_restarts,
            "n_diverse": self.n_diverse,
            "tolerance_eps": self.tolerance_eps,
            "cap_to_training_range": self.cap_to_training_range,
            "rng_seed": self.rng_seed,
        }


@dataclass
class Counterfactual:
    x_prime: np.ndarray
    achieved_score: float
    distance_value: float
    changed: list[tuple[str, float, float]]
    restart_seed: int
    clamp_assignment: dict[str, int] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    converged: bool = True

    def to_doc(self) -> dict:
        return {
            "converged": True,
            "x_prime": self.x_prime.tolist(),
            "achieved_score": self.achieved_score,
            "distance": self.distance_value,
            "changed": [
                {"feature": name, "old": old, "new": new}
                for name, old, new in self.changed
            ],
            "clamp_assignment": dict(self.clamp_assignment),
            "restart_seed": self.restart_seed,
            "diagnostics": self.diagnostics,
        }


@dataclass
class NotConverged:
    """Best-effort point after the schedule ran out; never silently accepted."""

    x_prime: np.ndarray
    achieved_score: float
    target_score: float
    distance_value: float
    rounds: int
    message: str = ""

    converged: bool = False

    def to_doc(self) -> dict:
        return {
            "converged": False,
            "best_effort_x_prime": self.x_prime.tolist(),
            "achieved_score": self.achieved_score,
            "target_score": self.target_score,
            "distance": self.distance_value,
            "rounds": self.rounds,
            "message": self.message,
        }


@dataclass
class DependenceReport:
    flags: dict[str, bool]
    caveat: str = ONE_WAY_CAVEAT


# -- objective ---------------------------------------------------------------


def objective(model: MlpModel, x_prime, query: CfQuery, lam: float,
              space: FeatureSpace | None = None) -> float:
    """The penalized objective at an original-unit candidate point."""
    space = space or FeatureSpace.identity(query.x_original.shape[0])
    x_prime = np.asarray(x_prime, dtype=float)
    score = model.forward(space.to_model(x_prime))
    gap = score - query.target_score
    return lam * gap * gap + distance(query.distance, query.x_original, x_prime)


# -- model-space distance helpers ---------------------------------------------


def _distance_terms(query: CfQuery, space: FeatureSpace):
    """Per-feature scale and divisor so d can be evaluated on model coords."""
    n = query.x_original.shape[0]
    return space.unit_scale(), query.distance.weights(n)


def _dist_model(dz: np.ndarray, kind: str, scale: np.ndarray, w: np.ndarray) -> np.ndarray:
    dx = dz * scale
    if kind == "mad_weighted_l1":
        return np.sum(np.abs(dx) / w, axis=-1)
    return np.sum(dx * dx / w, axis=-1)


def _dist_grad_model(dz: np.ndarray, kind: str, scale: np.ndarray, w: np.ndarray) -> np.ndarray:
    if kind == "mad_weighted_l1":
        return np.sign(dz) * scale / w
    return 2.0 * dz * scale * scale / w


# -- the core solver -----------------------------------------------------------


def _validate_query(query: CfQuery, space: FeatureSpace):
    names = space.feature_names()
    if query.x_original.shape[0] != space.n_features:
        raise SearchConfigError(
            f"query point has {query.x_original.shape[0]} features, space has {space.n_features}"
        )
    unknown = query.locked_features - set(names)
    if unknown:
        raise SearchConfigError(f"locked features not in schema: {sorted(unknown)}")
    if query.cap_to_training_range and space.model_bounds() is None:
        raise SearchConfigError("cap_to_training_range needs fitted feature stats")


def _locked_mask(query: CfQuery, space: FeatureSpace) -> np.ndarray:
    names = space.feature_names()
    mask = np.zeros(space.n_features, dtype=bool)
    for name in query.locked_features:
        mask[names.index(name)] = True
    return mask


def _restart_inits(query: CfQuery, z_origin: np.ndarray, restart_indices,
                   pinned: np.ndarray, pin_values: np.ndarray) -> np.ndarray:
    """Restart 0 starts exactly at the original point, the rest add noise."""
    inits = []
    for idx in restart_indices:
        z0 = z_origin.copy()
        if idx != 0:
            rng = np.random.default_rng([query.rng_seed, idx])
            z0 = z0 + rng.normal(0.0, RESTART_NOISE_SIGMA, z0.shape[0])
        z0[pinned] = pin_values[pinned]
        inits.append(z0)
    return np.asarray(inits)


def _descend(model: MlpModel, query: CfQuery, space: FeatureSpace,
             restart_indices, pinned: np.ndarray, pin_values: np.ndarray):
    """Run the lambda schedule for a batch of restarts.

    Returns per-restart (z_final, converged, rounds_used, final_lambda,
    round_gaps). Restarts that reach tolerance at a round boundary are frozen
    so batch execution matches running each restart on its own.
    """
    sched = query.schedule
    scale, w = _distance_terms(query, space)
    kind = query.distance.kind
    z_origin = space.to_model(query.x_original)
    bounds = space.model_bounds() if query.cap_to_training_range else None

    z = _restart_inits(query, z_origin, restart_indices, pinned, pin_values)
    if bounds is not None:
        z = np.clip(z, bounds[0], bounds[1])
        z[:, pinned] = pin_values[pinned]
    n_runs = z.shape[0]

    gaps = model.forward(z) - query.target_score
    active = np.abs(gaps) > query.tolerance_eps
    rounds_used = np.zeros(n_runs, dtype=int)
    final_lambda = np.full(n_runs, sched.lambda_init)
    round_gaps = [[] for _ in range(n_runs)]

    b1, b2, eps_adam = 0.9, 0.999, 1e-8
    lam = sched.lambda_init
    for round_idx in range(sched.max_rounds):
        if not active.any():
            break
        lam = sched.lambda_init * sched.growth_factor**round_idx
        m = np.zeros_like(z)
        v = np.zeros_like(z)
        for t in range(1, sched.inner_steps + 1):
            score = model.forward(z)
            grad_f = model.input_gradient(z)
            gap = (score - query.target_score)[:, None]
            g = 2.0 * lam * gap * grad_f + _dist_grad_model(z - z_origin, kind, scale, w)
            g[:, pinned] = 0.0
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            step = sched.adam_step_size * m_hat / (np.sqrt(v_hat) + eps_adam)
            z_new = z - step
            if bounds is not None:
                z_new = np.clip(z_new, bounds[0], bounds[1])
            z_new[:, pinned] = pin_values[pinned]
            z = np.where(active[:, None], z_new, z)
        gaps = model.forward(z) - query.target_score
        for i in range(n_runs):
            if active[i]:
                round_gaps[i].append(float(gaps[i]))
                rounds_used[i] = round_idx + 1
                final_lambda[i] = lam
        active = active & (np.abs(gaps) > query.tolerance_eps)

    converged = np.abs(model.forward(z) - query.target_score) <= query.tolerance_eps
    if converged.any():
        z = _tighten(model, query, space, z, z_origin, converged, final_lambda,
                     pinned, pin_values, bounds, scale, w)
    return z, converged, rounds_used, final_lambda, round_gaps


def _tighten(model, query, space, z, z_origin, converged, final_lambda,
             pinned, pin_values, bounds, scale, w):
    """Extra descent at a boosted penalty to center the score gap.

    Rounds stop as soon as the gap slips inside the tolerance band, which
    leaves the achieved score hugging the band edge and starves the polish
    pass of slack. A short phase with the penalty scaled up pulls the gap
    toward zero while barely moving the point; the refined point is kept per
    run only when it actually improves the gap.
    """
    sched = query.schedule
    kind = query.distance.kind
    lam = final_lambda * 16.0
    zt = z.copy()
    b1, b2, eps_adam = 0.9, 0.999, 1e-8
    m = np.zeros_like(zt)
    v = np.zeros_like(zt)
    for t in range(1, sched.inner_steps + 1):
        score = model.forward(zt)
        grad_f = model.input_gradient(zt)
        gap = (score - query.target_score)[:, None]
        g = 2.0 * lam[:, None] * gap * grad_f + _dist_grad_model(
            zt - z_origin, kind, scale, w)
        g[:, pinned] = 0.0
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        step = sched.adam_step_size * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps_adam)
        z_new = zt - step
        if bounds is not None:
            z_new = np.clip(z_new, bounds[0], bounds[1])
        z_new[:, pinned] = pin_values[pinned]
        zt = np.where(converged[:, None], z_new, zt)
    better = np.abs(model.forward(zt) - query.target_score) < np.abs(
        model.forward(z) - query.target_score)
    keep = converged & better
    return np.where(keep[:, None], zt, z)


def _polish(model: MlpModel, query: CfQuery, z: np.ndarray, z_origin: np.ndarray,
            pinned: np.ndarray) -> np.ndarray:
    """Greedily restore coordinates to their original values.

    A restore is kept only if the re-evaluated score stays within tolerance,
    so the result still satisfies the query while the distance (under any of
    the metrics) can only shrink. This is what removes optimizer dust and
    yields the sparse, communicable counterfactuals the L1 metric aims for.
    """
    z = z.copy()
    for _ in range(z.shape[0]):
        deltas = np.abs(z - z_origin)
        order = np.argsort(deltas)
        improved = False
        for k in order:
            if pinned[k] or z[k] == z_origin[k]:
                continue
            trial = z.copy()
            trial[k] = z_origin[k]
            if abs(model.forward(trial) - query.target_score) <= query.tolerance_eps:
                z = trial
                improved = True
        if not improved:
            break
    return z


def _retract(model: MlpModel, query: CfQuery, z: np.ndarray, z_origin: np.ndarray,
             pinned: np.ndarray) -> np.ndarray:
    """Pull a feasible point back toward the original along the free coords.

    Scaling every free delta by t in [0, 1] shrinks the distance under all
    three metrics, so the smallest t that still satisfies the tolerance gives
    the best point on the ray. Bisection keeps the upper end feasible
    throughout (t = 1 is the input point itself).
    """
    free = ~pinned
    if not free.any():
        return z

    def at(t: float) -> np.ndarray:
        zt = z.copy()
        zt[free] = z_origin[free] + t * (z[free] - z_origin[free])
        return zt

    def feasible(t: float) -> bool:
        return abs(model.forward(at(t)) - query.target_score) <= query.tolerance_eps

    if feasible(0.0):
        return at(0.0)
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return at(hi)


def _build_result(model, query, space, z_final, converged, restart_idx,
                  rounds, final_lambda, gap_trace, pinned,
                  clamp_assignment=None):
    z_origin = space.to_model(query.x_original)
    if converged:
        z_final = _polish(model, query, z_final, z_origin, pinned)
        z_final = _retract(model, query, z_final, z_origin, pinned)
        z_final = _polish(model, query, z_final, z_origin, pinned)
    x_prime = space.to_original(z_final)
    achieved = model.forward(z_final)
    dist_value = distance(query.distance, query.x_original, x_prime)
    if not converged:
        return NotConverged(
            x_prime=x_prime,
            achieved_score=achieved,
            target_score=query.target_score,
            distance_value=dist_value,
            rounds=rounds,
            message=(
                f"no solution within tolerance {query.tolerance_eps} after "
                f"{rounds} rounds (best |gap| = {abs(achieved - query.target_score):.4g})"
            ),
        )
    names = space.feature_names()
    changed = [
        (names[k], float(query.x_original[k]), float(x_prime[k]))
        for k in range(space.n_features)
        if abs(z_final[k] - z_origin[k]) > CHANGE_THRESHOLD
    ]
    return Counterfactual(
        x_prime=x_prime,
        achieved_score=achieved,
        distance_value=dist_value,
        changed=changed,
        restart_seed=restart_idx,
        clamp_assignment=dict(clamp_assignment or {}),
        diagnostics={
            "metric": query.distance.kind,
            "rounds": int(rounds),
            "final_lambda": float(final_lambda),
            "round_gaps": [round(g, 6) for g in gap_trace],
        },
    )


def _run_restarts(model, query, space, restart_indices, pinned, pin_values,
                  clamp_assignment=None) -> list:
    z, conv, rounds, lams, gap_traces = _descend(
        model, query, space, restart_indices, pinned, pin_values
    )
    return [
        _build_result(
            model, query, space, z[i], bool(conv[i]), restart_indices[i],
            int(rounds[i]), float(lams[i]), gap_traces[i], pinned,
            clamp_assignment,
        )
        for i in range(len(restart_indices))
    ]


def solve_single(model: MlpModel, query: CfQuery, restart_seed: int = 0,
                 space: FeatureSpace | None = None):
    """One run of the schedule from one restart; restart 0 starts at x itself."""
    space = space or FeatureSpace.identity(query.x_original.shape[0])
    _validate_query(query, space)
    pinned = _locked_mask(query, space)
    pin_values = space.to_model(query.x_original)
    return _run_restarts(model, query, space, [restart_seed], pinned, pin_values)[0]


def _best_of(results, key=None):
    converged = [r for r in results if r.converged]
    if not converged:
        return None
    key = key or (lambda r: (r.distance_value, r.restart_seed))
    return min(converged, key=key)


def _aggregate_failure(results, query) -> NotConverged:
    best = min(results, key=lambda r: abs(r.achieved_score - query.target_score))
    return NotConverged(
        x_prime=best.x_prime,
        achieved_score=best.achieved_score,
        target_score=query.target_score,
        distance_value=best.distance_value,
        rounds=getattr(best, "rounds", query.schedule.max_rounds),
        message="no restart converged",
    )


def solve_best(model: MlpModel, query: CfQuery, space: FeatureSpace | None = None):
    """Best (closest) converged counterfactual over all restarts."""
    space = space or FeatureSpace.identity(query.x_original.shape[0])
    _validate_query(query, space)
    pinned = _locked_mask(query, space)
    pin_values = space.to_model(query.x_original)
    results = _run_restarts(model, query, space, list(range(query.n_restarts)),
                            pinned, pin_values)
    best = _best_of(results)
    return best if best is not None else _aggregate_failure(results, query)


def solve_diverse(model: MlpModel, query: CfQuery, space: FeatureSpace | None = None):
    """Deduplicated set of converged restarts, closest first.

    Distinct local minima under different restarts form the diverse set; two
    results count as duplicates when their separation under the query's own
    metric is at most DEDUP_DELTA. Returns a (possibly shorter than
    n_diverse) list, or NotConverged when no restart reached tolerance.
    """
    space = space or FeatureSpace.identity(query.x_original.shape[0])
    _validate_query(query, space)
    if query.n_restarts < query.n_diverse:
        raise SearchConfigError("n_restarts must be at least n_diverse")
    pinned = _locked_mask(query, space)
    pin_values = space.to_model(query.x_original)
    results = _run_restarts(model, query, space, list(range(query.n_restarts)),
                            pinned, pin_values)
    converged = sorted(
        (r for r in results if r.converged),
        key=lambda r: (r.distance_value, r.restart_seed),
    )
    if not converged:
        return _aggregate_failure(results, query)
    kept: list[Counterfactual] = []
    for cand in converged:
        if all(
            distance(query.distance, cand.x_prime, k.x_prime) > DEDUP_DELTA
            for k in kept
        ):
            kept.append(cand)
        if len(kept) == query.n_diverse:
            break
    return kept


def solve_clamped(model: MlpModel, query: CfQuery, space: FeatureSpace):
    """Hybrid run: one relaxed solve per categorical assignment.

    Every combination of category codes (for categorical features that are
    not locked) gets its own descent with those coordinates frozen; the
    winner is the converged run with the smallest distance, ties broken
    toward fewer changed features, then lower category codes.
    """
    _validate_query(query, space)
    names = space.feature_names()
    locked = _locked_mask(query, space)
    cat_info = [(i, n) for i, n in space.categorical_info() if not locked[i]]
    pin_values = space.to_model(query.x_original)

    if not cat_info:
        return solve_best(model, query, space)

    n_combos = int(np.prod([n for _, n in cat_info]))
    if n_combos > MAX_CLAMP_COMBINATIONS:
        raise SearchConfigError(
            f"{n_combos} categorical combinations exceeds the limit of "
            f"{MAX_CLAMP_COMBINATIONS}; lock some categorical features"
        )

    candidates = []
    for codes in itertools.product(*[range(n) for _, n in cat_info]):
        pinned = locked.copy()
        pins = pin_values.copy()
        assignment = {}
        for (idx, _), code in zip(cat_info, codes):
            pinned[idx] = True
            pins[idx] = float(code)
            assignment[names[idx]] = int(code)
        results = _run_restarts(model, query, space, list(range(query.n_restarts)),
                                pinned, pins, clamp_assignment=assignment)
        best = _best_of(results)
        if best is not None:
            candidates.append((best, codes))

    if not candidates:
        return NotConverged(
            x_prime=query.x_original.copy(),
            achieved_score=model.forward(space.to_model(query.x_original)),
            target_score=query.target_score,
            distance_value=0.0,
            rounds=query.schedule.max_rounds,
            message="no clamp run converged",
        )
    best, _ = min(candidates, key=lambda c: (c[0].distance_value, len(c[0].changed), c[1]))
    return best


def dependence_flags(cf_set, schema) -> DependenceReport:
    """Per-protected-feature flag: did any counterfactual change it?

    The flag is one-way evidence only: a changed protected attribute shows
    dependence, but an unchanged one shows nothing.
    """
    changed_names = set()
    for cf in cf_set:
        for name, _, _ in cf.changed:
            changed_names.add(name)
    return DependenceReport(
        flags={name: name in changed_names for name in schema.protected_names()}
    )
