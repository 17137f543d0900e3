"""Maximum-likelihood and Sequential Monte Carlo phase estimation."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .fisher import InfoMatrix, ProbabilityModel, fi_matrix, weighted_bound
from .hilbert import wrap_phase

log = logging.getLogger(__name__)

MIN_PARTICLES = 100
DEFAULT_PARTICLES = 2000
RESAMPLE_FRACTION = 0.5
LIU_WEST_A = 0.98
MOVE_STEPS = 2
CANDIDATES_PER_DIM = 32
MAX_CANDIDATES = 256
TIE_TOL = 1e-12
TWO_PI = 2 * np.pi


# -- circular statistics ------------------------------------------------------

def circular_mean(particles: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    particles = np.atleast_2d(particles)
    if weights is None:
        weights = np.full(len(particles), 1.0 / len(particles))
    s = weights @ np.sin(particles)
    c = weights @ np.cos(particles)
    return np.arctan2(s, c)


def circular_covariance(particles: np.ndarray, weights: np.ndarray | None = None, mean=None) -> np.ndarray:
    """Weighted covariance of phase offsets wrapped around the circular mean."""
    particles = np.atleast_2d(particles)
    if weights is None:
        weights = np.full(len(particles), 1.0 / len(particles))
    if mean is None:
        mean = circular_mean(particles, weights)
    diffs = wrap_phase(particles - mean)
    cov = (diffs * weights[:, None]).T @ diffs
    return 0.5 * (cov + cov.T)


# -- particle cloud -----------------------------------------------------------

@dataclass(frozen=True)
class ParticleCloud:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        particles = wrap_phase(np.atleast_2d(np.asarray(self.particles, dtype=float)))
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (particles.shape[0],):
            raise ValueError("one weight per particle required")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be non-negative and sum to 1")
        particles.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return self.particles.shape[0]

    @property
    def d(self) -> int:
        return self.particles.shape[1]

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    def mean(self) -> np.ndarray:
        return circular_mean(self.particles, self.weights)

    def covariance(self) -> np.ndarray:
        return circular_covariance(self.particles, self.weights)


def smc_init(prior: str = "UniformTorus", particle_count: int = DEFAULT_PARTICLES, d: int = 1,
             seed: int | np.random.Generator = 0) -> ParticleCloud:
    if prior != "UniformTorus":
        raise ValueError(f"unsupported prior {prior!r}")
    if particle_count < MIN_PARTICLES:
        raise ValueError(f"need at least {MIN_PARTICLES} particles, got {particle_count}")
    rng = np.random.default_rng(seed)
    particles = rng.uniform(-np.pi, np.pi, size=(particle_count, d))
    return ParticleCloud(particles, np.full(particle_count, 1.0 / particle_count))


def systematic_indices(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions)


def liu_west_resample(cloud: ParticleCloud, rng: np.random.Generator, a: float = LIU_WEST_A) -> ParticleCloud:
    """Shrink resampled particles toward the mean by ``a`` and add kernel noise of covariance (1-a^2)Cov."""
    mean = cloud.mean()
    diffs = wrap_phase(cloud.particles - mean)
    cov = circular_covariance(cloud.particles, cloud.weights, mean)
    idx = systematic_indices(cloud.weights, rng)
    centers = mean + a * diffs[idx]
    h2 = 1.0 - a**2
    evals, evecs = np.linalg.eigh(cov)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None))
    noise = rng.standard_normal((cloud.count, cloud.d)) @ root.T * math.sqrt(h2)
    return ParticleCloud(centers + noise, np.full(cloud.count, 1.0 / cloud.count))


class OutcomeHistory:
    """Outcome counts per distinct control setting; enough to evaluate the full likelihood."""

    def __init__(self, outcome_count: int):
        self.outcome_count = outcome_count
        self._entries: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return int(sum(n.sum() for _, n in self._entries.values()))

    def add(self, controls, outcome: int) -> None:
        controls = np.atleast_1d(np.asarray(controls, dtype=float))
        key = tuple(np.round(controls, 12))
        if key not in self._entries:
            self._entries[key] = (controls, np.zeros(self.outcome_count, dtype=int))
        self._entries[key][1][outcome] += 1

    def log_likelihood(self, model: ProbabilityModel, particles: np.ndarray) -> np.ndarray:
        total = np.zeros(len(particles))
        for controls, counts in self._entries.values():
            seen = counts > 0
            p = model(particles, controls)[:, seen]
            total += np.log(np.maximum(p, 1e-300)) @ counts[seen]
        return total


def mh_move(cloud: ParticleCloud, model: ProbabilityModel, history: OutcomeHistory,
            rng: np.random.Generator, steps: int = MOVE_STEPS) -> ParticleCloud:
    """Random-walk Metropolis moves leaving the posterior given ``history`` invariant.

    The uniform prior and the wrapped Gaussian proposal are both symmetric, so
    acceptance depends on the likelihood ratio alone. Weights must be uniform.
    """
    x = cloud.particles.copy()
    cov = cloud.covariance()
    evals, evecs = np.linalg.eigh(cov)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None)) * (2.38 / math.sqrt(cloud.d))
    ll = history.log_likelihood(model, x)
    for _ in range(steps):
        prop = wrap_phase(x + rng.standard_normal(x.shape) @ root.T)
        ll_prop = history.log_likelihood(model, prop)
        accept = np.log(rng.random(len(x))) < ll_prop - ll
        x[accept] = prop[accept]
        ll[accept] = ll_prop[accept]
    return ParticleCloud(x, cloud.weights)


def smc_update(cloud: ParticleCloud, model: ProbabilityModel, controls, outcome: int,
               rng: np.random.Generator | None = None,
               resample_fraction: float = RESAMPLE_FRACTION, a: float = LIU_WEST_A,
               history: OutcomeHistory | None = None, move_steps: int = MOVE_STEPS) -> ParticleCloud:
    """Bayes update with one outcome; resamples when ESS drops below ``resample_fraction * count``.

    With a ``history`` that already includes this outcome, each resampling is
    followed by ``move_steps`` Metropolis moves so the cloud can re-expand.
    """
    like = model(cloud.particles, controls)[:, outcome]
    w = cloud.weights * like
    total = w.sum()
    if rng is None:
        rng = np.random.default_rng()
    if not total > 0:
        log.warning("outcome %d impossible under every particle; restarting from the prior", outcome)
        return smc_init("UniformTorus", cloud.count, cloud.d, rng)
    updated = ParticleCloud(cloud.particles, w / total)
    if updated.ess() < resample_fraction * cloud.count:
        updated = liu_west_resample(updated, rng, a)
        if history is not None and move_steps > 0:
            updated = mh_move(updated, model, history, rng, move_steps)
    return updated


# -- adaptive control choice ---------------------------------------------------

def candidate_grid(control_dim: int, per_dim: int) -> np.ndarray:
    """Uniform grid of ``per_dim`` points on [-pi, pi) along each control axis."""
    if control_dim == 0:
        return np.zeros((1, 0))
    if per_dim < 1:
        raise ValueError("per_dim must be >= 1")
    axis = -np.pi + 2 * np.pi * np.arange(per_dim) / per_dim
    return np.array(list(itertools.product(axis, repeat=control_dim)))


def default_candidates(control_dim: int) -> np.ndarray:
    per_dim = CANDIDATES_PER_DIM
    while control_dim and per_dim**control_dim > MAX_CANDIDATES:
        per_dim -= 1
    return candidate_grid(control_dim, per_dim)


def expected_utilities(cloud: ParticleCloud, model: ProbabilityModel, candidates) -> np.ndarray:
    """Predictive average of Tr Cov(posterior) after one more outcome, per candidate."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    x = cloud.particles
    probs = model(x[None, :, :], candidates[:, None, :])  # (K, P, O)
    post = cloud.weights[None, :, None] * probs
    pred = post.sum(axis=1)  # (K, O)
    post /= np.where(pred > 0, pred, 1.0)[:, None, :]
    post_t = np.ascontiguousarray(post.transpose(0, 2, 1))  # (K, O, P)
    mean = np.arctan2(post_t @ np.sin(x), post_t @ np.cos(x))  # (K, O, d)
    sq = np.zeros(post_t.shape)
    for j in range(x.shape[1]):
        diff = x[:, j] - mean[..., j, None]
        diff -= TWO_PI * np.rint(diff / TWO_PI)  # squared below, so the boundary convention is irrelevant
        sq += diff * diff
    tr_cov = np.sum(post_t * sq, axis=-1)
    return np.sum(np.where(pred > 0, pred * tr_cov, 0.0), axis=1)


def choose_controls(cloud: ParticleCloud, model: ProbabilityModel, candidate_controls=None) -> np.ndarray:
    """Candidate minimizing the expected posterior covariance trace; ties go to the lowest index."""
    if candidate_controls is None:
        candidate_controls = default_candidates(model.control_dim)
    candidates = np.atleast_2d(np.asarray(candidate_controls, dtype=float))
    if len(candidates) == 0:
        raise ValueError("candidate list is empty")
    utils = expected_utilities(cloud, model, candidates)
    best = utils.min()
    k = int(np.flatnonzero(utils <= best + TIE_TOL * max(1.0, abs(best)))[0])
    return candidates[k].copy()


# -- maximum likelihood -------------------------------------------------------

@dataclass(frozen=True)
class MleResult:
    estimate: np.ndarray
    log_likelihood: float
    multimodal: bool = False
    non_identifiable: bool = False
    modes: tuple = ()


def _normalize_data(model: ProbabilityModel, data):
    """Accept bare counts or a list of (controls, counts) settings."""
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], tuple):
        settings = [(np.atleast_1d(np.asarray(c, dtype=float)).reshape(model.control_dim), np.asarray(n, dtype=float))
                    for c, n in data]
    else:
        settings = [(np.zeros(model.control_dim), np.asarray(data, dtype=float))]
    for _, n in settings:
        if n.shape != (model.outcome_count,):
            raise ValueError(f"counts must have {model.outcome_count} entries")
    if sum(n.sum() for _, n in settings) <= 0:
        raise ValueError("all counts are zero")
    return settings


def log_likelihood(model: ProbabilityModel, data, phases) -> np.ndarray:
    settings = _normalize_data(model, data)
    phases = np.asarray(phases, dtype=float)
    total = np.zeros(phases.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        for controls, counts in settings:
            p = model(phases, controls)
            terms = np.where(counts > 0, counts * np.log(p), 0.0)
            total = total + terms.sum(axis=-1)
    return np.where(np.isnan(total), -np.inf, total)


def mle_estimate(model: ProbabilityModel, data, grid_resolution: int = 64, bounds=None,
                 refine: int = 8, mode_tol: float = 1e-6) -> MleResult:
    """Grid search over the phase box followed by local Nelder-Mead refinement.

    ``data`` is an outcome-count vector or a list of ``(controls, counts)``.
    Near-equal distinct maxima are reported as ``multimodal``; the
    lexicographically smallest one is returned.
    """
    d = model.phase_dim
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be >= 8")
    if d > 3:
        raise ValueError("grid search supports at most 3 phases")
    settings = _normalize_data(model, data)
    lo, hi = (-np.pi, np.pi) if bounds is None else bounds
    axis = lo + (hi - lo) * np.arange(grid_resolution) / grid_resolution
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
    ll = log_likelihood(model, settings, grid)
    if not np.any(np.isfinite(ll)):
        return MleResult(np.full(d, np.nan), -np.inf, non_identifiable=True)

    is_peak = np.isfinite(ll)
    for shift in itertools.product((-1, 0, 1), repeat=d):
        if any(shift):
            is_peak &= ll >= np.roll(ll, shift, axis=tuple(range(d)))
    peaks = np.argwhere(is_peak)
    order = np.argsort(-ll[tuple(peaks.T)], kind="stable")[:refine]
    spacing = (hi - lo) / grid_resolution
    periodic = bounds is None

    def objective(x):
        x = wrap_phase(x) if periodic else x
        v = log_likelihood(model, settings, x)
        return -v if np.isfinite(v) else 1e300

    found = []
    for k in order:
        x0 = grid[tuple(peaks[k])]
        simplex = np.vstack([x0, x0 + spacing * np.eye(d)])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-9, "fatol": 1e-11, "maxiter": 4000})
        x = wrap_phase(res.x) if periodic else np.clip(res.x, lo, hi)
        found.append((x, -float(objective(x))))

    best_ll = max(v for _, v in found)
    tol = mode_tol * max(1.0, abs(best_ll))
    modes: list[np.ndarray] = []
    for x, v in found:
        if v >= best_ll - tol and all(np.linalg.norm(wrap_phase(x - m)) > 1e-4 for m in modes):
            modes.append(x)
    modes.sort(key=tuple)
    return MleResult(modes[0], best_ll, multimodal=len(modes) > 1, modes=tuple(modes))


# -- estimation runs ----------------------------------------------------------

@dataclass(frozen=True)
class EstimationRecord:
    step: int
    estimate: np.ndarray
    covariance: np.ndarray
    controls: np.ndarray
    utility: float
    crb: float = math.nan
    qcrb: float = math.nan
    ess: float = math.nan

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10 or (cov.size and np.linalg.eigvalsh(cov)[0] < -1e-10):
            raise ValueError("record covariance must be symmetric PSD")


@dataclass
class Scenario:
    """Everything needed to simulate and estimate one run.

    ``candidates`` switches on adaptive control choice; ``None`` or an empty
    list gives a fixed-control run cycling through ``fixed_controls``.
    """

    model: ProbabilityModel
    true_phases: np.ndarray
    repetitions: int
    seed: int
    estimator: str = "smc"
    particle_count: int = DEFAULT_PARTICLES
    candidates: np.ndarray | None = None
    fixed_controls: list = field(default_factory=list)
    qfi: InfoMatrix | None = None
    grid_resolution: int = 64
    bounds: tuple | None = None
    fi_step: float = 1e-4
    refine: int = 8
    move_steps: int = MOVE_STEPS

    def __post_init__(self):
        self.true_phases = np.atleast_1d(np.asarray(self.true_phases, dtype=float))
        if self.true_phases.shape != (self.model.phase_dim,):
            raise ValueError(f"true_phases must have {self.model.phase_dim} entries")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.estimator not in ("smc", "mle"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        fixed = [np.atleast_1d(np.asarray(c, dtype=float)) for c in self.fixed_controls]
        if not fixed:
            fixed = [np.zeros(self.model.control_dim)]
        for c in fixed:
            if c.shape != (self.model.control_dim,):
                raise ValueError(f"controls must have {self.model.control_dim} entries")
        self.fixed_controls = fixed
        if self.candidates is not None and len(self.candidates) == 0:
            self.candidates = None

    @property
    def adaptive(self) -> bool:
        return self.candidates is not None


def _draw(p: np.ndarray, u: float) -> int:
    cum = np.cumsum(p)
    return int(min(np.searchsorted(cum, u * cum[-1], side="right"), len(p) - 1))


def run_estimation(scenario: Scenario) -> list[EstimationRecord]:
    """Simulate data at the true phases and estimate them.

    SMC gives one record per repetition; MLE gives a single record for all
    shots, split evenly over the fixed-control schedule.
    """
    try:
        if scenario.estimator == "mle":
            return [_run_mle(scenario)]
        return _run_smc(scenario)
    except Exception as exc:
        raise RuntimeError(f"estimation failed for scenario seed={scenario.seed}: {exc}") from exc


def _qcrb(scenario: Scenario, nu: int) -> float:
    return weighted_bound(scenario.qfi) / nu if scenario.qfi is not None else math.nan


def _run_smc(sc: Scenario) -> list[EstimationRecord]:
    data_seq, filter_seq = np.random.SeedSequence(sc.seed).spawn(2)
    data_rng, filter_rng = np.random.default_rng(data_seq), np.random.default_rng(filter_seq)
    model, truth = sc.model, sc.true_phases
    cloud = smc_init("UniformTorus", sc.particle_count, model.phase_dim, filter_rng)
    fi_cache: dict[tuple, np.ndarray] = {}
    info_sum = np.zeros((model.phase_dim, model.phase_dim))
    history = OutcomeHistory(model.outcome_count)
    records = []
    for step in range(1, sc.repetitions + 1):
        if sc.adaptive:
            controls = choose_controls(cloud, model, sc.candidates)
        else:
            controls = sc.fixed_controls[(step - 1) % len(sc.fixed_controls)]
        outcome = _draw(model(truth, controls), data_rng.random())
        history.add(controls, outcome)
        cloud = smc_update(cloud, model, controls, outcome, filter_rng, history=history, move_steps=sc.move_steps)
        key = tuple(np.round(controls, 12))
        if key not in fi_cache:
            fi_cache[key] = fi_matrix(model, truth, sc.fi_step, controls).matrix
        info_sum = info_sum + fi_cache[key]
        cov = cloud.covariance()
        records.append(EstimationRecord(
            step=step, estimate=cloud.mean(), covariance=cov, controls=np.array(controls),
            utility=float(np.trace(cov)), crb=weighted_bound(InfoMatrix(info_sum)),
            qcrb=_qcrb(sc, step), ess=cloud.ess(),
        ))
    return records


def mle_settings(sc: Scenario, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    k = len(sc.fixed_controls)
    shots = [sc.repetitions // k + (1 if i < sc.repetitions % k else 0) for i in range(k)]
    return [(c, rng.multinomial(n, sc.model(sc.true_phases, c))) for c, n in zip(sc.fixed_controls, shots) if n]


def _run_mle(sc: Scenario) -> EstimationRecord:
    rng = np.random.default_rng(sc.seed)
    settings = mle_settings(sc, rng)
    result = mle_estimate(sc.model, settings, sc.grid_resolution, sc.bounds, sc.refine)
    info_true = sum(n.sum() * fi_matrix(sc.model, sc.true_phases, sc.fi_step, c).matrix for c, n in settings)
    info_hat = sum(n.sum() * fi_matrix(sc.model, result.estimate, sc.fi_step, c).matrix for c, n in settings)
    cov = np.linalg.pinv(info_hat, rcond=1e-10, hermitian=True)
    return EstimationRecord(
        step=sc.repetitions, estimate=result.estimate, covariance=0.5 * (cov + cov.T),
        controls=np.array(sc.fixed_controls[0]), utility=float(np.trace(cov)),
        crb=weighted_bound(InfoMatrix(info_true)), qcrb=_qcrb(sc, sc.repetitions),
    )


def fit_convergence_constant(records: list[EstimationRecord]) -> float:
    """Decay constant tau from log(Tr V(nu) - CRB(nu)) ~ c - nu/tau over positive residuals."""
    nu = np.array([r.step for r in records], dtype=float)
    resid = np.array([r.utility - r.crb for r in records])
    keep = resid > 0
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(nu[keep], np.log(resid[keep]), 1)
    return -1.0 / slope if slope < 0 else math.inf
