"""
Monte Carlo - passage-time campaigns and their statistics.

Trajectory i of a campaign draws its innovations from the counter-based
stream (master_seed, i), so a campaign can be split into index shards and
run in any order or process layout without changing a single sample.
Everything reported here is an estimate and carries statistical=True.
"""

import csv
import json
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from .chain import ModelSpec, PassageBatch, passage_times_batch
from .config import get_settings
from .dist import Innovation
from .errors import DomainError, EstimationError

logger = logging.getLogger(__name__)

SAMPLES_SCHEMA = "# heavytail passage-samples v1"
QUANTILE_LEVELS = (0.5, 0.9, 0.99, 0.999)
MOMENT_ORDERS = (0.5, 1.0, 2.0)
MIN_TAIL_SAMPLES = 1000
TAIL_FIT_POINTS = 50
SLOPE_DRIFT_TOL = 0.25
STABLE_CHANGE = 0.10
DIVERGENT_GROWTH = 1.5
SETTLED_MEDIAN = 0.8
BLOCK_COUNTS = (1024, 256, 64)
TAIL_INDEX_NOTE = (
    "tail index of tau read as the moment threshold q*; the theory gives "
    "moment thresholds, not the survival exponent"
)


def _censored_mask(samples: np.ndarray) -> np.ndarray:
    return ~np.isfinite(samples) | (samples < 0)


@dataclass
class TailIndex:
    """Survival-curve regression estimate of the tail index of tau."""
    estimate: float
    stderr: float
    window: Tuple[float, float]
    points: int
    power_law_consistent: bool
    half_window_estimates: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["window"] = list(self.window)
        data["half_window_estimates"] = list(self.half_window_estimates)
        return data


@dataclass
class McSummary:
    """Aggregate statistics of one passage-time campaign."""
    n_trajectories: int
    n_censored: int
    horizon: int
    x0: float
    master_seed: int
    tau_quantiles: Dict[str, Optional[float]]
    empirical_moments: Dict[str, Optional[Tuple[float, float]]]
    tail_index: Optional[TailIndex]
    return_prob_lower: float
    censored_fraction: float
    statistical: bool = True
    body_dependent: bool = True
    note: str = TAIL_INDEX_NOTE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_trajectories": self.n_trajectories,
            "n_censored": self.n_censored,
            "horizon": self.horizon,
            "x0": self.x0,
            "master_seed": self.master_seed,
            "tau_quantiles": self.tau_quantiles,
            "empirical_moments": {
                q: None if v is None else {"estimate": v[0], "half_width": v[1]}
                for q, v in self.empirical_moments.items()
            },
            "tail_index": self.tail_index.to_dict() if self.tail_index else None,
            "return_prob_lower": self.return_prob_lower,
            "censored_fraction": self.censored_fraction,
            "statistical": self.statistical,
            "body_dependent": self.body_dependent,
            "note": self.note,
        }

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def _run_shard(job: Tuple[ModelSpec, Innovation, float, int, int, np.ndarray]) -> PassageBatch:
    model, dist, x0, horizon, seed, indices = job
    return passage_times_batch(model, dist, x0, horizon, seed, indices)


def run_passages(
    model: ModelSpec,
    dist: Innovation,
    x0: float,
    n: int,
    horizon: int,
    master_seed: int,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> PassageBatch:
    """
    Passage times of trajectories 0..n-1, sorted by index.

    The batch is identical for every choice of workers and batch_size.

    Args:
        model: Chain model.
        dist: Innovation law.
        x0: Starting state for every trajectory.
        n: Number of trajectories (may be 0).
        horizon: Step budget per trajectory.
        master_seed: Campaign seed.
        workers: Process count (defaults to HEAVYTAIL_WORKERS).
        batch_size: Trajectories per lock-step shard (defaults to HEAVYTAIL_BATCH).
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    settings = get_settings()
    workers = workers or settings.workers
    batch_size = batch_size or settings.batch_size
    indices = np.arange(n, dtype=np.int64)
    shards = [indices[i:i + batch_size] for i in range(0, n, batch_size)]
    jobs = [(model, dist, x0, horizon, master_seed, shard) for shard in shards]

    logger.info(f"Running {n} trajectories in {len(jobs)} shard(s) on {workers} worker(s)")
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_shard, jobs))
    else:
        parts = [_run_shard(job) for job in jobs]
    return PassageBatch.concat(parts, horizon)


def _quantiles(taus: np.ndarray) -> Dict[str, Optional[float]]:
    out: Dict[str, Optional[float]] = {}
    for level in QUANTILE_LEVELS:
        if taus.size == 0:
            out[f"{level:g}"] = None
            continue
        value = float(np.quantile(taus, level, method="inverted_cdf"))
        out[f"{level:g}"] = value if math.isfinite(value) else None
    return out


def _moments(uncensored: np.ndarray) -> Dict[str, Optional[Tuple[float, float]]]:
    out: Dict[str, Optional[Tuple[float, float]]] = {}
    m = uncensored.size
    for q in MOMENT_ORDERS:
        if m == 0:
            out[f"{q:g}"] = None
            continue
        powered = uncensored ** q
        half = 1.96 * float(np.std(powered, ddof=1)) / math.sqrt(m) if m > 1 else 0.0
        out[f"{q:g}"] = (float(np.mean(powered)), half)
    return out


def summarize(batch: PassageBatch, x0: float, master_seed: int) -> McSummary:
    """Statistics of a passage batch; moments use uncensored tau only."""
    n = len(batch)
    censored = batch.censored
    n_cens = int(np.sum(censored))
    taus = np.where(censored, np.inf, batch.tau.astype(np.float64))
    uncensored = taus[~censored]

    tail = None
    if uncensored.size >= MIN_TAIL_SAMPLES:
        try:
            tail = estimate_tail_index(taus, batch.horizon)
        except EstimationError as exc:
            logger.warning(f"Tail index not estimated: {exc}")

    return McSummary(
        n_trajectories=n,
        n_censored=n_cens,
        horizon=batch.horizon,
        x0=float(x0),
        master_seed=int(master_seed),
        tau_quantiles=_quantiles(taus),
        empirical_moments=_moments(uncensored),
        tail_index=tail,
        return_prob_lower=(n - n_cens) / n if n else 0.0,
        censored_fraction=n_cens / n if n else 0.0,
    )


def run_campaign(
    model: ModelSpec,
    dist: Innovation,
    x0: float,
    n: int,
    horizon: int,
    master_seed: int,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> McSummary:
    """
    Run n passage-time trajectories and summarise them.

    Raises:
        DomainError: If n < 1 or x0 is inside A.
    """
    if n < 1:
        raise DomainError(f"a campaign needs n >= 1, got {n}")
    batch = run_passages(model, dist, x0, n, horizon, master_seed, workers, batch_size)
    summary = summarize(batch, x0, master_seed)
    logger.info(
        f"Campaign done: {n - summary.n_censored}/{n} hits, "
        f"censored fraction {summary.censored_fraction:.4f}"
    )
    return summary


def _fit_slope(log_n: np.ndarray, log_s: np.ndarray):
    return stats.linregress(log_n, log_s)


def estimate_tail_index(tau_samples: Sequence[float], horizon: float) -> TailIndex:
    """
    Tail index of tau from the empirical survival curve.

    Fits log P(tau > n) against log n at 50 log-spaced n between the median
    and min(0.999-quantile, horizon/10). Censored samples (negative or
    infinite values) count as surviving past every n in the window.

    Raises:
        EstimationError: With fewer than 1000 uncensored samples or a
            degenerate window.
    """
    samples = np.asarray(tau_samples, dtype=np.float64)
    cens = _censored_mask(samples)
    uncensored = np.sort(samples[~cens])
    if uncensored.size < MIN_TAIL_SAMPLES:
        raise EstimationError(
            f"need at least {MIN_TAIL_SAMPLES} uncensored samples, got {uncensored.size}"
        )
    total = samples.size
    ordered = np.sort(np.where(cens, np.inf, samples))
    lo = float(np.quantile(ordered, 0.5, method="inverted_cdf"))
    q999 = float(np.quantile(ordered, 0.999, method="inverted_cdf"))
    hi = min(q999, horizon / 10.0)
    if not (math.isfinite(lo) and lo > 0 and hi > lo):
        raise EstimationError(f"degenerate fit window [{lo}, {hi}]")

    grid = np.geomspace(lo, hi, TAIL_FIT_POINTS)
    survival = 1.0 - np.searchsorted(uncensored, grid, side="right") / total
    ok = survival > 0
    log_n, log_s = np.log(grid[ok]), np.log(survival[ok])
    if log_n.size < 4 or np.ptp(log_s) == 0:
        raise EstimationError("survival curve is flat over the fit window")

    fit = _fit_slope(log_n, log_s)
    half = log_n.size // 2
    first = -_fit_slope(log_n[:half], log_s[:half]).slope
    second = -_fit_slope(log_n[half:], log_s[half:]).slope
    estimate = -float(fit.slope)
    consistent = abs(first - second) <= SLOPE_DRIFT_TOL * max(abs(estimate), 1e-12)
    if not consistent:
        logger.warning(f"Tail slope drifts across the window ({first:.3f} vs {second:.3f})")
    return TailIndex(estimate, float(fit.stderr), (lo, hi), int(log_n.size), bool(consistent),
                     (float(first), float(second)))


def hill_estimator(samples: Sequence[float], k: Optional[int] = None) -> float:
    """
    Hill estimate of the tail index from the k largest uncensored samples.

    Raises:
        EstimationError: If there are not k + 1 positive samples or the top
            order statistics are tied.
    """
    values = np.asarray(samples, dtype=np.float64)
    values = np.sort(values[~_censored_mask(values) & (values > 0)])[::-1]
    if k is None:
        k = max(10, int(math.sqrt(values.size)))
    if values.size <= k:
        raise EstimationError(f"Hill estimator needs more than {k} samples, got {values.size}")
    h = float(np.mean(np.log(values[:k])) - math.log(values[k]))
    if h <= 0:
        raise EstimationError("top order statistics are tied")
    return 1.0 / h


class MomentVerdict(str, Enum):
    CONVERGENT = "CONVERGENT"
    DIVERGENT = "DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class MomentStability:
    """Evidence behind a moment-stability verdict."""
    verdict: MomentVerdict
    prefix_moments: List[float] = field(default_factory=list)
    prefix_changes: List[float] = field(default_factory=list)
    block_growth: List[float] = field(default_factory=list)
    block_medians: List[float] = field(default_factory=list)
    top_share: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["verdict"] = self.verdict.value
        return data


def _block_medians(powered: np.ndarray) -> List[float]:
    medians = []
    for blocks in BLOCK_COUNTS:
        size = powered.size // blocks
        means = powered[: size * blocks].reshape(blocks, size).mean(axis=1)
        medians.append(float(np.median(means)))
    return medians


def _block_growth(medians: Sequence[float]) -> List[float]:
    # median of block means per doubling of the block size
    growth = []
    for (b1, m1), (b2, m2) in zip(zip(BLOCK_COUNTS, medians), zip(BLOCK_COUNTS[1:], medians[1:])):
        doublings = math.log2(b1 / b2)
        growth.append((m2 / m1) ** (1.0 / doublings) if m1 > 0 else math.inf)
    return growth


def moment_stability_details(samples: Sequence[float], q: float, seed: int = 0) -> MomentStability:
    """
    Judge whether E[tau^q] looks finite.

    Moments of nested prefixes (n/4, n/2, n) of a shuffled sample are
    compared: CONVERGENT when every doubling changes the moment by less than
    10% and block medians either stay flat or grow ever more slowly while the
    median over the largest blocks reaches 80% of the full moment. DIVERGENT
    when the median of block means grows by more than 50% per doubling of the
    block size (with at least 2*1024 samples), or, for smaller samples, when
    the prefix moment grows by more than 50% per doubling while the largest
    term carries over half of the sum. Censored samples are ignored.
    """
    values = np.asarray(samples, dtype=np.float64)
    values = values[~_censored_mask(values)]
    if q == 0 or values.size == 0 or np.all(values == values[0]):
        return MomentStability(MomentVerdict.CONVERGENT)
    if q < 0:
        raise DomainError(f"moment order must be >= 0, got {q}")

    rng = np.random.default_rng(seed)
    powered = rng.permutation(values) ** q
    n = powered.size
    cuts = [max(n // 4, 1), max(n // 2, 1), n]
    moments = [float(np.mean(powered[:c])) for c in cuts]
    changes = [moments[1] / moments[0] - 1.0, moments[2] / moments[1] - 1.0]
    top_share = float(np.max(powered) / np.sum(powered))
    medians = _block_medians(powered) if n >= 2 * BLOCK_COUNTS[0] else []
    growth = _block_growth(medians)

    stable = all(abs(c) < STABLE_CHANGE for c in changes)
    if growth:
        flat = all(g < 1.0 + STABLE_CHANGE for g in growth)
        # skewed light tails: small-block medians lag the mean but close in on it
        settling = (
            all(b < a for a, b in zip(growth, growth[1:]))
            and medians[-1] >= SETTLED_MEDIAN * moments[-1]
        )
        stable = stable and (flat or settling)
        divergent = all(g > DIVERGENT_GROWTH for g in growth)
    else:
        divergent = all(1.0 + c > DIVERGENT_GROWTH for c in changes) and top_share > 0.5

    if stable:
        verdict = MomentVerdict.CONVERGENT
    elif divergent:
        verdict = MomentVerdict.DIVERGENT
    else:
        verdict = MomentVerdict.INCONCLUSIVE
    return MomentStability(verdict, moments, changes, growth, medians, top_share)


def moment_stability_diagnostic(samples: Sequence[float], q: float, seed: int = 0) -> MomentVerdict:
    """Verdict of moment_stability_details."""
    return moment_stability_details(samples, q, seed).verdict


@dataclass
class TransienceReport:
    """Hit fractions on one trajectory set at increasing horizons."""
    horizons: List[int]
    hit_fractions: List[float]
    extrapolated: Optional[float] = None
    fit_params: Optional[Dict[str, float]] = None
    residuals: Optional[List[float]] = None
    statistical: bool = True
    # hit probabilities depend on the body of the law, not only its tails
    body_dependent: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _saturation(h: np.ndarray, p_inf: float, beta: float, kappa: float) -> np.ndarray:
    return p_inf - beta * h ** (-kappa)


def transience_probe(
    model: ModelSpec,
    dist: Innovation,
    x0: float,
    horizons: Sequence[int],
    n: int,
    master_seed: int,
    workers: Optional[int] = None,
) -> TransienceReport:
    """
    Hit fraction at each horizon for the same n trajectories, plus a
    saturation fit hit(h) = p_inf - beta h^(-kappa).

    A run to the largest horizon fixes every tau, so the fractions are
    nondecreasing in h exactly. With fewer than three horizons or a failed
    fit only the raw fractions are reported.

    Raises:
        DomainError: If horizons are not strictly increasing.
    """
    hs = [int(h) for h in horizons]
    if not hs or any(b <= a for a, b in zip(hs, hs[1:])):
        raise DomainError("horizons must be nonempty and strictly increasing")
    if n == 0:
        return TransienceReport([], [])

    batch = run_passages(model, dist, x0, n, hs[-1], master_seed, workers)
    taus = batch.tau
    fractions = [float(np.sum((taus >= 0) & (taus <= h))) / n for h in hs]
    report = TransienceReport(hs, fractions)
    if len(hs) < 3:
        return report

    h_arr = np.asarray(hs, dtype=np.float64)
    f_arr = np.asarray(fractions)
    try:
        params, _ = curve_fit(
            _saturation, h_arr, f_arr,
            p0=(min(1.0, f_arr[-1] + 0.01), 1.0, 0.5),
            bounds=([0.0, 0.0, 1e-3], [1.0, np.inf, 5.0]),
            maxfev=5000,
        )
    except (RuntimeError, ValueError) as exc:
        logger.warning(f"Saturation fit failed: {exc}")
        return report
    p_inf, beta, kappa = (float(v) for v in params)
    report.extrapolated = p_inf
    report.fit_params = {"p_inf": p_inf, "beta": beta, "kappa": kappa}
    report.residuals = [float(r) for r in f_arr - _saturation(h_arr, *params)]
    logger.info(f"Hit fraction {fractions[-1]:.4f} at h={hs[-1]}, extrapolated {p_inf:.4f}")
    return report


def write_samples_csv(path: Union[str, Path], batch: PassageBatch) -> Path:
    """One row per trajectory: index, tau_or_censored, hit_value, max_excursion."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(SAMPLES_SCHEMA + "\n")
        writer = csv.writer(handle)
        writer.writerow(["index", "tau_or_censored", "hit_value", "max_excursion"])
        for i in range(len(batch)):
            cens = batch.tau[i] < 0
            writer.writerow([
                int(batch.indices[i]),
                "CENSORED" if cens else int(batch.tau[i]),
                "" if cens else repr(float(batch.hit_value[i])),
                repr(float(batch.max_excursion[i])),
            ])
    return path
