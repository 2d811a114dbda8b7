"""Monte Carlo experiment engine: empirical error rates next to their closed forms.

Trials run in fixed blocks of TRIALS_PER_STREAM; block b of simulation
point i draws from RngStream(master_seed, b, (i,)). Error counts are
integers, so the reduction is exact and the report does not depend on how
many worker threads executed the blocks.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from app.channel import BoundedModel, ChannelModel, FadingModel, draw_gains
from app.config import settings
from app.detection import (
    GainVector,
    Homodyne,
    count_ml_errors,
    difference_matrix,
    diversity_bound,
    pairwise_error,
    parse_measurement,
    sample_codebook,
    simulate_single_detection,
    single_error_probability,
    union_bound,
)
from app.errors import ConfigError, DomainError
from app.estimation import deep_fade_exact, pilot_error_probability, simulate_pilot_detection
from app.logging_config import get_logger
from app.mathcore import CircularGaussianSpec, RngStream, q_function
from app.models import ErrorRateReport, ErrorRateRow, SimulationConfig
from app.multiuser import UserAllocation, simulate_user_detection, user_error_bound
from app.spreading import (
    SpreadPlan,
    simulate_spread_detection,
    spread_error_probability,
    spread_error_probability_fading,
)

logger = get_logger(__name__)

TRIALS_PER_STREAM = 8192
# stream used for one-off draws (fixed gain realisations), disjoint from point indices
FIXED_DRAW_STREAM = 2**31
WILSON_Z = 1.959963984540054
Z_LIMIT = 3.0


@dataclass(frozen=True)
class Comparison:
    z_score: float
    passed: bool


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, min(p, center - half)), min(1.0, max(p, center + half))


def compare(empirical: float, analytic: float, trials: int, one_sided: bool = False) -> Comparison:
    """z = (empirical - analytic) / SE with the binomial SE of the analytic p.

    At analytic p in {0, 1} the SE would vanish, so the Wilson interval of
    the empirical rate supplies it instead.
    """
    if not (0 <= empirical <= 1 and 0 <= analytic <= 1):
        raise DomainError("probabilities must lie in [0, 1]")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if empirical == analytic:
        return Comparison(z_score=0.0, passed=True)
    if 0 < analytic < 1:
        se = math.sqrt(analytic * (1 - analytic) / trials)
    else:
        lo, hi = wilson_interval(round(empirical * trials), trials)
        se = (hi - lo) / (2 * WILSON_Z)
    z = (empirical - analytic) / se if se > 0 else math.copysign(math.inf, empirical - analytic)
    limit = Z_LIMIT + 1e-9
    return Comparison(z_score=z, passed=z <= limit if one_sided else abs(z) <= limit)


def count_errors(
    simulate: Callable[[int, np.random.Generator], tuple[int, ...]],
    trials: int,
    master_seed: int,
    point: int,
    workers: int | None = None,
) -> tuple[int, ...]:
    """Sum the integer counts of `simulate(block_trials, rng)` over all trial blocks."""
    blocks = [
        (b, min(TRIALS_PER_STREAM, trials - b * TRIALS_PER_STREAM))
        for b in range(math.ceil(trials / TRIALS_PER_STREAM))
    ]

    def job(block):
        index, size = block
        return np.asarray(simulate(size, RngStream(master_seed, index, (point,)).generator()), dtype=np.int64)

    workers = workers or settings.WORKERS
    if workers <= 1 or len(blocks) == 1:
        counts = [job(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(job, blocks))
    return tuple(int(c) for c in np.sum(counts, axis=0))


def _simulate_point(config: SimulationConfig, point: int, snr: float, simulate, workers) -> tuple[int, ...]:
    started = time.perf_counter()
    counts = count_errors(simulate, config.trials, config.master_seed, point, workers)
    logger.info(
        "grid point finished",
        extra={
            "experiment": config.experiment,
            "point": point,
            "snr": snr,
            "trials": config.trials,
            "seed": config.master_seed,
            "elapsed": round(time.perf_counter() - started, 4),
        },
    )
    return counts


def _row(config: SimulationConfig, snr: float, errors: int | None, analytic: float, ref: str, **columns) -> ErrorRateRow:
    experiment = columns.pop("experiment", config.experiment)
    if errors is None:
        return ErrorRateRow(
            experiment=experiment,
            snr=snr,
            snr_convention=config.snr_convention,
            trials=0,
            seed=config.master_seed,
            analytic_p=analytic,
            analytic_ref=ref,
            **columns,
        )
    empirical = errors / config.trials
    lo, hi = wilson_interval(errors, config.trials)
    result = compare(empirical, analytic, config.trials, one_sided=ref.endswith("-bound"))
    return ErrorRateRow(
        experiment=experiment,
        snr=snr,
        snr_convention=config.snr_convention,
        trials=config.trials,
        seed=config.master_seed,
        empirical_p=empirical,
        ci_low=lo,
        ci_high=hi,
        analytic_p=analytic,
        analytic_ref=ref,
        z_score=result.z_score,
        **columns,
    )


def _as_snr_hat(config: SimulationConfig, snr: float) -> float:
    return snr if config.snr_convention == "snr_hat" else snr / 2.0


def _as_snr(config: SimulationConfig, snr: float) -> float:
    return snr if config.snr_convention == "snr" else 2.0 * snr


def _channel_model(config: SimulationConfig) -> ChannelModel:
    ch = config.channel
    if ch.kind == "rayleigh":
        kind = FadingModel(ch.gain_variance)
    else:
        kind = BoundedModel(gains=tuple(complex(t, t) for t in ch.magnitudes))
    try:
        return ChannelModel(
            kind=kind,
            noise=CircularGaussianSpec(0.0),
            n=ch.size,
            good_indices=tuple(ch.good_indices or ()),
        )
    except DomainError as e:
        raise ConfigError(str(e), "channel") from e


def _fixed_gains(config: SimulationConfig, model: ChannelModel) -> np.ndarray:
    """One gain realisation held for the whole run (good sub-channels only)."""
    gains = draw_gains(model, RngStream(config.master_seed, FIXED_DRAW_STREAM))
    return gains[list(model.good_indices)]


def _run_pilot_estimation(config: SimulationConfig, workers) -> list[ErrorRateRow]:
    rows = []
    v = config.channel.gain_variance
    point = 0
    for l in config.l_grid:
        for snr in config.snr_grid:
            snr_hat = _as_snr_hat(config, snr)

            def simulate(size, rng, l=l, snr_hat=snr_hat):
                counts = simulate_pilot_detection(l, snr_hat, size, rng, gain_variance=v)
                return counts.errors, counts.deep_fades

            errors, fades = _simulate_point(config, point, snr, simulate, workers)
            point += 1
            rows.append(_row(config, snr, errors, pilot_error_probability(l, snr_hat * v), "eq57", l=l))
            rows.append(_row(config, snr, fades, deep_fade_exact(l, snr_hat), "eq63", l=l))
    return rows


def _spread_plan(config: SimulationConfig, k: int) -> SpreadPlan:
    p = config.plan
    try:
        return SpreadPlan(n=p.n, l=p.l, g=p.g, k=k, good_indices=tuple(p.good_indices or ()))
    except DomainError as e:
        raise ConfigError(str(e), "plan") from e


def _run_spreading(config: SimulationConfig, workers) -> list[ErrorRateRow]:
    rows = []
    point = 0
    fixed = None
    if config.channel.kind == "bounded":
        model = _channel_model(config)
        plan = _spread_plan(config, 1)
        if model.n != plan.n:
            raise ConfigError(f"bounded gain list has {model.n} entries, plan n={plan.n}", "channel.magnitudes")
        gains = np.array([complex(t, t) for t in config.channel.magnitudes])[list(plan.good_indices)]
        energy = float(np.sum(np.abs(gains) ** 2))
        if energy == 0:
            raise ConfigError("good sub-channel gains are all zero", "channel.magnitudes")
        # unit combined energy, the normalisation of the closed form
        fixed = gains / math.sqrt(energy)
    for k in config.k_grid:
        plan = _spread_plan(config, k)
        for snr in config.snr_grid:
            snr_c = _as_snr(config, snr)
            if fixed is not None:
                def simulate(size, rng, plan=plan, snr_c=snr_c):
                    return (simulate_spread_detection(plan, snr_c, size, rng, gains=fixed),)

                analytic, ref = spread_error_probability(k, snr_c), "eq87"
            else:
                v = config.channel.gain_variance

                def simulate(size, rng, plan=plan, snr_c=snr_c, v=v):
                    return (simulate_spread_detection(plan, snr_c, size, rng, gain_variance=v),)

                analytic, ref = spread_error_probability_fading(plan.l, k, snr_c, v), "eq75"
            (errors,) = _simulate_point(config, point, snr, simulate, workers)
            point += 1
            rows.append(_row(config, snr, errors, analytic, ref, l=plan.l, k=k))
    return rows


def _run_single_detection(config: SimulationConfig, workers) -> list[ErrorRateRow]:
    try:
        measurement = parse_measurement(config.measurement)
    except DomainError as e:
        raise ConfigError(str(e), "measurement") from e
    model = _channel_model(config)
    gains = _fixed_gains(config, model)
    a = complex(gains.mean())
    ref = "eq91" if isinstance(measurement, Homodyne) else "eq94"
    rows = []
    for point, snr in enumerate(config.snr_grid):
        noise_var = 1.0 / _as_snr(config, snr)

        def simulate(size, rng, noise_var=noise_var):
            return (simulate_single_detection(gains, measurement, 1.0, noise_var, size, rng),)

        (errors,) = _simulate_point(config, point, snr, simulate, workers)
        analytic = single_error_probability(a, measurement, 1.0, noise_var)
        rows.append(_row(config, snr, errors, analytic, ref, l=model.l, d=1))
    return rows


def _run_collective_detection(config: SimulationConfig, workers) -> list[ErrorRateRow]:
    cb = config.codebook
    codebook = sample_codebook(cb.d, cb.n_codewords, RngStream(cb.codeword_seed, 0))
    model = _channel_model(config)
    rows = []
    for point, snr in enumerate(config.snr_grid):
        snr_c = _as_snr(config, snr)
        noise_var = 1.0 / snr_c
        if config.channel.kind == "bounded":
            a = complex(np.array([complex(t, t) for t in config.channel.magnitudes])[list(model.good_indices)].mean())
            gains = GainVector(np.full(cb.d, a))

            def simulate(size, rng, gains=gains, noise_var=noise_var):
                return (count_ml_errors(gains, codebook, noise_var, size, rng),)

            if codebook.N == 2:
                analytic = pairwise_error(gains, *codebook.codewords, noise_var, space="real")
                ref = "eq127"
            else:
                analytic, ref = union_bound(codebook, noise_var=noise_var, gains=gains), "eq127-union-bound"
        else:
            # A_j averages l independent CN(0, v) gains
            component_var = config.channel.gain_variance / model.l

            def simulate(size, rng, noise_var=noise_var):
                return (count_ml_errors(None, codebook, noise_var, size, rng, gain_variance=component_var),)

            if codebook.N == 2:
                analytic = diversity_bound(difference_matrix(*codebook.codewords), snr_c, component_var)
                ref = "eq135-bound"
            else:
                analytic = union_bound(codebook, snr=snr_c * component_var)
                ref = "eq135-union-bound"
        (errors,) = _simulate_point(config, point, snr, simulate, workers)
        rows.append(_row(config, snr, errors, analytic, ref, l=model.l, d=cb.d, n_codewords=codebook.N))
    return rows


def _run_multiuser(config: SimulationConfig, workers) -> list[ErrorRateRow]:
    try:
        allocation = UserAllocation.from_dims(config.allocation.dims, config.allocation.k_in)
    except DomainError as e:
        raise ConfigError(str(e), "allocation.dims") from e
    cb = config.codebook
    model = _channel_model(config)
    component_var = config.channel.gain_variance / model.l
    pairs = [
        sample_codebook(r_k, 2, RngStream(cb.codeword_seed, 0, (user,))).codewords
        for user, r_k in enumerate(allocation.dims)
    ]
    rows = []
    point = 0
    for snr in config.snr_grid:
        snr_c = _as_snr(config, snr)
        noise_var = 1.0 / snr_c
        for user, (r_k, pair) in enumerate(zip(allocation.dims, pairs)):

            def simulate(size, rng, pair=pair, noise_var=noise_var):
                return (simulate_user_detection(pair, noise_var, size, rng, gain_variance=component_var),)

            (errors,) = _simulate_point(config, point, snr, simulate, workers)
            point += 1
            bound = user_error_bound(difference_matrix(*pair), snr_c * component_var, r_k)
            rows.append(
                _row(config, snr, errors, bound, "eq155-bound",
                     experiment=f"multiuser:U{user}", l=model.l, d=r_k, n_codewords=2)
            )
    return rows


def sweep_figure3(config: SimulationConfig) -> ErrorRateReport:
    """Analytic curves of the estimation-error comparison.

    Sub-channel gains are normalised to E[sum |F(T_i)|^2] = 1 (variance 1/l
    each), so the pilot-detection curves fall towards the l -> infinity limit
    Q(sqrt SNR), which the k = 1 spreading curve equals exactly.
    """
    rows = []
    for snr in config.snr_grid:
        snr_c = _as_snr(config, snr)
        for l in config.l_grid:
            rows.append(_row(config, snr, None, pilot_error_probability(l, snr_c / (2.0 * l)), "eq57", l=l))
        for k in config.k_grid:
            rows.append(_row(config, snr, None, spread_error_probability(k, snr_c), "eq87", k=k))
        rows.append(_row(config, snr, None, q_function(math.sqrt(snr_c)), "eq78"))
    return ErrorRateReport(
        config=config.model_dump(mode="json"), snr_convention=config.snr_convention, rows=rows
    )


_RUNNERS = {
    "pilot-estimation": _run_pilot_estimation,
    "spreading": _run_spreading,
    "single-detection": _run_single_detection,
    "collective-detection": _run_collective_detection,
    "multiuser": _run_multiuser,
}


def run(config: SimulationConfig, workers: int | None = None) -> ErrorRateReport:
    if config.experiment == "fig3":
        return sweep_figure3(config)
    started = time.perf_counter()
    logger.info(
        "experiment started",
        extra={"experiment": config.experiment, "trials": config.trials, "seed": config.master_seed},
    )
    rows = _RUNNERS[config.experiment](config, workers)
    report = ErrorRateReport(config=config.model_dump(mode="json"), snr_convention=config.snr_convention, rows=rows)
    logger.info(
        "experiment finished",
        extra={"experiment": config.experiment, "rows": len(rows), "passed": report.passed,
               "elapsed": round(time.perf_counter() - started, 4)},
    )
    return report
