"""Seeded, parallel experiment harness.

Each experiment is a list of independent trials; trial t runs on a Philox
stream whose seed is a pure function of (base_seed, t), so results are
bit-identical whether trials run serially or on a worker pool.  Records
serialize to JSON lines, summaries to a single JSON object, and parameter
sweeps to CSV.

Verdicts are one-sided where the target is an analytic bound (empirical
values may sit far below a loose bound; only exceeding it by more than
3 standard errors fails) and tolerance- or threshold-based otherwise.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import capacity as cap
from .channel import (
    ChannelParams,
    SamplingSpec,
    apply_noise,
    q0_of,
    sample_counts,
    transmit,
    transmit_traced,
)
from .codec import (
    CodecConfig,
    decode_output,
    encode_message,
    achieved_rate,
    random_message,
    short_molecule_decode,
    short_molecule_encode,
)
from .rng import derive_seed, generator_from_seed

__all__ = [
    "ExperimentKind",
    "ShortMoleculeConfig",
    "ExperimentSpec",
    "TrialRecord",
    "Summary",
    "RunResult",
    "run",
    "verify_chernoff",
    "measure_undetected_swaps",
    "rate_vs_capacity_sweep",
    "tradeoff_sweep",
    "region_sweep",
    "records_to_jsonl",
    "write_csv",
]

WORKERS_ENV = "DNACHANNEL_WORKERS"


class ExperimentKind(Enum):
    ESTIMATE_Q0 = "EstimateQ0"
    DECODE_SUCCESS = "DecodeSuccess"
    BOUND_CHECK = "BoundCheck"
    TRADEOFF_SWEEP = "TradeoffSweep"
    REGION_SWEEP = "RegionSweep"
    COUPON_TAIL = "CouponTail"


@dataclass(frozen=True)
class ShortMoleculeConfig:
    """Codec stand-in selecting the short-molecule replication scheme."""

    M: int
    L: int


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible experiment: kind, parameters, trial count, seed.

    Verdict fields are optional; when set, the summary carries a PASS/FAIL:
    ``expected``/``tolerance`` check |mean - expected| <= tolerance,
    ``bound`` checks mean <= bound + 3*stderr (one-sided), and
    ``min_rate`` checks mean >= min_rate.
    """

    kind: ExperimentKind
    trials: int
    base_seed: int
    channel: ChannelParams | None = None
    codec: CodecConfig | ShortMoleculeConfig | None = None
    # BoundCheck (per-read Chernoff) parameters
    read_len: int = 0
    p: float = 0.0
    delta: float = 0.0
    reads_per_trial: int = 0
    # CouponTail parameters (delta shared with above)
    coupon_M: int = 0
    coupon_lam: float = 0.0
    # Sweep grid (TradeoffSweep / RegionSweep)
    grid: tuple[float, ...] = ()
    beta: float = 0.0
    # Verdict targets
    expected: float | None = None
    tolerance: float | None = None
    bound: float | None = None
    min_rate: float | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")

    @classmethod
    def estimate_q0(cls, channel, trials, base_seed, **verdict):
        return cls(ExperimentKind.ESTIMATE_Q0, trials, base_seed,
                   channel=channel, **verdict)

    @classmethod
    def decode_success(cls, channel, codec, trials, base_seed, **verdict):
        return cls(ExperimentKind.DECODE_SUCCESS, trials, base_seed,
                   channel=channel, codec=codec, **verdict)

    @classmethod
    def chernoff(cls, read_len, p, delta, reads_per_trial, trials, base_seed, **verdict):
        return cls(ExperimentKind.BOUND_CHECK, trials, base_seed, read_len=read_len,
                   p=p, delta=delta, reads_per_trial=reads_per_trial, **verdict)

    @classmethod
    def coupon_tail(cls, M, lam, delta, trials, base_seed, **verdict):
        return cls(ExperimentKind.COUPON_TAIL, trials, base_seed,
                   coupon_M=M, coupon_lam=lam, delta=delta, **verdict)


@dataclass(frozen=True)
class TrialRecord:
    """One trial's outcome; fields unavailable to an experiment kind are None."""

    trial: int
    seed: int
    N: int | None = None
    distinct_seen: int | None = None
    decode_success: bool | None = None
    erasures: int | None = None
    collisions: int | None = None
    flip_rate: float | None = None

    def to_json(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "N": self.N,
            "distinct_seen": self.distinct_seen,
            "decode_success": self.decode_success,
            "erasures": self.erasures,
            "collisions": self.collisions,
            "flip_rate": self.flip_rate,
        }


@dataclass(frozen=True)
class Summary:
    """Aggregate of the per-trial metric, with an optional verdict."""

    metric: str
    mean: float
    stderr: float
    ci95: tuple[float, float]
    trials: int
    expected: float | None = None
    tolerance: float | None = None
    bound: float | None = None
    min_rate: float | None = None
    verdict: str | None = None

    def to_json(self) -> dict:
        out = {
            "metric": self.metric,
            "mean": self.mean,
            "stderr": self.stderr,
            "ci95": list(self.ci95),
            "trials": self.trials,
        }
        for key in ("expected", "tolerance", "bound", "min_rate", "verdict"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class RunResult:
    records: list
    summary: Summary | None
    table: list | None = None  # sweep kinds produce a row table instead


_METRIC_NAME = {
    ExperimentKind.ESTIMATE_Q0: "miss_fraction",
    ExperimentKind.DECODE_SUCCESS: "success_rate",
    ExperimentKind.BOUND_CHECK: "tail_fraction",
    ExperimentKind.COUPON_TAIL: "exceed_fraction",
}


def run(spec: ExperimentSpec, workers: int | None = None) -> RunResult:
    """Execute an experiment; deterministic given base_seed for any worker count."""
    if spec.kind is ExperimentKind.TRADEOFF_SWEEP:
        return RunResult([], None, tradeoff_sweep(spec.beta, spec.grid))
    if spec.kind is ExperimentKind.REGION_SWEEP:
        return RunResult([], None, region_sweep(spec.grid))

    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    fn = _TRIAL_FN[spec.kind]

    def one(t: int) -> tuple[TrialRecord, float]:
        seed = derive_seed(spec.base_seed, t)
        rng = generator_from_seed(seed)
        try:
            fields, metric = fn(spec, rng)
        except Exception:
            # A failed trial yields an empty record, never aborts the batch.
            fields, metric = {}, math.nan
        return TrialRecord(trial=t, seed=seed, **fields), metric

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(spec.trials)))
    else:
        results = [one(t) for t in range(spec.trials)]

    records = [r for r, _ in results]
    metrics = np.array([m for _, m in results], dtype=float)
    return RunResult(records, _summarize(spec, metrics))


def _summarize(spec: ExperimentSpec, metrics: np.ndarray) -> Summary:
    good = metrics[~np.isnan(metrics)]
    n = good.size
    mean = float(good.mean()) if n else math.nan
    stderr = float(good.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ci95 = (mean - 1.96 * stderr, mean + 1.96 * stderr)
    verdict = None
    if spec.expected is not None and spec.tolerance is not None:
        verdict = "PASS" if abs(mean - spec.expected) <= spec.tolerance else "FAIL"
    elif spec.bound is not None:
        verdict = "PASS" if mean <= spec.bound + 3.0 * stderr else "FAIL"
    elif spec.min_rate is not None:
        verdict = "PASS" if mean >= spec.min_rate else "FAIL"
    return Summary(
        metric=_METRIC_NAME[spec.kind], mean=mean, stderr=stderr, ci95=ci95,
        trials=int(n), expected=spec.expected, tolerance=spec.tolerance,
        bound=spec.bound, min_rate=spec.min_rate, verdict=verdict,
    )


# ---------------------------------------------------------------------------
# Trial bodies
# ---------------------------------------------------------------------------

def _trial_estimate_q0(spec: ExperimentSpec, rng) -> tuple[dict, float]:
    ch = spec.channel
    counts = sample_counts(ch.sampling, ch.M, rng)
    distinct = int((counts > 0).sum())
    miss = 1.0 - distinct / ch.M
    return {"N": int(counts.sum()), "distinct_seen": distinct}, miss


def _trial_decode(spec: ExperimentSpec, rng) -> tuple[dict, float]:
    ch = spec.channel
    if isinstance(spec.codec, ShortMoleculeConfig):
        K = 1 << (spec.codec.L - 1)
        bits = rng.integers(0, 2, size=K, dtype=np.uint8)
        cw = short_molecule_encode(bits, spec.codec.M, spec.codec.L)
        out, sources, counts = transmit_traced(cw, ch, rng)
        recovered = short_molecule_decode(out, spec.codec.L)
        success = bool((recovered == bits).all())
        erasures = int((recovered < 0).sum())
        collisions = None
    else:
        msg = random_message(spec.codec, rng)
        cw = encode_message(msg, spec.codec)
        out, sources, counts = transmit_traced(cw, ch, rng)
        report = decode_output(out, spec.codec)
        # The decoder's own verdict (erasures within the outer budget); a
        # rare wrong message behind a reported success is a separate,
        # measured phenomenon (see measure_undetected_swaps).
        success = report.ok
        erasures = report.erasures
        collisions = report.collisions
    flip_rate = None
    if out.N > 0:
        flip_rate = float((out.reads != cw.molecules[sources]).mean())
    fields = {
        "N": out.N,
        "distinct_seen": int((counts > 0).sum()),
        "decode_success": success,
        "erasures": erasures,
        "collisions": collisions,
        "flip_rate": flip_rate,
    }
    return fields, float(success)


def _trial_chernoff(spec: ExperimentSpec, rng) -> tuple[dict, float]:
    reads = apply_noise(
        np.zeros((spec.reads_per_trial, spec.read_len), dtype=np.uint8), spec.p, rng
    )
    flips = reads.sum(axis=1)
    tail = float((flips >= spec.delta * spec.read_len).mean())
    fields = {"N": spec.reads_per_trial, "flip_rate": float(reads.mean())}
    return fields, tail


def _trial_coupon(spec: ExperimentSpec, rng) -> tuple[dict, float]:
    M, lam = spec.coupon_M, spec.coupon_lam
    n_draws = round(lam * M)
    draws = rng.integers(0, M, size=n_draws)
    distinct = int(np.unique(draws).size)
    threshold = (1.0 - math.exp(-lam) + spec.delta) * M
    fields = {"N": n_draws, "distinct_seen": distinct}
    return fields, float(distinct >= threshold)


_TRIAL_FN = {
    ExperimentKind.ESTIMATE_Q0: _trial_estimate_q0,
    ExperimentKind.DECODE_SUCCESS: _trial_decode,
    ExperimentKind.BOUND_CHECK: _trial_chernoff,
    ExperimentKind.COUPON_TAIL: _trial_coupon,
}


# ---------------------------------------------------------------------------
# One-shot verifications and sweeps
# ---------------------------------------------------------------------------

class ChernoffCheck(NamedTuple):
    empirical: float
    bound: float
    passed: bool
    stderr: float


def verify_chernoff(L: int, p: float, delta: float, reads: int, seed: int) -> ChernoffCheck:
    """Empirically check the per-read tail bound 2^(-L D(delta||p)).

    Simulates ``reads`` noisy reads, measures the fraction with >= delta*L
    flipped bits, and passes iff it does not exceed the bound by more than
    3 binomial standard errors (one-sided: falling far below is fine).
    """
    bound = cap.chernoff_read_error_bound(L, p, delta)
    rng = generator_from_seed(seed)
    noisy = apply_noise(np.zeros((reads, L), dtype=np.uint8), p, rng)
    empirical = float((noisy.sum(axis=1) >= delta * L).mean())
    stderr = math.sqrt(max(empirical * (1.0 - empirical), 1.0 / reads) / reads)
    return ChernoffCheck(empirical, bound, empirical <= bound + 3.0 * stderr, stderr)


def measure_undetected_swaps(
    cfg: CodecConfig, channel: ChannelParams, trials: int, base_seed: int
) -> float:
    """Frequency of decodes that report success with a wrong message."""
    bad = 0
    for t in range(trials):
        rng = generator_from_seed(derive_seed(base_seed, t))
        msg = random_message(cfg, rng)
        out = transmit(encode_message(msg, cfg), channel, rng)
        report = decode_output(out, cfg)
        if report.ok and not np.array_equal(report.message, msg):
            bad += 1
    return bad / trials


def rate_vs_capacity_sweep(
    var: str,
    values,
    cfg: CodecConfig,
    trials: int,
    base_seed: int,
    beta: float | None = None,
    p: float = 0.0,
    sampling: SamplingSpec | None = None,
) -> list[dict]:
    """Analytic capacity vs. codec rate vs. empirical success along a grid.

    ``var`` selects the swept quantity: "lambda" (Poisson depth), "q"
    (Bernoulli miss probability), or "p" (crossover, with ``sampling``
    fixed).  Each row reports the capacity formula value at that point, the
    config's exact rate, and the decode success rate over ``trials``.

    ``beta`` feeds only the capacity column (default: the codec's own
    L / log2 M); the simulated channel always uses the codec's geometry.
    """
    if var not in ("lambda", "q", "p"):
        raise ValueError(f"var must be lambda, q, or p, got {var!r}")
    if var == "p" and sampling is None:
        raise ValueError("sweeping p requires a fixed sampling spec")
    beta_geom = cfg.L / math.log2(cfg.M)
    if beta is None:
        beta = beta_geom
    rate = float(achieved_rate(cfg))
    rows = []
    for i, value in enumerate(values):
        value = float(value)
        if var == "lambda":
            spec_i, p_i = SamplingSpec.poisson(value), p
        elif var == "q":
            spec_i, p_i = SamplingSpec.bernoulli(value), p
        else:
            spec_i, p_i = sampling, value
        q0 = q0_of(spec_i)
        if p_i == 0.0:
            c = cap.noise_free_capacity(q0, beta).value
        else:
            c = cap.noisy_capacity(q0, p_i, beta).value
        channel = ChannelParams(M=cfg.M, beta=beta_geom, p=p_i,
                                sampling=spec_i, L=cfg.L)
        sub = ExperimentSpec.decode_success(
            channel, cfg, trials, derive_seed(base_seed, i)
        )
        success = run(sub).summary.mean
        rows.append({
            "lambda": spec_i.lam,
            "beta": beta,
            "p": p_i,
            "q": q0,
            "capacity": c,
            "achieved_rate": rate,
            "success_rate": success,
        })
    return rows


def tradeoff_sweep(beta: float, lams) -> list[dict]:
    """Storage/recovery frontier rows along a coverage-depth grid."""
    rows = []
    for lam in lams:
        pt = cap.tradeoff_point(float(lam), beta)
        rows.append({"lambda": pt.lam, "beta": beta,
                     "rs_max": pt.rs_max, "rr_max": pt.rr_max})
    return rows


def region_sweep(p_values) -> list[dict]:
    """Proven-region boundary rows (p, beta_min); p >= 1/4 yields no row."""
    rows = []
    for p in sorted(float(x) for x in p_values):
        if p >= 0.25:
            continue
        rows.append({"p": p, "beta_min": cap.region_boundary(p)})
    return rows


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def records_to_jsonl(records) -> str:
    """One TrialRecord per line, keys in the documented order."""
    return "".join(json.dumps(r.to_json()) + "\n" for r in records)


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    """Write sweep rows as CSV with a header naming each quantity."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row.get(c)) for c in columns) + "\n")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)
