"""Monte-Carlo orchestration, figure presets and CSV output.

A trial draws one channel and one error profile from streams keyed by the
trial index, so every SNR point of a scenario sees the same channels and
the same hardware (only receiver noise is redrawn per SNR). Trials run on
a thread pool; results are collected in trial order and reduced with
:func:`math.fsum`, so output does not depend on the number of workers.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (RateResult, expected_interference, interference_samples, mean_ci,
                       sum_rate_mismatch)
from .beamforming import TWO_PI, digital_precoder, power_factor, svd_beamformer
from .config import ScenarioConfig
from .errors import ConfigError, SingularMatrixError
from .estimation import noise_variances, run_algorithm1, run_codebook_baseline
from .geometry import draw_channel
from .hardware import PhaseErrorProfile, draw_profile
from .streams import Role, substream

CSV_HEADER = ("scenario", "method", "snr_db", "sigma_delta", "sigma_alpha", "K", "N_BS",
              "metric", "value", "ci95", "trials", "seed")

THREADS_ENV = "HBF_SIM_THREADS"


@dataclass
class TrialRecord:
    """Raw per-trial output; lists are indexed by SNR point."""

    k_i: int
    sum_rate: list[float] = field(default_factory=list)
    eta2: list[float] = field(default_factory=list)
    x: list[np.ndarray] = field(default_factory=list)
    training_slots: int = 0
    psi_sq_err: list[np.ndarray] = field(default_factory=list)
    singular: int = 0


def snr_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def trial_inputs(config: ScenarioConfig, trial: int):
    """Channel and error profile of one trial."""
    channel = draw_channel(config, substream(config.seed, trial, Role.CHANNEL))
    if config.method == "svd-perfect-ps":
        profile = PhaseErrorProfile.ideal(config.n_bs, config.n_ue, config.n_users)
    else:
        profile = draw_profile(config.n_bs, config.n_ue, config.n_users, config.sigma_delta,
                               config.sigma_alpha, substream(config.seed, trial, Role.BS_ERRORS),
                               substream(config.seed, trial, Role.UE_ERRORS))
    return channel, profile


def _svd_trial(config: ScenarioConfig, channel, profile) -> TrialRecord:
    perfect = config.method == "svd-perfect-ps"
    bf = svd_beamformer(channel, config.bits_bs, config.bits_ue, None if perfect else profile,
                        config.schedule_rule, config.tie_break)
    eq = bf.equivalent(channel.H)
    W, _ = bf.restricted()
    nv = noise_variances(W, 1.0, config.noise_convention)
    rec = TrialRecord(k_i=bf.n_active)
    for snr in config.snr_db:
        rho = snr_linear(snr)
        try:
            F_BB = digital_precoder(eq.ideal, config.precoder, rho)
        except SingularMatrixError:
            rec.singular += 1
            rec.sum_rate.append(0.0)
            rec.eta2.append(0.0)
            rec.x.append(np.zeros(0))
            continue
        eta = power_factor(F_BB)
        rec.sum_rate.append(sum_rate_mismatch(eq.impaired, eq.ideal, F_BB, eta, rho, nv))
        rec.eta2.append(eta * eta)
        rec.x.append(interference_samples(eq.delta, F_BB))
    return rec


def _training_trial(config: ScenarioConfig, channel, profile, trial: int) -> TrialRecord:
    rec = TrialRecord(k_i=0)
    true_psi = channel.paths.los_psi
    for i, snr in enumerate(config.snr_db):
        rng = substream(config.seed, trial, Role.NOISE, i)
        kwargs = dict(noise_var=1.0, bits_bs=config.bits_bs, bits_ue=config.bits_ue,
                      precoder=config.precoder, noise_convention=config.noise_convention)
        try:
            if config.method == "algorithm1":
                res = run_algorithm1(channel, profile, snr_linear(snr), rng,
                                     cycles=config.pilot_cycles, variant=config.pilot_variant,
                                     remove_mean=config.remove_mean, rule=config.schedule_rule,
                                     tie=config.tie_break, **kwargs)
            else:
                res = run_codebook_baseline(channel, profile, snr_linear(snr), rng, **kwargs)
        except SingularMatrixError:
            rec.singular += 1
            rec.sum_rate.append(0.0)
            continue
        rec.k_i = res.beamformer.n_active
        rec.sum_rate.append(res.sum_rate)
        rec.eta2.append(res.beamformer.eta ** 2)
        rec.training_slots = res.training_slots
        if res.psi_hat.size:
            d = np.mod(res.psi_hat - true_psi, TWO_PI)
            rec.psi_sq_err.append(np.minimum(d, TWO_PI - d) ** 2)
    return rec


def run_trial(config: ScenarioConfig, trial: int) -> TrialRecord:
    """Simulate one trial of ``config`` at every SNR point."""
    channel, profile = trial_inputs(config, trial)
    if config.method in ("svd-perfect-ps", "svd-impaired"):
        return _svd_trial(config, channel, profile)
    return _training_trial(config, channel, profile, trial)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    return threads


def simulate_trials(config: ScenarioConfig, threads: int | None = None) -> list[TrialRecord]:
    """All trial records of ``config`` in trial order."""
    n = resolve_threads(threads)
    if n == 1:
        return [run_trial(config, t) for t in range(config.trials)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda t: run_trial(config, t), range(config.trials)))


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    method: str
    snr_db: float
    sigma_delta: float
    sigma_alpha: float
    K: int
    N_BS: int
    metric: str
    value: float
    ci95: float
    trials: int
    seed: int


def jensen_rates(records: list[TrialRecord], snr_index: int, rho: float) -> np.ndarray:
    """Per-trial rates with each user's interference replaced by the pooled mean."""
    xs = [r.x[snr_index] for r in records if r.x and r.x[snr_index].size]
    pooled = math.fsum(np.concatenate(xs)) / sum(x.size for x in xs) if xs else 0.0
    out = []
    for r in records:
        g = r.eta2[snr_index] * rho
        out.append(r.k_i * math.log2(1.0 + g / (g * pooled + 1.0)) if g > 0 else 0.0)
    return np.array(out)


def theory_rates(records: list[TrialRecord], snr_index: int, rho: float,
                 config: ScenarioConfig) -> np.ndarray:
    """Per-trial rates using the simplified closed-form interference."""
    out = []
    for r in records:
        g = r.eta2[snr_index] * rho
        lb = expected_interference(config.sigma_delta, config.sigma_alpha, config.n_bs,
                                   config.n_ue, r.k_i, "simplified")
        out.append(r.k_i * math.log2(1.0 + g / (g * lb + 1.0)) if g > 0 else 0.0)
    return np.array(out)


def aggregate(config: ScenarioConfig, records: list[TrialRecord]) -> list[ResultRow]:
    """Reduce trial records to one row per (SNR point, metric)."""
    rows = []

    def row(snr, metric, samples):
        mean, ci = mean_ci(samples)
        rows.append(ResultRow(config.name, config.method, snr, config.sigma_delta,
                              config.sigma_alpha, config.n_users, config.n_bs, metric,
                              mean, ci, len(records), config.seed))

    svd = config.method in ("svd-perfect-ps", "svd-impaired")
    for i, snr in enumerate(config.snr_db):
        rho = snr_linear(snr)
        row(snr, "sum_rate", [r.sum_rate[i] for r in records])
        if svd and config.method == "svd-impaired":
            row(snr, "sum_rate_jensen", jensen_rates(records, i, rho))
            row(snr, "sum_rate_theory", theory_rates(records, i, rho, config))
            user_means = [float(np.mean(r.x[i])) for r in records if r.x[i].size]
            row(snr, "interference_mean", user_means or [0.0])
        row(snr, "k_i_mean", [r.k_i for r in records])
        if not svd:
            row(snr, "training_slots", [r.training_slots for r in records])
        if config.method == "algorithm1":
            errs = [r.psi_sq_err[i] for r in records if len(r.psi_sq_err) > i]
            if errs:
                rows.append(ResultRow(config.name, config.method, snr, config.sigma_delta,
                                      config.sigma_alpha, config.n_users, config.n_bs,
                                      "psi_rmse", math.sqrt(math.fsum(np.concatenate(errs))
                                                            / sum(e.size for e in errs)),
                                      0.0, len(records), config.seed))
    return rows


def run_scenario(config: ScenarioConfig, threads: int | None = None) -> list[ResultRow]:
    """Simulate ``config`` and return its aggregated result rows."""
    config.validate()
    return aggregate(config, simulate_trials(config, threads))


def sum_rate_error_mc(config: ScenarioConfig, threads: int | None = None) -> list[RateResult]:
    """Monte-Carlo sum rate of the impaired SVD design, one result per SNR."""
    cfg = config.with_(method="svd-impaired")
    records = simulate_trials(cfg, threads)
    return [RateResult.from_samples("svd-impaired", snr, [r.sum_rate[i] for r in records],
                                    [r.k_i for r in records])
            for i, snr in enumerate(cfg.snr_db)]


FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")


def figure_preset(name: str, trials: int = 1000, seed: int = 2024) -> list[ScenarioConfig]:
    """Scenario list behind one of the six result figures."""
    base_a = ScenarioConfig(n_bs=128, n_ue=4, n_users=10, bits_bs=3, bits_ue=3, rician_factor=30.0,
                            n_paths=4, trials=trials, seed=seed)
    base_b = ScenarioConfig(n_bs=128, n_ue=4, n_users=16, bits_bs=7, bits_ue=2, rician_factor=30.0,
                            n_paths=2, trials=trials, seed=seed, snr_db=tuple(range(0, 45, 5)))

    def tag(cfg: ScenarioConfig, **extra) -> ScenarioConfig:
        label = f"{name}-{cfg.method}-K{cfg.n_users}-N{cfg.n_bs}-s{cfg.sigma_delta:g}"
        if cfg.method == "algorithm1":
            label += f"-P{cfg.pilot_cycles}"
        if cfg.precoder != "zf":
            label += f"-{cfg.precoder}"
        for k, v in extra.items():
            label += f"-{k}{v:g}"
        return cfg.with_(name=label)

    out: list[ScenarioConfig] = []
    if name == "fig1":
        snr = tuple(range(-10, 35, 5))
        out.append(tag(base_a.with_(method="svd-perfect-ps", snr_db=snr)))
        for s in (0.01, 0.1):
            out.append(tag(base_a.with_(snr_db=snr, sigma_delta=s, sigma_alpha=s)))
    elif name == "fig2":
        snr = tuple(range(-10, 65, 5))
        out.append(tag(base_a.with_(method="svd-perfect-ps", snr_db=snr)))
        for sd, sa in ((0.01, 0.01), (0.05, 0.05), (0.1, 0.1)):
            for pre in ("zf", "rzf"):
                out.append(tag(base_a.with_(snr_db=snr, sigma_delta=sd, sigma_alpha=sa, precoder=pre)))
    elif name == "fig3":
        for k in range(4, 17):
            out.append(tag(base_a.with_(method="svd-perfect-ps", n_users=k, snr_db=(20.0,))))
            for s in (0.01, 0.1):
                out.append(tag(base_a.with_(n_users=k, snr_db=(20.0,), sigma_delta=s, sigma_alpha=s)))
    elif name == "fig4":
        for n_bs, k in ((128, 16), (256, 16), (128, 32)):
            cfg = base_b.with_(n_bs=n_bs, n_users=k, bits_bs=int(math.log2(n_bs)),
                               sigma_delta=0.01, sigma_alpha=0.01)
            for method in ("svd-perfect-ps", "svd-impaired", "codebook-baseline", "algorithm1"):
                out.append(tag(cfg.with_(method=method)))
    elif name == "fig5":
        out.append(tag(base_b.with_(method="svd-perfect-ps")))
        out.append(tag(base_b.with_(method="algorithm1", sigma_delta=0.0, sigma_alpha=0.0)))
        for s in (0.01, 0.1):
            cfg = base_b.with_(sigma_delta=s, sigma_alpha=s)
            for method in ("svd-impaired", "codebook-baseline", "algorithm1"):
                out.append(tag(cfg.with_(method=method)))
        for p in (2, 8):
            out.append(tag(base_b.with_(method="algorithm1", sigma_delta=0.1, sigma_alpha=0.1,
                                        pilot_cycles=p)))
    elif name == "fig6":
        for n_paths in (2, 4):
            for v in (1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0):
                cfg = base_b.with_(snr_db=(15.0,), rician_factor=v, n_paths=n_paths,
                                   sigma_delta=0.1, sigma_alpha=0.1)
                out.append(tag(cfg.with_(method="svd-perfect-ps"), L=n_paths, v=v))
                out.append(tag(cfg.with_(method="codebook-baseline"), L=n_paths, v=v))
                for p in (1, 2, 8):
                    out.append(tag(cfg.with_(method="algorithm1", pilot_cycles=p), L=n_paths, v=v))
    else:
        raise ConfigError(f"unknown figure preset {name!r}; expected one of {FIGURES}")
    return out


def format_value(x: float) -> str:
    """Fixed-point decimal with 6 significant digits."""
    x = float(x)
    if not math.isfinite(x):
        return repr(x)
    return np.format_float_positional(x, precision=6, unique=False, fractional=False, trim="-")


def write_csv(rows, path) -> Path:
    """Write result rows with the standard header; returns the path."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([r.scenario, r.method, format_value(r.snr_db),
                                 format_value(r.sigma_delta), format_value(r.sigma_alpha), r.K,
                                 r.N_BS, r.metric, format_value(r.value), format_value(r.ci95),
                                 r.trials, r.seed])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_csv(path) -> list[ResultRow]:
    """Parse a file produced by :func:`write_csv`."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [ResultRow(d["scenario"], d["method"], float(d["snr_db"]), float(d["sigma_delta"]),
                          float(d["sigma_alpha"]), int(d["K"]), int(d["N_BS"]), d["metric"],
                          float(d["value"]), float(d["ci95"]), int(d["trials"]), int(d["seed"]))
                for d in reader]
