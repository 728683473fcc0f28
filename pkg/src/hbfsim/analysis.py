"""Sum rates, interference statistics and closed-form bounds.

Notation: ``rho`` is the transmit power, ``noise_var`` the post-combiner
noise variance, ``eta`` the precoder power normalisation and ``x`` the
residual interference ``dh F_BB F_BB^H dh^H`` that a user sees when the
digital precoder was designed for a different equivalent channel than the
one actually realised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamforming import digital_precoder, power_factor, schedule_users

TWO_PI = 2.0 * np.pi

INTERFERENCE_FORMS = ("exact", "simplified")


def sum_rate_perfect(eta: float, rho: float, noise_var: float, k_i: int) -> float:
    """``K_I log2(1 + eta^2 rho / noise_var)`` for interference-free ZF."""
    return k_i * math.log2(1.0 + eta * eta * rho / noise_var)


def sum_rate_error_approx(eta: float, rho, noise_var: float, k_i: int, ex: float):
    """Sum rate with the interference replaced by its expectation ``ex``."""
    if ex < 0:
        raise ValueError(f"expected interference must be >= 0, got {ex}")
    g = eta * eta * np.asarray(rho, dtype=float)
    return k_i * np.log2(1.0 + g / (g * ex + noise_var))


def rate_loss(eta: float, rho, noise_var: float, k_i: int, ex: float):
    """Rate loss ``K_I log2(1 + eta^2 rho ex / noise_var)``.

    This upper-bounds the exact difference between :func:`sum_rate_perfect`
    and :func:`sum_rate_error_approx` and is tight when ``ex`` is small.
    """
    if ex < 0:
        raise ValueError(f"expected interference must be >= 0, got {ex}")
    return k_i * np.log2(1.0 + eta * eta * np.asarray(rho, dtype=float) * ex / noise_var)


def interference_samples(delta: np.ndarray, F_BB: np.ndarray) -> np.ndarray:
    """Per-user ``x_k = ||dh_k F_BB||^2`` for every row of ``delta``."""
    D = np.atleast_2d(delta) @ F_BB
    return np.sum(np.abs(D) ** 2, axis=1)


def interference_sample(delta: np.ndarray, F_BB: np.ndarray, k: int) -> float:
    """Residual interference of the ``k``-th non-silent user."""
    return float(interference_samples(np.atleast_2d(delta)[k:k + 1], F_BB)[0])


def sinr_mismatch(H_actual: np.ndarray, H_design: np.ndarray, F_BB: np.ndarray,
                  eta: float, rho: float, noise_var=1.0) -> np.ndarray:
    """Per-user SINR when ``F_BB`` was designed for ``H_design``.

    The useful term is the designed gain ``(H_design F_BB)_kk`` and
    everything else, the designed cross terms plus the mismatch
    ``(H_actual - H_design) F_BB``, is treated as interference. For a ZF
    design the designed cross terms vanish and the SINR reduces to
    ``eta^2 rho / (eta^2 rho x_k + noise_var)``.
    """
    G = H_design @ F_BB
    useful = np.abs(np.diag(G)) ** 2
    leak = np.sum(np.abs(G) ** 2, axis=1) - useful
    x = interference_samples(H_actual - H_design, F_BB)
    g = eta * eta * rho
    return g * useful / (g * (leak + x) + np.asarray(noise_var, dtype=float))


def sum_rate_mismatch(H_actual, H_design, F_BB, eta, rho, noise_var=1.0) -> float:
    return float(np.sum(np.log2(1.0 + sinr_mismatch(H_actual, H_design, F_BB, eta, rho, noise_var))))


@dataclass(frozen=True)
class ImpairmentMoments:
    """Second-order statistics of the array-averaged error factors.

    ``eps_ue = mean_i alpha_i e^{j delta_i}`` over an ``N_UE`` combiner,
    ``eps_bs`` likewise over ``N_BS`` elements of one precoder column, and
    ``xi`` is the fluctuation of the cross-user BS sum around zero.
    """

    e_abs_eps_ue2: float
    e_abs_eps_bs2: float
    e_re_eps_ue_eps_bs: float
    e_abs_xi2: float


def _c(sigma_delta: float, sigma_alpha: float) -> tuple[float, float]:
    if sigma_delta < 0 or sigma_alpha < 0:
        raise ValueError("error standard deviations must be >= 0")
    e = math.exp(-sigma_delta ** 2)
    return 1.0 + sigma_alpha ** 2 - e, e


def impairment_moments(sigma_delta: float, sigma_alpha: float, n_bs: int, n_ue: int) -> ImpairmentMoments:
    """Closed-form moments of the error sums; ``c = 1 + sa^2 - exp(-sd^2)``."""
    c, e = _c(sigma_delta, sigma_alpha)
    return ImpairmentMoments(c / n_ue + e, c / n_bs + e, e, c / n_bs)


def expected_interference(sigma_delta: float, sigma_alpha: float, n_bs: int, n_ue: int,
                          k_i: int, form: str = "exact") -> float:
    """Closed-form expected residual interference per user.

    ``"exact"`` is ``(K_I c/N_BS + e)(c/N_UE + e) - 2e + 1`` with
    ``e = exp(-sd^2)``; ``"simplified"`` linearises ``1 - e ~ sd^2`` and
    drops the product of small terms.
    """
    if form == "exact":
        c, e = _c(sigma_delta, sigma_alpha)
        return (k_i * c / n_bs + e) * (c / n_ue + e) - 2.0 * e + 1.0
    if form == "simplified":
        _c(sigma_delta, sigma_alpha)
        s = sigma_delta ** 2 + sigma_alpha ** 2
        return (sigma_delta ** 2) ** 2 + k_i * s * s / (n_bs * n_ue) + s * math.exp(-sigma_delta ** 2) * (
            k_i / n_bs + 1.0 / n_ue)
    raise ValueError(f"unknown form {form!r}; expected one of {INTERFERENCE_FORMS}")


def conditional_expected_interference(H: np.ndarray, w: np.ndarray, F: np.ndarray,
                                      F_BB: np.ndarray, sigma_delta: float,
                                      sigma_alpha: float) -> float:
    """``E[x]`` for one user given the channel and the ideal beamformers.

    The expectation is over fresh errors on the user's combiner ``w``
    (length ``N_UE``) and on every entry of the analog precoder ``F``
    (``N_BS x K_I``). With ``m2 = exp(-sd^2)`` and ``s = 1 + sa^2`` the
    perturbed row ``w_E^H H F_E`` has mean ``m2 * c F`` (``c = w^H H``) and
    an entrywise-independent excess scatter, which gives a closed-form
    quadratic form without sampling.
    """
    mu2 = math.exp(-sigma_delta ** 2)
    s = 1.0 + sigma_alpha ** 2
    c = w.conj() @ H
    h = c @ F
    # R = mu2 c^H c + (s - mu2) sum_n |w_n|^2 H_n^H H_n, never formed explicitly
    wa2 = np.abs(w) ** 2
    HF = H @ F
    FRF = mu2 * np.outer(h, h.conj()) + (s - mu2) * (HF.T @ (wa2[:, None] * HF.conj()))
    r_diag = mu2 * np.abs(c) ** 2 + (s - mu2) * (wa2 @ np.abs(H) ** 2)
    C = mu2 * FRF + (s - mu2) * np.diag(r_diag @ np.abs(F) ** 2)
    M = F_BB @ F_BB.conj().T
    return float(np.real(np.sum(M * C)) + (1.0 - 2.0 * mu2) * np.real(h @ M @ h.conj()))


def _check_distribution(p_ki: dict) -> None:
    total = math.fsum(p_ki.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"K_I probabilities must sum to 1, got {total!r}")
    if any(p < 0 for p in p_ki.values()):
        raise ValueError("K_I probabilities must be non-negative")


def ceiling(p_ki: dict, lb) -> float:
    """High-SNR limit ``sum_K p(K) K log2(1 + 1/LB(K))``.

    Parameters
    ----------
    p_ki : dict
        Probability of each non-silent user count.
    lb : callable, dict or float
        Expected interference per user count.
    """
    _check_distribution(p_ki)
    total = []
    for k, p in p_ki.items():
        if p == 0:
            continue
        bound = lb(k) if callable(lb) else (lb[k] if isinstance(lb, dict) else float(lb))
        total.append(p * k * math.log2(1.0 + 1.0 / bound))
    return math.fsum(total)


def ceiling_three_term(p_top: float, p_next: float, k: int, lb) -> float:
    """Ceiling with the tail mass lumped at ``K - 2`` non-silent users."""
    p = {k: p_top, k - 1: p_next, k - 2: 1.0 - p_top - p_next}
    return ceiling(p, lb)


def bound_ceiling(p_ki: dict, sigma_delta: float, sigma_alpha: float, n_bs: int, n_ue: int,
                  form: str = "simplified") -> float:
    """Ceiling using the closed-form interference for each ``K_I``."""
    return ceiling(p_ki, lambda k: expected_interference(sigma_delta, sigma_alpha, n_bs, n_ue, k, form))


def estimate_pKI(n_bs: int, n_users: int, draws: int, rng: np.random.Generator,
                 rule: str = "greedy") -> dict[int, float]:
    """Empirical distribution of the scheduled-user count.

    Spatial metrics are drawn i.i.d. uniform on the circle and scheduled
    with the ``2*pi/N_BS`` separation rule.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    counts: dict[int, int] = {}
    thr = TWO_PI / n_bs
    for _ in range(draws):
        k_i = len(schedule_users(rng.uniform(0.0, TWO_PI, n_users), thr, rule))
        counts[k_i] = counts.get(k_i, 0) + 1
    return {k: counts[k] / draws for k in sorted(counts)}


def mean_ci(samples) -> tuple[float, float]:
    """Mean and normal-approximation 95% half width (order independent)."""
    a = np.asarray(samples, dtype=float).ravel()
    n = a.size
    if n == 0:
        raise ValueError("no samples")
    mean = math.fsum(a) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((a - mean) ** 2) / (n - 1)
    return mean, 1.96 * math.sqrt(var / n)


@dataclass(frozen=True)
class RateResult:
    """Sum-rate statistics of one method at one SNR point."""

    method: str
    snr_db: float
    mean: float
    ci95: float
    trials: int
    k_i_hist: dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_samples(cls, method: str, snr_db: float, samples, k_i=None) -> "RateResult":
        mean, ci = mean_ci(samples)
        hist: dict[int, int] = {}
        for k in ([] if k_i is None else k_i):
            hist[int(k)] = hist.get(int(k), 0) + 1
        return cls(method, float(snr_db), mean, ci, int(np.size(samples)), dict(sorted(hist.items())))


def design_rate(H_actual: np.ndarray, H_design: np.ndarray, rho: float, noise_var=1.0,
                precoder: str = "zf") -> tuple[float, float]:
    """Precode for ``H_design`` and evaluate on ``H_actual``; returns ``(rate, eta)``."""
    F_BB = digital_precoder(H_design, precoder, rho, float(np.mean(noise_var)))
    eta = power_factor(F_BB)
    return sum_rate_mismatch(H_actual, H_design, F_BB, eta, rho, noise_var), eta
