"""Downlink training: AOD estimation, analog design, equivalent-channel estimation.

The training procedure for one coherence block runs in four stages:

1. the BS sends ``P`` cycles of DFT pilots through its ``K`` RF chains and
   every user, listening on a single antenna, refines the strongest DFT bin
   into a spatial-frequency estimate with a three-bin Jacobsen interpolator;
2. users are scheduled on the estimates, each active RF chain steers toward
   its user's estimate and each user searches a small beamsteering codebook
   for its combiner;
3. orthogonal pilots through the finished analog network give a noisy
   estimate of the *impaired* equivalent channel;
4. the BS zero-forces that estimate.

The phase-shifter errors in every stage come from the same frozen
:class:`~hbfsim.hardware.PhaseErrorProfile`, so stage 3 measures exactly the
distortion that data transmission will suffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import sum_rate_mismatch
from .beamforming import (TWO_PI, HybridBeamformer, assemble_beamformer, digital_precoder,
                          power_factor, schedule_users)
from .geometry import ChannelRealization
from .hardware import (AnalogMatrix, PhaseErrorProfile, pilot_chains, pilot_matrix, quantize_phase,
                       wrap_phase)

NOISE_CONVENTIONS = ("nominal", "realized")


def complex_noise(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    """Circular complex Gaussian samples of variance ``noise_var``."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.sqrt(noise_var / 2.0) * z


@dataclass(frozen=True)
class Stage1Observation:
    """Received pilot symbols; row ``k`` holds user ``k``'s ``P*K`` samples."""

    y: np.ndarray
    variant: str
    noise_var: float

    @property
    def length(self) -> int:
        return self.y.shape[-1]


@dataclass(frozen=True)
class AodEstimate:
    """Spatial-frequency estimate from one observation.

    ``psi = 2*pi*(k_max + correction)/len(y)`` reduced to ``[0, 2*pi)``.
    """

    psi: float
    k_max: int
    correction: float


def single_antenna_combiner(n_ue: int) -> np.ndarray:
    """``[1, 0, ..., 0]/sqrt(N_UE)``: only the first element listens."""
    w = np.zeros(n_ue, dtype=complex)
    w[0] = 1.0 / np.sqrt(n_ue)
    return w


def simulate_stage1(channel: ChannelRealization, pilot: AnalogMatrix, profile: PhaseErrorProfile,
                    rho: float, noise_var: float, rng: np.random.Generator,
                    variant: str = "ones-padded") -> Stage1Observation:
    """Pilot reception ``y_k = sqrt(rho) w_E^H H_k F_E + w_E^H Z_k``.

    Pilot column ``m`` is formed by RF chain ``m mod K``, so it inherits
    that chain's shifter errors; ``w_E`` is the single-antenna combiner
    distorted by user ``k``'s own errors. Scattered paths and padding
    rows reach the user unmodified and act as extra disturbance.
    ``variant`` only labels the observation.
    """
    n_users, n_ue, n_bs = channel.H.shape
    size = pilot.shape[1]
    cycles, rem = divmod(size, n_users)
    if rem or pilot.shape[0] != n_bs:
        raise ValueError(f"pilot of shape {pilot.shape} does not fit N_BS={n_bs}, K={n_users}")
    F_E = pilot.with_factors(profile.bs_factor(pilot_chains(n_users, cycles))).values
    w = single_antenna_combiner(n_ue)
    W_E = w[None, :] * profile.ue.factor                        # (K, N_UE)
    Z = complex_noise(rng, (n_users, n_ue, size), noise_var)
    y = np.sqrt(rho) * np.einsum("kn,knm,mp->kp", W_E.conj(), channel.H, F_E)
    y = y + np.einsum("kn,knp->kp", W_E.conj(), Z)
    return Stage1Observation(y, variant, float(noise_var))


def jacobsen_estimate(y, remove_mean: bool = False) -> AodEstimate:
    """Three-bin interpolation around the largest-magnitude sample.

    Parameters
    ----------
    y : array_like, length >= 3
        Observation, indexed circularly so the first and last bins are
        neighbours.
    remove_mean : bool
        Subtract the sample mean first, cancelling a bin-constant offset
        such as the one injected by ones-padded pilots.

    Notes
    -----
    With a flat neighbourhood (denominator below ``1e-15``) the bin centre
    is returned with zero correction.
    """
    y = np.asarray(y, dtype=complex).ravel()
    n = y.size
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    if remove_mean:
        y = y - y.mean()
    k = int(np.argmax(np.abs(y)))
    ym, y0, yp = y[(k - 1) % n], y[k], y[(k + 1) % n]
    den = 2.0 * y0 - ym - yp
    corr = 0.0 if abs(den) < 1e-15 else float(np.real((ym - yp) / den))
    psi = float(wrap_phase(TWO_PI * (k + corr) / n))
    return AodEstimate(psi, k, corr)


def design_abf_from_aod(psi_hat, n_bs: int, bits: int | None = None) -> np.ndarray:
    """Quantised steering phases ``Q(n * psi_hat)``, ``n = 0..N_BS-1``.

    A scalar estimate gives shape ``(N_BS,)``, an array ``(N_BS, K)``.
    """
    psi_hat = np.asarray(psi_hat, dtype=float)
    n = np.arange(n_bs)
    return quantize_phase(n * psi_hat if psi_hat.ndim == 0 else np.outer(n, psi_hat), bits)


def ue_codebook(n_ue: int, bits: int | None = None) -> np.ndarray:
    """Phases of the beamsteering codebook at ``2*pi*i/N_UE``, one per column."""
    n = np.arange(n_ue)
    return quantize_phase(np.outer(n, TWO_PI * np.arange(n_ue) / n_ue), bits)


def ue_combiner_search(H: np.ndarray, f: np.ndarray, ue_factor: np.ndarray | None = None,
                       bits: int | None = None) -> tuple[int, np.ndarray]:
    """Exhaustive codebook search maximising ``|w_E^H H f|``.

    ``f`` is the (already impaired) analog column serving this user and
    ``ue_factor`` the user's combiner errors. Returns the winning index and
    its ideal phases.
    """
    n_ue = H.shape[0]
    phases = ue_codebook(n_ue, bits)
    cands = np.exp(1j * phases) / np.sqrt(n_ue)
    if ue_factor is not None:
        cands = cands * ue_factor[:, None]
    gains = np.abs(cands.conj().T @ (H @ f))
    best = int(np.argmax(gains))
    return best, phases[:, best]


def estimate_heq(H: np.ndarray, W: AnalogMatrix, F: AnalogMatrix, rho: float, noise_var: float,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares estimate of the impaired equivalent channel.

    With pilots ``sqrt(rho) I`` each user observes its impaired row plus
    ``w_E^H Z``; dividing by ``sqrt(rho)`` leaves per-entry noise variance
    ``noise_var * ||w_E||^2 / rho``.

    Parameters
    ----------
    H : ndarray, shape (K_I, N_UE, N_BS)
        Channels of the active users.
    W, F : AnalogMatrix
        Active combiners ``(N_UE, K_I)`` and precoder columns ``(N_BS, K_I)``.

    Returns
    -------
    (estimate, truth) : tuple of ndarray
        The estimate and the impaired equivalent channel it targets.
    """
    W_E, F_E = W.values, F.values
    truth = np.einsum("ni,inm,mj->ij", W_E.conj(), H, F_E)
    k_i, n_ue = H.shape[0], H.shape[1]
    Z = complex_noise(rng, (k_i, n_ue, k_i), noise_var)
    noise = np.einsum("ni,inj->ij", W_E.conj(), Z)
    return truth + noise / np.sqrt(rho), truth


def noise_variances(W: AnalogMatrix, noise_var: float, convention: str) -> np.ndarray | float:
    """Post-combiner noise variance per active user."""
    if convention == "nominal":
        return noise_var
    if convention == "realized":
        return noise_var * np.sum(np.abs(W.values) ** 2, axis=0)
    raise ValueError(f"unknown noise convention {convention!r}; expected one of {NOISE_CONVENTIONS}")


@dataclass(frozen=True)
class TrainingResult:
    """Outcome of one training run at one SNR.

    ``psi_hat`` is empty for the codebook baseline; ``training_slots``
    counts pilot symbols spent.
    """

    beamformer: HybridBeamformer
    sum_rate: float
    h_true: np.ndarray
    h_est: np.ndarray
    psi_hat: np.ndarray
    training_slots: int


def _finish(channel, bf: HybridBeamformer, rho, noise_var, rng, precoder, noise_convention,
            psi_hat, slots) -> TrainingResult:
    W, F = bf.restricted()
    H_act = channel.H[list(bf.active)]
    h_est, h_true = estimate_heq(H_act, W, F, rho, noise_var, rng)
    F_BB = digital_precoder(h_est, precoder, rho, noise_var)
    eta = power_factor(F_BB)
    nv = noise_variances(W, noise_var, noise_convention)
    rate = sum_rate_mismatch(h_true, h_est, F_BB, eta, rho, nv)
    return TrainingResult(bf.with_digital(F_BB), rate, h_true, h_est, psi_hat, slots)


def _search_combiners(channel, bs_phases, active, profile, bits_ue) -> np.ndarray:
    n_users, n_ue, n_bs = channel.H.shape
    ue = np.zeros((n_ue, n_users))
    for k in active:
        f_E = np.exp(1j * bs_phases[:, k]) / np.sqrt(n_bs) * profile.bs.factor[:, k]
        _, ue[:, k] = ue_combiner_search(channel.H[k], f_E, profile.ue.factor[k], bits_ue)
    return ue


def run_algorithm1(channel: ChannelRealization, profile: PhaseErrorProfile, rho: float,
                   rng: np.random.Generator, noise_var: float = 1.0, cycles: int = 1,
                   variant: str = "ones-padded", bits_bs: int | None = None,
                   bits_ue: int | None = None, remove_mean: bool = False,
                   rule: str = "greedy", tie: str = "lowest", precoder: str = "zf",
                   noise_convention: str = "nominal") -> TrainingResult:
    """Run all four training stages and evaluate the resulting sum rate.

    ``rng`` supplies the receiver noise of stages 1 and 3; channel and
    errors are fixed inputs. Uses ``P*K + N_UE + K_I`` training slots.
    """
    n_users, n_ue, n_bs = channel.H.shape
    pilot = pilot_matrix(n_bs, n_users, cycles, variant)
    obs = simulate_stage1(channel, pilot, profile, rho, noise_var, rng, variant)
    est = [jacobsen_estimate(obs.y[k], remove_mean) for k in range(n_users)]
    psi_hat = np.array([e.psi for e in est])

    strength = np.abs(obs.y).max(axis=1) if tie == "strongest" else None
    active = schedule_users(psi_hat, TWO_PI / n_bs, rule, tie, strength)
    bs = design_abf_from_aod(psi_hat, n_bs, bits_bs)
    ue = _search_combiners(channel, bs, active, profile, bits_ue)
    bf = assemble_beamformer(bs, ue, active, profile)
    slots = cycles * n_users + n_ue + len(active)
    return _finish(channel, bf, rho, noise_var, rng, precoder, noise_convention, psi_hat, slots)


def run_codebook_baseline(channel: ChannelRealization, profile: PhaseErrorProfile, rho: float,
                          rng: np.random.Generator, noise_var: float = 1.0,
                          bits_bs: int | None = None, bits_ue: int | None = None,
                          precoder: str = "zf",
                          noise_convention: str = "nominal") -> TrainingResult:
    """Exhaustive BS beam sweep followed by equivalent-channel estimation.

    The BS sweeps all ``N_BS`` codebook beams ``2*pi*i/N_BS`` through RF
    chain 0 while each user listens on one antenna and picks the strongest
    beam. Users that pick the same beam collide and only the lowest index
    stays. Combiner search, equivalent-channel estimation and ZF then
    proceed as in :func:`run_algorithm1`. The sweep and the combiner search
    cost ``N_BS + N_UE`` slots.
    """
    n_users, n_ue, n_bs = channel.H.shape
    grid = TWO_PI * np.arange(n_bs) / n_bs
    book = design_abf_from_aod(grid, n_bs, bits_bs)                 # (N_BS, N_BS)
    F_E = np.exp(1j * book) / np.sqrt(n_bs) * profile.bs.factor[:, :1]
    W_E = single_antenna_combiner(n_ue)[None, :] * profile.ue.factor
    Z = complex_noise(rng, (n_users, n_ue, n_bs), noise_var)
    y = np.sqrt(rho) * np.einsum("kn,knm,mp->kp", W_E.conj(), channel.H, F_E)
    y = y + np.einsum("kn,knp->kp", W_E.conj(), Z)
    choice = np.argmax(np.abs(y), axis=1)

    active, taken = [], set()
    for k in range(n_users):
        if int(choice[k]) not in taken:
            taken.add(int(choice[k]))
            active.append(k)
    bs = book[:, choice]
    ue = _search_combiners(channel, bs, active, profile, bits_ue)
    bf = assemble_beamformer(bs, ue, active, profile)
    return _finish(channel, bf, rho, noise_var, rng, precoder, noise_convention,
                   np.array([]), n_bs + n_ue)
