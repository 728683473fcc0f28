"""SVD analog beamforming, user scheduling, equivalent channel and ZF/RZF.

The BS drives ``K`` RF chains; RF chain ``k`` (and therefore column ``k`` of
the error profile) always serves user ``k``. Users that the scheduler
silences keep their chain idle, so their analog column is masked to zero and
they drop out of the ``K_I x K_I`` equivalent channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, SingularMatrixError
from .hardware import AnalogMatrix, PhaseErrorProfile, quantize_phase

TWO_PI = 2.0 * np.pi

SCHEDULE_RULES = ("greedy", "cluster")
TIE_BREAKS = ("lowest", "strongest")
PRECODERS = ("zf", "rzf")

# condition number above which a ZF inverse is refused
ZF_COND_LIMIT = 1e12


def circular_distance(a, b):
    """Distance between angles on the circle, in ``[0, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def _top_singular_phases(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    U, _, Vh = np.linalg.svd(H)
    u = U[:, 0]
    v = Vh[0].conj()
    # fix the free global phase so the first entry is real positive
    return np.angle(v) - np.angle(v[0]), np.angle(u) - np.angle(u[0])


def design_svd_abf(H: np.ndarray, bits_bs: int | None = None,
                   bits_ue: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Phases of the dominant singular vectors of one user channel.

    Parameters
    ----------
    H : ndarray, shape (N_UE, N_BS)
        User channel.
    bits_bs, bits_ue : int or None
        Phase-shifter resolution at either end; ``None`` is continuous.

    Returns
    -------
    bs_phases : ndarray, shape (N_BS,)
        Quantised phases of the top right singular vector.
    ue_phases : ndarray, shape (N_UE,)
        Quantised phases of the top left singular vector.
    """
    H = np.asarray(H)
    if H.ndim != 2:
        raise ValueError(f"expected a 2-D channel matrix, got shape {H.shape}")
    if not np.any(H):
        raise DegenerateInputError("cannot beamform toward an all-zero channel")
    bs, ue = _top_singular_phases(H)
    return quantize_phase(bs, bits_bs), quantize_phase(ue, bits_ue)


def schedule_users(metrics, threshold: float, rule: str = "greedy",
                   tie: str = "lowest", strength=None) -> list[int]:
    """Pick users whose spatial metrics are mutually at least ``threshold`` apart.

    Parameters
    ----------
    metrics : array_like, shape (K,)
        Per-user angle (radians); distances are circular.
    threshold : float
        Minimum separation, normally ``2*pi/N_BS`` on spatial frequencies.
    rule : {"greedy", "cluster"}
        ``"greedy"`` scans users in priority order and keeps a user iff it is
        at least ``threshold`` from every user kept so far, so in a chain
        ``u1 ~ u2 ~ u3`` with ``u1`` far from ``u3`` both ends survive.
        ``"cluster"`` links users closer than ``threshold`` into chains and
        keeps exactly one user per chain.
    tie : {"lowest", "strongest"}
        Priority order: user index, or descending ``strength``.
    strength : array_like, optional
        Per-user LOS strength, required for ``tie="strongest"``.

    Returns
    -------
    list of int
        Kept user indices in ascending order.
    """
    metrics = np.asarray(metrics, dtype=float).ravel()
    n = metrics.size
    if rule not in SCHEDULE_RULES:
        raise ValueError(f"unknown scheduling rule {rule!r}; expected one of {SCHEDULE_RULES}")
    if tie not in TIE_BREAKS:
        raise ValueError(f"unknown tie break {tie!r}; expected one of {TIE_BREAKS}")
    if n == 0:
        return []
    if tie == "strongest":
        if strength is None:
            raise ValueError("tie='strongest' needs per-user strengths")
        # stable sort keeps the lower index first among equal strengths
        order = list(np.argsort(-np.asarray(strength, dtype=float), kind="stable"))
    else:
        order = list(range(n))

    if rule == "greedy":
        kept: list[int] = []
        for k in order:
            if all(circular_distance(metrics[k], metrics[j]) >= threshold for j in kept):
                kept.append(k)
        return sorted(int(k) for k in kept)

    rank = np.empty(n, dtype=int)
    rank[np.asarray(order)] = np.arange(n)
    pos = np.mod(metrics, TWO_PI)
    by_angle = np.argsort(pos, kind="stable")
    gaps = np.diff(np.append(pos[by_angle], pos[by_angle[0]] + TWO_PI))
    breaks = np.flatnonzero(gaps >= threshold)
    if breaks.size == 0:
        clusters = [by_angle]
    else:
        # rotate so each cluster is contiguous, starting just after a break
        start = (breaks[-1] + 1) % n
        rolled = np.roll(by_angle, -start)
        rolled_gaps = np.roll(gaps, -start)
        cut = np.flatnonzero(rolled_gaps[:-1] >= threshold) + 1
        clusters = np.split(rolled, cut)
    return sorted(int(c[np.argmin(rank[c])]) for c in clusters)


@dataclass(frozen=True)
class EquivalentChannel:
    """Ideal and impaired ``K_I x K_I`` equivalent channels.

    Row ``i`` is ``w_i^H H_i F_RF`` for the ``i``-th non-silent user.
    """

    ideal: np.ndarray
    impaired: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.impaired - self.ideal


def _equivalent(W: np.ndarray, H: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.einsum("ni,inm,mj->ij", W.conj(), H, F)


def equivalent_channel(W: AnalogMatrix, H: np.ndarray, F_RF: AnalogMatrix) -> EquivalentChannel:
    """Equivalent channel of the non-silent users.

    Parameters
    ----------
    W : AnalogMatrix, shape (N_UE, K_I)
        Column ``i`` is the combiner of the ``i``-th non-silent user.
    H : ndarray, shape (K_I, N_UE, N_BS)
        Channels of the same users, in the same order.
    F_RF : AnalogMatrix, shape (N_BS, K_I)
        Analog precoder restricted to the non-silent columns.

    The impaired version uses the matrices' error factors when present.
    """
    H = np.asarray(H)
    if H.ndim != 3:
        raise ValueError(f"expected stacked channels of shape (K_I, N_UE, N_BS), got {H.shape}")
    k_i, n_ue, n_bs = H.shape
    if W.shape != (n_ue, k_i) or F_RF.shape != (n_bs, k_i):
        raise ValueError(
            f"shape mismatch: W {W.shape}, F_RF {F_RF.shape}, channels {H.shape}"
        )
    ideal = _equivalent(W.ideal_values, H, F_RF.ideal_values)
    if not W.impaired and not F_RF.impaired:
        return EquivalentChannel(ideal, ideal.copy())
    return EquivalentChannel(ideal, _equivalent(W.values, H, F_RF.values))


def zf_precoder(H_eq: np.ndarray) -> np.ndarray:
    """Zero-forcing baseband precoder ``H^H (H H^H)^-1``."""
    H_eq = np.atleast_2d(np.asarray(H_eq, dtype=complex))
    if H_eq.shape[0] != H_eq.shape[1]:
        raise ValueError(f"equivalent channel must be square, got {H_eq.shape}")
    cond = np.linalg.cond(H_eq)
    if not np.isfinite(cond) or cond > ZF_COND_LIMIT:
        raise SingularMatrixError(f"equivalent channel is rank deficient (cond={cond:.3g})")
    gram = H_eq @ H_eq.conj().T
    return H_eq.conj().T @ np.linalg.inv(gram)


def rzf_precoder(H_eq: np.ndarray, rho: float, noise_var: float = 1.0,
                 k_i: int | None = None) -> np.ndarray:
    """Regularised ZF precoder ``H^H (H H^H + K_I sigma^2/rho I)^-1``."""
    if rho <= 0:
        raise ValueError(f"transmit power must be positive, got {rho}")
    H_eq = np.atleast_2d(np.asarray(H_eq, dtype=complex))
    k_i = H_eq.shape[0] if k_i is None else int(k_i)
    reg = k_i * noise_var / rho
    gram = H_eq @ H_eq.conj().T + reg * np.eye(H_eq.shape[0])
    return H_eq.conj().T @ np.linalg.inv(gram)


def power_factor(F_BB: np.ndarray) -> float:
    """``eta = 1/sqrt(tr(F F^H))`` so the transmitted power equals ``rho``."""
    F_BB = np.asarray(F_BB)
    energy = float(np.real(np.vdot(F_BB, F_BB)))
    if energy <= 0.0:
        raise ValueError("power normalisation of an all-zero precoder is undefined")
    return 1.0 / np.sqrt(energy)


def digital_precoder(H_eq: np.ndarray, kind: str = "zf", rho: float | None = None,
                     noise_var: float = 1.0) -> np.ndarray:
    """Dispatch to ZF or RZF."""
    if kind == "zf":
        return zf_precoder(H_eq)
    if kind == "rzf":
        if rho is None:
            raise ValueError("RZF needs the transmit power rho")
        return rzf_precoder(H_eq, rho, noise_var)
    raise ValueError(f"unknown precoder {kind!r}; expected one of {PRECODERS}")


@dataclass(frozen=True)
class HybridBeamformer:
    """Analog and digital beamforming state of one coherence block.

    Attributes
    ----------
    F_RF : AnalogMatrix, shape (N_BS, K)
        Column ``k`` is RF chain ``k``; silent users are masked.
    W : AnalogMatrix, shape (N_UE, K)
        Column ``k`` is user ``k``'s combiner; silent users are masked.
    active : tuple of int
        Non-silent users in ascending order (``K_I = len(active)``).
    F_BB : ndarray, shape (K_I, K_I) or None
        Baseband precoder, once designed.
    eta : float or None
        Power normalisation of ``F_BB``.
    """

    F_RF: AnalogMatrix
    W: AnalogMatrix
    active: tuple[int, ...]
    F_BB: np.ndarray | None = None
    eta: float | None = None

    @property
    def n_active(self) -> int:
        return len(self.active)

    def restricted(self) -> tuple[AnalogMatrix, AnalogMatrix]:
        """``(W, F_RF)`` limited to the non-silent columns."""
        idx = np.asarray(self.active, dtype=int)
        return _columns(self.W, idx), _columns(self.F_RF, idx)

    def equivalent(self, H: np.ndarray) -> EquivalentChannel:
        """Equivalent channel given all ``K`` user channels ``H``."""
        W, F = self.restricted()
        return equivalent_channel(W, np.asarray(H)[list(self.active)], F)

    def with_digital(self, F_BB: np.ndarray) -> "HybridBeamformer":
        return HybridBeamformer(self.F_RF, self.W, self.active, F_BB, power_factor(F_BB))


def _columns(A: AnalogMatrix, idx: np.ndarray) -> AnalogMatrix:
    amp = A.amplitude if np.ndim(A.amplitude) == 0 else A.amplitude[:, idx]
    factors = None if A.factors is None else A.factors[:, idx]
    return AnalogMatrix(A.phases[:, idx], A.active[:, idx], amp, factors)


def assemble_beamformer(bs_phases: np.ndarray, ue_phases: np.ndarray, active,
                        profile: PhaseErrorProfile | None = None) -> HybridBeamformer:
    """Build masked analog matrices from per-user phase columns.

    ``bs_phases`` is ``(N_BS, K)`` and ``ue_phases`` is ``(N_UE, K)``; only
    the ``active`` columns are switched on. With a ``profile`` the shifters'
    frozen errors are attached (chain ``k`` and UE ``k`` for column ``k``).
    """
    k = bs_phases.shape[1]
    mask = np.zeros(k, dtype=bool)
    mask[list(active)] = True
    F = AnalogMatrix.from_phases(bs_phases, np.broadcast_to(mask, bs_phases.shape))
    W = AnalogMatrix.from_phases(ue_phases, np.broadcast_to(mask, ue_phases.shape))
    if profile is not None:
        F = F.with_factors(profile.bs.factor)
        W = W.with_factors(profile.ue.factor.T)
    return HybridBeamformer(F, W, tuple(int(a) for a in active))


def svd_beamformer(channel, bits_bs: int | None, bits_ue: int | None,
                   profile: PhaseErrorProfile | None = None, rule: str = "greedy",
                   tie: str = "lowest") -> HybridBeamformer:
    """Scheduling plus per-user SVD analog design with full channel knowledge.

    Users are separated on the spatial frequency of their LOS departure
    direction with threshold ``2*pi/N_BS``; the digital precoder is left
    unset (see :func:`digital_precoder`).
    """
    H = channel.H
    n_users, n_ue, n_bs = H.shape
    strength = None
    if tie == "strongest":
        strength = np.linalg.norm(channel.H_los, axis=(1, 2))
    active = schedule_users(channel.paths.los_psi, TWO_PI / n_bs, rule, tie, strength)
    bs = np.zeros((n_bs, n_users))
    ue = np.zeros((n_ue, n_users))
    for k in active:
        bs[:, k], ue[:, k] = design_svd_abf(H[k], bits_bs, bits_ue)
    return assemble_beamformer(bs, ue, active, profile)
