"""Phase-shifter network: quantisation, Gaussian gain/phase errors, pilots.

A phase shifter set to phase ``theta`` with nominal amplitude ``1/sqrt(N)``
actually produces ``alpha * exp(j*(theta + delta)) / sqrt(N)`` with
``alpha ~ N(1, sigma_alpha^2)`` and ``delta ~ N(0, sigma_delta^2)``. The
errors belong to the physical shifter (antenna, RF chain), not to the phase
it is set to, so one draw is reused for every beam an RF chain forms during
a coherence block.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * np.pi

PILOT_VARIANTS = ("ones-padded", "zero-padded", "literal-ones")


def wrap_phase(theta):
    """Reduce to ``[0, 2*pi)``; tiny negatives that round up to ``2*pi`` map to 0."""
    w = np.mod(theta, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w)


def quantize_phase(theta, bits: int | None = None):
    """Round phases to the nearest point of the ``bits``-bit grid.

    The grid is ``{0, 2*pi/2**bits, ..., (2**bits - 1)*2*pi/2**bits}`` and
    distance is measured around the circle; an exact tie goes to the lower
    neighbour. ``bits=None`` means a continuous shifter and only reduces
    ``theta`` modulo ``2*pi``.
    """
    wrapped = wrap_phase(theta)
    if bits is None:
        return wrapped
    if int(bits) != bits or bits < 1:
        raise ValueError(f"phase resolution must be a positive integer or None, got {bits!r}")
    levels = 2 ** int(bits)
    step = TWO_PI / levels
    q = wrapped / step
    lower = np.floor(q)
    idx = np.where(q - lower > 0.5, lower + 1.0, lower)
    return np.mod(idx, levels) * step


@dataclass(frozen=True)
class ElementErrors:
    """Per-element gain and phase errors for one block of shifters."""

    gain: np.ndarray
    phase: np.ndarray

    @property
    def factor(self) -> np.ndarray:
        """Complex multiplicative distortion ``alpha * exp(j*delta)``."""
        return self.gain * np.exp(1j * self.phase)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.gain.shape


def draw_element_errors(
    shape, sigma_delta: float, sigma_alpha: float, rng: np.random.Generator
) -> ElementErrors:
    """Draw independent ``alpha ~ N(1, sa^2)`` and ``delta ~ N(0, sd^2)``.

    Gains are left untruncated: the moment formulas assume a plain Gaussian.
    """
    if sigma_delta < 0 or sigma_alpha < 0:
        raise ValueError("error standard deviations must be >= 0")
    # unit normals are scaled afterwards so different sigmas reuse the same stream
    gain = 1.0 + sigma_alpha * rng.standard_normal(shape)
    phase = sigma_delta * rng.standard_normal(shape)
    return ElementErrors(gain, phase)


@dataclass(frozen=True)
class PhaseErrorProfile:
    """Frozen errors of every shifter in the system for one trial.

    ``bs`` has shape ``(N_BS, K)``: column ``c`` belongs to RF chain ``c``.
    ``ue`` has shape ``(K, N_UE)``: row ``k`` is user ``k``'s combiner.
    """

    bs: ElementErrors
    ue: ElementErrors
    sigma_delta: float
    sigma_alpha: float

    def bs_factor(self, chains) -> np.ndarray:
        """Distortion of the ``N_BS x len(chains)`` shifters of the given RF chains."""
        return self.bs.factor[:, np.asarray(chains, dtype=int)]

    def ue_factor(self, user: int) -> np.ndarray:
        return self.ue.factor[user]

    @classmethod
    def ideal(cls, n_bs: int, n_ue: int, n_users: int) -> "PhaseErrorProfile":
        ones = ElementErrors(np.ones((n_bs, n_users)), np.zeros((n_bs, n_users)))
        ones_ue = ElementErrors(np.ones((n_users, n_ue)), np.zeros((n_users, n_ue)))
        return cls(ones, ones_ue, 0.0, 0.0)


def draw_profile(
    n_bs: int,
    n_ue: int,
    n_users: int,
    sigma_delta: float,
    sigma_alpha: float,
    bs_rng: np.random.Generator,
    ue_rng: np.random.Generator | None = None,
) -> PhaseErrorProfile:
    """Draw the trial's errors; BS and UE sides may use separate streams."""
    ue_rng = bs_rng if ue_rng is None else ue_rng
    bs = draw_element_errors((n_bs, n_users), sigma_delta, sigma_alpha, bs_rng)
    ue = draw_element_errors((n_users, n_ue), sigma_delta, sigma_alpha, ue_rng)
    return PhaseErrorProfile(bs, ue, float(sigma_delta), float(sigma_alpha))


@dataclass(frozen=True)
class AnalogMatrix:
    """Phase-shifter matrix with a switch-off mask and optional distortion.

    Attributes
    ----------
    phases : ndarray, shape (N, M)
        Ideal (commanded) phases in radians.
    active : ndarray of bool, shape (N, M)
        ``False`` where the element is switched off (silent user column or
        zero-padded pilot row); such entries are exactly zero.
    amplitude : float or ndarray
        Nominal entry magnitude, ``1/sqrt(N)`` for a constant-modulus network.
    factors : ndarray or None
        ``alpha * exp(j*delta)`` per entry when impaired.
    """

    phases: np.ndarray
    active: np.ndarray
    amplitude: float | np.ndarray
    factors: np.ndarray | None = None

    @classmethod
    def from_phases(cls, phases, active=None) -> "AnalogMatrix":
        phases = np.atleast_2d(np.asarray(phases, dtype=float))
        n = phases.shape[0]
        if active is None:
            active = np.ones(phases.shape, dtype=bool)
        return cls(phases, np.asarray(active, dtype=bool), 1.0 / np.sqrt(n))

    @property
    def shape(self) -> tuple[int, int]:
        return self.phases.shape

    @property
    def impaired(self) -> bool:
        return self.factors is not None

    @property
    def ideal_values(self) -> np.ndarray:
        return np.where(self.active, self.amplitude * np.exp(1j * self.phases), 0.0)

    @property
    def values(self) -> np.ndarray:
        if self.factors is None:
            return self.ideal_values
        return self.ideal_values * self.factors

    def with_factors(self, factors) -> "AnalogMatrix":
        factors = np.broadcast_to(np.asarray(factors), self.shape)
        return replace(self, factors=np.array(factors))

    def mask_columns(self, keep) -> "AnalogMatrix":
        """Switch off every column whose index is not in ``keep``."""
        cols = np.zeros(self.shape[1], dtype=bool)
        cols[np.asarray(list(keep), dtype=int)] = True
        return replace(self, active=self.active & cols[None, :])


def apply_impairments(
    ideal: AnalogMatrix,
    sigma_delta: float,
    sigma_alpha: float,
    rng: np.random.Generator | None = None,
    errors: ElementErrors | None = None,
) -> tuple[AnalogMatrix, ElementErrors]:
    """Distort every active entry by ``alpha * exp(j*delta)``.

    Pass ``errors`` to reuse a previous draw (the same shifters forming a
    new beam); otherwise fresh errors are drawn from ``rng``. Returns the
    impaired matrix together with the errors that were applied.
    """
    if errors is None:
        if rng is None:
            raise ValueError("either rng or errors must be given")
        errors = draw_element_errors(ideal.shape, sigma_delta, sigma_alpha, rng)
    elif errors.shape != ideal.shape:
        raise ValueError(f"error block {errors.shape} does not match matrix {ideal.shape}")
    return ideal.with_factors(errors.factor), errors


def pilot_chains(n_users: int, cycles: int) -> np.ndarray:
    """RF chain that carries each pilot column: column ``m`` uses chain ``m mod K``."""
    return np.arange(n_users * cycles) % n_users


def pilot_matrix(n_bs: int, n_users: int, cycles: int = 1,
                 variant: str = "ones-padded") -> AnalogMatrix:
    """Analog training matrix for downlink AOD estimation.

    The top ``P*K`` rows are ``sqrt(P*K/N_BS)`` times the unitary
    ``P*K``-point DFT matrix with ``U[n, m] = exp(j*2*pi*n*m/(P*K))/sqrt(P*K)``,
    so every entry there has magnitude ``1/sqrt(N_BS)``. The remaining rows
    are

    * ``"ones-padded"`` - phase 0, magnitude ``1/sqrt(N_BS)``;
    * ``"literal-ones"`` - phase 0, magnitude 1 (breaks constant modulus);
    * ``"zero-padded"`` - switched off.

    Columns ``(p-1)*K ... p*K - 1`` are transmitted in cycle ``p``.
    """
    if variant not in PILOT_VARIANTS:
        raise ValueError(f"unknown pilot variant {variant!r}; expected one of {PILOT_VARIANTS}")
    if n_users < 1 or cycles < 1:
        raise ValueError("n_users and cycles must be >= 1")
    size = n_users * cycles
    if size > n_bs:
        raise ValueError(f"P*K = {size} exceeds N_BS = {n_bs}")
    idx = np.arange(size)
    phases = np.zeros((n_bs, size))
    phases[:size] = wrap_phase(TWO_PI * np.outer(idx, idx) / size)
    active = np.ones((n_bs, size), dtype=bool)
    amplitude = np.full((n_bs, size), 1.0 / np.sqrt(n_bs))
    if variant == "zero-padded":
        active[size:] = False
    elif variant == "literal-ones":
        amplitude[size:] = 1.0
    return AnalogMatrix(phases, active, amplitude)
