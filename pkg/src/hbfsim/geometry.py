"""ULA array responses and the multiuser Rician channel.

All angles are physical angles in radians. The per-antenna phase increment
of a half-wavelength ULA, ``psi = pi * cos(angle)``, is called the spatial
frequency throughout the package and is always reduced to ``[0, 2*pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

ANGLE_MODELS = ("physical", "spatial")


def spatial_frequency(angle):
    """Per-antenna phase increment ``pi*cos(angle)`` reduced to ``[0, 2*pi)``."""
    w = np.mod(np.pi * np.cos(angle), TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w)


def steering_vector(psi, n: int) -> np.ndarray:
    """Unit-norm ULA response parameterised directly by spatial frequency.

    ``psi`` may be a scalar (returns shape ``(n,)``) or an array of shape
    ``(m,)`` (returns the ``(n, m)`` matrix whose columns are responses).
    """
    if n < 1:
        raise ValueError(f"array length must be >= 1, got {n}")
    psi = np.asarray(psi, dtype=float)
    idx = np.arange(n)
    if psi.ndim == 0:
        return np.exp(1j * psi * idx) / np.sqrt(n)
    return np.exp(1j * np.outer(idx, psi)) / np.sqrt(n)


def array_response(angle, n: int) -> np.ndarray:
    """Half-wavelength ULA response at physical angle ``angle``.

    Entry ``i`` is ``exp(j*pi*cos(angle)*i) / sqrt(n)``.

    Parameters
    ----------
    angle : float or array_like
        Angle(s) in radians. An array of shape ``(m,)`` yields an ``(n, m)``
        matrix with one response per column.
    n : int
        Number of antenna elements.

    Returns
    -------
    numpy.ndarray
        Complex response vector or matrix.
    """
    if n < 1:
        raise ValueError(f"array length must be >= 1, got {n}")
    angle = np.asarray(angle, dtype=float)
    # phase taken from cos() directly (not mod 2pi) so the map is smooth in angle
    return steering_vector(np.pi * np.cos(angle), n)


@dataclass(frozen=True)
class PathSet:
    """Angles and scattering gains behind one multiuser channel draw.

    Shapes: ``los_aod``/``los_aoa`` are ``(K,)``; ``nlos_aod``,
    ``nlos_aoa`` and ``gains`` are ``(K, L)``.
    """

    los_aod: np.ndarray
    los_aoa: np.ndarray
    nlos_aod: np.ndarray
    nlos_aoa: np.ndarray
    gains: np.ndarray

    @property
    def los_psi(self) -> np.ndarray:
        """Spatial frequency of every user's LOS departure direction."""
        return spatial_frequency(self.los_aod)


@dataclass(frozen=True)
class ChannelRealization:
    """All ``K`` user channels of one coherence block.

    ``H[k]`` is the ``N_UE x N_BS`` downlink matrix of user ``k``;
    ``H_los`` and ``H_nlos`` hold the unweighted components so that
    ``H = w_los * H_los + w_nlos * H_nlos``.
    """

    H: np.ndarray
    H_los: np.ndarray
    H_nlos: np.ndarray
    paths: PathSet
    rician_factor: float
    n_paths: int
    los_only: bool = False

    @property
    def n_users(self) -> int:
        return self.H.shape[0]

    @property
    def n_ue(self) -> int:
        return self.H.shape[1]

    @property
    def n_bs(self) -> int:
        return self.H.shape[2]


def rician_weights(rician_factor: float, los_only: bool = False) -> tuple[float, float]:
    """Amplitude weights ``(sqrt(v/(v+1)), sqrt(1/(v+1)))`` of the LOS/NLOS parts."""
    if los_only or np.isinf(rician_factor):
        return 1.0, 0.0
    if rician_factor < 0:
        raise ValueError(f"Rician factor must be >= 0, got {rician_factor}")
    v = float(rician_factor)
    return float(np.sqrt(v / (v + 1.0))), float(np.sqrt(1.0 / (v + 1.0)))


def _draw_angles(rng: np.random.Generator, size, angle_model: str) -> np.ndarray:
    if angle_model == "physical":
        return rng.uniform(0.0, TWO_PI, size)
    if angle_model == "spatial":
        # uniform spatial frequency; folded to (-pi, pi] then mapped back to an angle in [0, pi]
        psi = rng.uniform(0.0, TWO_PI, size)
        folded = np.where(psi > np.pi, psi - TWO_PI, psi)
        return np.arccos(np.clip(folded / np.pi, -1.0, 1.0))
    raise ValueError(f"unknown angle model {angle_model!r}; expected one of {ANGLE_MODELS}")


def draw_paths(
    rng: np.random.Generator, n_users: int, n_paths: int, angle_model: str = "physical"
) -> PathSet:
    """Draw LOS/NLOS angles and CN(0, 1) scattering gains.

    The draw order is fixed and independent of the array sizes, so two
    scenarios that differ only in ``N_BS``/``N_UE`` see the same geometry
    for the same stream.
    """
    los_aod = _draw_angles(rng, n_users, angle_model)
    los_aoa = _draw_angles(rng, n_users, angle_model)
    nlos_aod = _draw_angles(rng, (n_users, n_paths), angle_model)
    nlos_aoa = _draw_angles(rng, (n_users, n_paths), angle_model)
    gains = (rng.standard_normal((n_users, n_paths))
             + 1j * rng.standard_normal((n_users, n_paths))) / np.sqrt(2.0)
    return PathSet(los_aod, los_aoa, nlos_aod, nlos_aoa, gains)


def channel_from_paths(
    paths: PathSet, n_bs: int, n_ue: int, rician_factor: float, los_only: bool = False
) -> ChannelRealization:
    """Build the Rician channel matrices for an explicit path set."""
    n_users, n_paths = paths.gains.shape
    if not los_only and np.isfinite(rician_factor) and n_paths < 1:
        raise ValueError("at least one scattering path is required unless the channel is LOS-only")
    w_los, w_nlos = rician_weights(rician_factor, los_only)
    scale = np.sqrt(n_bs * n_ue)

    a_bs = array_response(paths.los_aod, n_bs)          # (N_BS, K)
    a_ue = array_response(paths.los_aoa, n_ue)          # (N_UE, K)
    H_los = scale * np.einsum("ik,jk->kij", a_ue, a_bs.conj())

    H_nlos = np.zeros_like(H_los)
    if n_paths:
        s_bs = array_response(paths.nlos_aod.ravel(), n_bs).reshape(n_bs, n_users, n_paths)
        s_ue = array_response(paths.nlos_aoa.ravel(), n_ue).reshape(n_ue, n_users, n_paths)
        H_nlos = (scale / np.sqrt(n_paths)) * np.einsum(
            "kl,ikl,jkl->kij", paths.gains, s_ue, s_bs.conj()
        )
    H = w_los * H_los + w_nlos * H_nlos
    return ChannelRealization(H, H_los, H_nlos, paths, float(rician_factor), n_paths, bool(los_only))


def draw_channel(config, rng: np.random.Generator) -> ChannelRealization:
    """Draw one multiuser Rician channel.

    ``config`` is any object exposing ``n_bs``, ``n_ue``, ``n_users``,
    ``n_paths``, ``rician_factor``, ``los_only`` and ``angle_model``
    (normally a :class:`hbfsim.config.ScenarioConfig`).
    """
    for name in ("n_bs", "n_ue", "n_users"):
        if getattr(config, name) < 1:
            raise ValueError(f"{name} must be >= 1")
    los_only = bool(getattr(config, "los_only", False))
    if not los_only and config.n_paths < 1:
        raise ValueError("n_paths must be >= 1 for a finite Rician factor")
    paths = draw_paths(rng, config.n_users, config.n_paths,
                       getattr(config, "angle_model", "physical"))
    return channel_from_paths(paths, config.n_bs, config.n_ue, config.rician_factor, los_only)
