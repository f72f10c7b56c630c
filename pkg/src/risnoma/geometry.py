"""Planar simulation geometry, steering vectors and Rician channel draws.

Angles are in degrees at every public interface and measured at the RIS from
its broadside (+y axis) towards +x, so a point at angle ``theta`` and radius
``r`` sits at ``(r sin theta, r cos theta)`` relative to the RIS.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _random
from .errors import InvalidArgument

ROLES = ("n", "f")


@dataclass(frozen=True)
class SystemGeometry:
    bs_position: tuple = (-40.0, 10.0)
    ris_position: tuple = (0.0, 0.0)
    # half-open intervals (lo, hi]
    cluster_angle_ranges: tuple = ((-30.0, -20.0), (20.0, 30.0), (60.0, 70.0))
    rnu_radius_range: tuple = (20.0, 25.0)
    rfu_radius_range: tuple = (80.0, 85.0)
    target_angles: tuple = (-45.0, 0.0, 45.0)
    target_radii: tuple = (90.0, 90.0, 80.0)

    def __post_init__(self):
        ranges = sorted(tuple(map(float, r)) for r in self.cluster_angle_ranges)
        for lo, hi in ranges:
            if lo > hi:
                raise InvalidArgument(f"empty cluster angle range ({lo}, {hi}]")
        for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
            if lo < hi:
                raise InvalidArgument("cluster angle ranges overlap")
        for name in ("rnu_radius_range", "rfu_radius_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidArgument(f"{name}: empty interval [{lo}, {hi}]")
            if lo <= 0:
                raise InvalidArgument(f"{name}: radii must be positive")
        if len(self.target_angles) != len(self.target_radii):
            raise InvalidArgument("target_angles and target_radii differ in length")
        if any(r <= 0 for r in self.target_radii):
            raise InvalidArgument("target radii must be positive")

    def bs_angle_and_distance(self):
        """Angle (deg) and distance (m) of the BS as seen from the RIS."""
        dx = self.bs_position[0] - self.ris_position[0]
        dy = self.bs_position[1] - self.ris_position[1]
        return math.degrees(math.atan2(dx, dy)), math.hypot(dx, dy)

    def bs_departure_angle(self):
        """Angle of the RIS as seen from the BS, same axis convention."""
        dx = self.ris_position[0] - self.bs_position[0]
        dy = self.ris_position[1] - self.bs_position[1]
        return math.degrees(math.atan2(dx, dy))


@dataclass(frozen=True)
class ChannelParams:
    pathloss_ref: float = 1e-3
    pathloss_exponent_br: float = 2.2
    pathloss_exponent_ru: float = 2.2
    rician_br: float = 3.0
    rician_ru: float = 3.0
    element_spacing_ratio: float = 0.5

    def __post_init__(self):
        if not self.pathloss_ref > 0:
            raise InvalidArgument("pathloss_ref must be positive")
        if not (self.pathloss_exponent_br > 0 and self.pathloss_exponent_ru > 0):
            raise InvalidArgument("path loss exponents must be positive")
        if self.rician_br < 0 or self.rician_ru < 0:
            raise InvalidArgument("Rician factors must be non-negative")
        if not self.element_spacing_ratio > 0:
            raise InvalidArgument("element_spacing_ratio must be positive")


@dataclass
class ChannelSet:
    """BS->RIS matrix ``G`` (M x N) and RIS->user vectors keyed by ``(k, role)``."""

    g_bs_ris: np.ndarray
    g_ris_user: dict
    spacing_ratio: float = 0.5
    positions: dict = field(default_factory=dict)

    @property
    def n_antennas(self):
        return self.g_bs_ris.shape[1]

    @property
    def m_elements(self):
        return self.g_bs_ris.shape[0]

    @property
    def k_clusters(self):
        return len({k for k, _ in self.g_ris_user})

    def user(self, k, role):
        return self.g_ris_user[(k, role)]

    def users(self):
        """User keys in cluster order, RNU before RFU."""
        return [(k, r) for k in range(self.k_clusters) for r in ROLES]


def steering_vector(theta, m, spacing_ratio=0.5):
    """ULA response ``exp(j 2 pi d/lambda p sin theta)``, p = 0..m-1."""
    if not np.isfinite(theta):
        raise InvalidArgument(f"non-finite angle {theta!r}")
    if m < 1:
        raise InvalidArgument("element count must be >= 1")
    phase = 2.0 * np.pi * spacing_ratio * math.sin(math.radians(theta))
    return np.exp(1j * phase * np.arange(m))


def pathloss(distance, exponent, ref_gain):
    if not distance > 0:
        raise InvalidArgument(f"distance must be positive, got {distance}")
    return ref_gain * distance ** (-exponent)


def sample_user_positions(geometry, seed, k_clusters=None):
    """Random ``(angle_deg, radius_m)`` for every user, keyed by ``(k, role)``.

    Both users of a cluster share one angle drawn from the cluster's interval.
    """
    ranges = geometry.cluster_angle_ranges
    k_clusters = len(ranges) if k_clusters is None else k_clusters
    if k_clusters > len(ranges):
        raise InvalidArgument(
            f"{k_clusters} clusters requested but geometry defines {len(ranges)} angle ranges")
    rng = _random.stream(seed, _random.POSITIONS)
    out = {}
    for k in range(k_clusters):
        lo, hi = ranges[k]
        # 1 - U[0,1) lies in (0, 1], giving the half-open (lo, hi]
        angle = lo + (hi - lo) * (1.0 - rng.random())
        for role, (rlo, rhi) in zip(ROLES, (geometry.rnu_radius_range, geometry.rfu_radius_range)):
            out[(k, role)] = (float(angle), float(rlo + (rhi - rlo) * rng.random()))
    return out


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _rician(los, kappa, gain, rng):
    if np.isinf(kappa):
        return math.sqrt(gain) * los
    nlos = _cn(rng, los.shape)
    return math.sqrt(gain) * (math.sqrt(kappa / (1 + kappa)) * los + math.sqrt(1 / (1 + kappa)) * nlos)


def bs_ris_channel(geometry, params, n, m, rng):
    angle_ris, dist = geometry.bs_angle_and_distance()
    a_ris = steering_vector(angle_ris, m, params.element_spacing_ratio)
    a_bs = steering_vector(geometry.bs_departure_angle(), n, params.element_spacing_ratio)
    los = np.outer(a_ris, a_bs.conj())
    gain = pathloss(dist, params.pathloss_exponent_br, params.pathloss_ref)
    return _rician(los, params.rician_br, gain, rng)


def ris_user_channel(angle, radius, params, m, rng):
    los = steering_vector(angle, m, params.element_spacing_ratio)
    gain = pathloss(radius, params.pathloss_exponent_ru, params.pathloss_ref)
    return _rician(los, params.rician_ru, gain, rng)


def los_probe_channel(angle, radius, params, m):
    """Pure LoS RIS->location channel used for illumination maps."""
    gain = pathloss(radius, params.pathloss_exponent_ru, params.pathloss_ref)
    return math.sqrt(gain) * steering_vector(angle, m, params.element_spacing_ratio)


def generate_channels(config, positions, seed):
    """Draw ``G`` and every ``g_{k,i}`` for ``positions`` from independent streams."""
    n, m = config.n_antennas, config.m_elements
    params, geometry = config.channel, config.geometry
    g = bs_ris_channel(geometry, params, n, m, _random.stream(seed, _random.CHANNELS, 0))
    users = {}
    for idx, (key, (angle, radius)) in enumerate(sorted(positions.items())):
        rng = _random.stream(seed, _random.CHANNELS, 1 + idx)
        users[key] = ris_user_channel(angle, radius, params, m, rng)
    return ChannelSet(g, users, params.element_spacing_ratio, dict(positions))
