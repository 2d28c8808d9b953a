"""Multi-timeslot frequency-scanning tracking: slot planning, pilot simulation, selection.

A searched interval of radius alpha is split into L contiguous fractions; each
timeslot scans one fraction with its own pairing, whose mode follows the sign
of the fraction center.  The strongest received cell over all (slot,
subcarrier) pairs yields the coarse angle estimate through the angle map.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import pairing as pairing_mod
from .beampattern import angle_map
from .codebook import JointCodebook, quantized_pairing
from .pairing import BACKWARD, FORWARD, PairingConfig, forward_bound, large_angle_bound
from .physmodel import (
    ChannelResponse,
    PrecoderConfig,
    SubcarrierGrid,
    SystemConfig,
    make_rng,
    precoder_matrix,
)

__all__ = [
    "TrackingPlan",
    "TrackingObservation",
    "TrackingEstimate",
    "plan_tracking",
    "run_tracking",
    "select_strongest",
    "estimate_angle",
    "coarse_estimate",
]


@dataclass(frozen=True)
class TrackingPlan:
    """Per-slot pairings covering [theta0 - alpha, theta0 + alpha] in L fractions."""

    theta0: float
    alpha: float
    slots: int
    slot_centers: np.ndarray
    slot_radius: float
    pairings: tuple[PairingConfig, ...]
    cfg: SystemConfig


@dataclass(frozen=True)
class TrackingObservation:
    """Received pilot matrix, shape (L, 2M+1), along with the plan that produced it."""

    y: np.ndarray
    plan: TrackingPlan


@dataclass(frozen=True)
class TrackingEstimate:
    """Strongest-cell indices and the coarse angle; refinement is filled in later."""

    l_hat: int
    m_hat: int
    theta_hat: float
    theta_refined: float | None = None


def _slot_pairing(center: float, radius: float, cfg: SystemConfig, mode: str) -> PairingConfig:
    if mode == "auto":
        return pairing_mod.make_pairing(center, radius, cfg)
    if mode in (FORWARD, BACKWARD):
        r = cfg.edge_ratio
        sign = 1.0 if mode == FORWARD else -1.0
        pc = PairingConfig(
            mode=mode,
            theta0=center,
            alpha=radius,
            psi=center + sign * r * radius,
            t_aux=center + sign * radius / r,
            over_bound=radius > large_angle_bound(center, cfg),
        )
        return pc
    if mode == "sweep":
        # one beam per slot: both slopes point at the fraction center, so every
        # subcarrier maps to the same angle
        return PairingConfig(mode=BACKWARD, theta0=center, alpha=0.0, psi=center, t_aux=center)
    raise ValueError(f"unknown pairing mode {mode!r}")


def plan_tracking(
    theta0: float,
    alpha: float,
    slots: int,
    cfg: SystemConfig,
    codebook: JointCodebook | None = None,
    pairing_mode: str = "auto",
) -> TrackingPlan:
    """Split [theta0 - alpha, theta0 + alpha] into ``slots`` fractions and pair each.

    ``pairing_mode`` is "auto" (sign-of-center rule), "forward"/"backward"
    (forced, for baselines), or "sweep" (one beam per slot).  Slot radii beyond
    the applicable bound only warn; tracking with them may fail.
    """
    if slots < 1:
        raise ValueError("slots must be a positive integer")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if abs(theta0) + alpha > 1 + 1e-12:
        raise ValueError(f"searched interval [{theta0 - alpha}, {theta0 + alpha}] leaves [-1, 1]")
    l = np.arange(1, slots + 1)
    centers = theta0 - alpha + (2 * l - 1) * alpha / slots
    radius = alpha / slots
    pairings = []
    for c in centers:
        pc = _slot_pairing(float(c), radius, cfg, pairing_mode)
        if pairing_mode != "sweep":
            bound = forward_bound(pc.theta0, cfg) if pc.mode == FORWARD else large_angle_bound(pc.theta0, cfg)
            if radius > bound:
                warnings.warn(
                    f"slot radius {radius:.4g} exceeds the {pc.mode} bound {bound:.4g} "
                    f"at center {pc.theta0:.3f}; tracking may fail",
                    RuntimeWarning,
                    stacklevel=2,
                )
        if codebook is not None:
            pc = quantized_pairing(pc, codebook)
        pairings.append(pc)
    return TrackingPlan(
        theta0=theta0,
        alpha=alpha,
        slots=slots,
        slot_centers=centers,
        slot_radius=radius,
        pairings=tuple(pairings),
        cfg=cfg,
    )


def run_tracking(
    plan: TrackingPlan,
    channel: ChannelResponse,
    noise_std: float = 0.0,
    rng: np.random.Generator | int | None = None,
) -> TrackingObservation:
    """Simulate the received pilot matrix Y, one row per slot, unit pilots.

    Y[l, m] is h_m^H f_{l,m} plus circular complex noise of variance
    noise_std**2; reproducible for a given seed.
    """
    cfg = plan.cfg
    grid = SubcarrierGrid.from_config(cfg)
    if channel.h.shape != (len(grid), cfg.n_bs):
        raise ValueError(f"channel shape {channel.h.shape} does not match the config grid")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    y = np.empty((plan.slots, len(grid)), dtype=complex)
    hc = channel.h.conj()
    for i, pc in enumerate(plan.pairings):
        f = precoder_matrix(PrecoderConfig(pc.psi, pc.t_aux), grid, cfg)
        y[i] = np.einsum("mn,mn->m", hc, f)
    if noise_std > 0:
        gen = make_rng(rng)
        noise = gen.standard_normal((plan.slots, len(grid), 2))
        y += noise_std / np.sqrt(2.0) * (noise[..., 0] + 1j * noise[..., 1])
    return TrackingObservation(y=y, plan=plan)


def select_strongest(obs: TrackingObservation) -> tuple[int, int]:
    """Indices (l_hat, m_hat) of the largest |Y|^2 cell.

    Slots are 1-based, subcarriers signed (-M..M); ties break to the smaller
    slot, then the smaller subcarrier.
    """
    if obs.y.size == 0:
        raise ValueError("empty observation")
    power = np.abs(obs.y) ** 2
    flat = int(np.argmax(power))  # first occurrence: smallest l, then smallest m
    n_sub = obs.y.shape[1]
    i, j = divmod(flat, n_sub)
    m_half = (n_sub - 1) // 2
    return i + 1, j - m_half


def estimate_angle(obs: TrackingObservation, l_hat: int, m_hat: int) -> float:
    """Coarse angle from the selected cell via the angle map of its slot pairing."""
    if not 1 <= l_hat <= obs.plan.slots:
        raise ValueError("slot index out of range")
    if abs(m_hat) > obs.plan.cfg.m_half:
        raise ValueError("subcarrier index out of range")
    pc = obs.plan.pairings[l_hat - 1]
    return float(angle_map(m_hat, PrecoderConfig(pc.psi, pc.t_aux), obs.plan.cfg))


def coarse_estimate(obs: TrackingObservation) -> TrackingEstimate:
    """Strongest-cell selection and angle estimate in one step."""
    l_hat, m_hat = select_strongest(obs)
    return TrackingEstimate(l_hat=l_hat, m_hat=m_hat, theta_hat=estimate_angle(obs, l_hat, m_hat))
