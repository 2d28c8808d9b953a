"""Quantized codeword grids for the phase slope and delay slope, with snapping.

Beamforming alone needs both slopes quantized over [-1, 1] at step 2/n_bs.
Tracking with a fixed radius of 1/p additionally needs delay slopes out to
+-f_c/(m_half*f_d*p), covered at the coarser step 2/p.  The joint delay grid
is the union of the inner beamforming segment and the two outer tracking
segments.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .pairing import PairingConfig
from .physmodel import SystemConfig

__all__ = ["QuantGrid", "JointCodebook", "build_codebook", "snap", "quantized_pairing"]


@dataclass(frozen=True)
class QuantGrid:
    """Union of closed uniform segments; values sorted ascending, deduplicated."""

    segments: tuple[tuple[float, float, float], ...]
    values: np.ndarray


def _uniform_closed(lo: float, hi: float, step: float) -> np.ndarray:
    """Uniform grid from lo with the given step, always including hi."""
    if hi <= lo:
        raise ValueError("segment must have hi > lo")
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(np.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    if hi - pts[-1] > 1e-9 * step:
        pts = np.append(pts, hi)
    else:
        pts[-1] = hi
    return pts


def _grid_from_segments(segments) -> QuantGrid:
    values = np.unique(np.concatenate([_uniform_closed(*s) for s in segments]))
    return QuantGrid(segments=tuple(segments), values=values)


@dataclass(frozen=True)
class JointCodebook:
    """Phase-slope and delay-slope codeword sets supporting beamforming and tracking."""

    psi_grid: QuantGrid
    t_grid: QuantGrid


def build_codebook(cfg: SystemConfig) -> JointCodebook:
    """Joint codebook: psi over [-1,1] at 2/n_bs; t adds outer segments at 2/p.

    The delay-grid extremes are +-f_c/(m_half*f_d*p); when that value is <= 1
    the outer segments are empty and the delay grid reduces to the inner one.
    """
    fine = 2.0 / cfg.n_bs
    coarse = 2.0 / cfg.p
    psi_grid = _grid_from_segments([(-1.0, 1.0, fine)])
    t_max = cfg.f_c / (cfg.m_half * cfg.f_d * cfg.p)
    segments = [(-1.0, 1.0, fine)]
    if t_max > 1.0:
        # build the positive side and mirror it so the grid is exactly symmetric
        pos = _uniform_closed(1.0, t_max, coarse)
        neg = -pos[::-1]
        inner = _uniform_closed(-1.0, 1.0, fine)
        values = np.unique(np.concatenate([neg, inner, pos]))
        t_grid = QuantGrid(
            segments=((-t_max, -1.0, coarse), (-1.0, 1.0, fine), (1.0, t_max, coarse)),
            values=values,
        )
    else:
        t_grid = _grid_from_segments(segments)
    return JointCodebook(psi_grid=psi_grid, t_grid=t_grid)


def snap(value: float, grid: QuantGrid) -> float:
    """Nearest codeword to ``value``; ties break toward the smaller codeword.

    Values outside the grid range clamp to the extreme codeword.
    """
    v = grid.values
    if len(v) == 0:
        raise ValueError("grid is empty")
    i = int(np.searchsorted(v, value))
    if i == 0:
        return float(v[0])
    if i == len(v):
        return float(v[-1])
    left, right = v[i - 1], v[i]
    if value - left <= right - value:
        return float(left)
    return float(right)


def quantized_pairing(pairing: PairingConfig, cb: JointCodebook) -> PairingConfig:
    """Pairing with both slopes replaced by their nearest codewords."""
    return replace(
        pairing,
        psi=snap(pairing.psi, cb.psi_grid),
        t_aux=snap(pairing.t_aux, cb.t_grid),
    )
