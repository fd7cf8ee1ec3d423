"""Log-distance path-loss channel with log-normal shadowing.

Used for both links: uplink (target -> receivers) and downlink
(base station -> target). All powers are dBm, all distances meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Position, distance

# The model is undefined at zero range; never evaluate below this floor.
MIN_DISTANCE_M = 0.1


@dataclass(frozen=True)
class PathLossModel:
    """Parameters of the log-distance model.

    p0_dbm is the power at the reference distance d0 (fixed at 1 m),
    beta the path-loss exponent, sigma_db the shadowing standard deviation.
    """

    p0_dbm: float
    beta: float
    sigma_db: float
    d0_m: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.p0_dbm):
            raise ValueError("p0_dbm must be finite")
        if not (self.beta > 0):
            raise ValueError("beta must be > 0")
        if not (self.sigma_db >= 0):
            raise ValueError("sigma_db must be >= 0")
        if self.d0_m != 1.0:
            raise ValueError("reference distance is fixed at 1 m")


@dataclass(frozen=True)
class RssSample:
    """One received-signal-strength measurement."""

    value_dbm: float
    link: str  # "UL" or "DL"
    source_id: str


def expected_rss(model: PathLossModel, tx: Position, rx: Position) -> float:
    """Mean RSS in dBm at rx for a transmitter at tx (no shadowing)."""
    d = max(distance(tx, rx), MIN_DISTANCE_M)
    return model.p0_dbm - 10.0 * model.beta * math.log10(d / model.d0_m)


def sample_rss(model: PathLossModel, tx: Position, rx: Position,
               rng: np.random.Generator, link: str = "UL",
               source_id: str = "") -> RssSample:
    """One noisy RSS draw: expected_rss plus N(0, sigma_db^2) shadowing.

    The draw is always consumed from `rng`, so stream positions do not
    depend on sigma_db; with sigma_db = 0 the result equals expected_rss
    bit for bit.
    """
    value = expected_rss(model, tx, rx) + rng.normal(0.0, model.sigma_db)
    return RssSample(value_dbm=value, link=link, source_id=source_id)
