"""Deterministic LOS directional link budget between (node, sector) pairs.

Free-space propagation only: no fading, blockage or NLOS components, so
every SNR is an exact function of geometry, sector pattern and power.
A per-link constant extra loss can be configured for what-if studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domain import Codebook, NodeModel, bearing_deg, sector_gain_dbi

SPEED_OF_LIGHT_M_PER_US = 299.792458


@dataclass
class LinkBudgetConfig:
    carrier_hz: float = 60e9
    bandwidth_hz: float = 2.16e9
    noise_figure_db: float = 10.0
    # Unintended power above noise_floor + this threshold marks two
    # concurrent transmissions as conflicting.
    interference_threshold_db: float = 0.0
    # Optional per-link constant loss, keyed by unordered node-id pair.
    extra_loss_db: dict[frozenset, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("carrier_hz and bandwidth_hz must be positive")

    def pair_loss_db(self, node_a: str, node_b: str) -> float:
        return self.extra_loss_db.get(frozenset((node_a, node_b)), 0.0)


@dataclass(frozen=True)
class LinkSample:
    tx_node: str
    rx_node: str
    tx_sector: int
    rx_sector: int
    snr_db: float
    rcpi_dbm: float
    rsni_db: float


def path_loss_db(distance_m: float, carrier_hz: float) -> float:
    """Friis free-space loss in dB."""
    if distance_m <= 0:
        raise ValueError("distance_m must be positive")
    return 20.0 * math.log10(distance_m) + 20.0 * math.log10(carrier_hz) - 147.55


def noise_floor_dbm(cfg: LinkBudgetConfig) -> float:
    """Thermal noise floor plus receiver noise figure, in dBm."""
    return -174.0 + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.noise_figure_db


def distance_m(a: NodeModel, b: NodeModel) -> float:
    return math.hypot(b.position[0] - a.position[0], b.position[1] - a.position[1])


def propagation_delay_us(a: NodeModel, b: NodeModel) -> float:
    return distance_m(a, b) / SPEED_OF_LIGHT_M_PER_US


def received_power_dbm(
    tx: NodeModel,
    tx_sector: int,
    rx: NodeModel,
    rx_sector: int,
    cfg: LinkBudgetConfig,
) -> float:
    """Power of tx's signal at rx for the given sector pair, in dBm."""
    d = distance_m(tx, rx)
    if d == 0.0:
        raise ValueError(f"nodes {tx.node_id} and {rx.node_id} are coincident")
    tx_gain = sector_gain_dbi(tx.codebook, tx_sector, bearing_deg(tx.position, rx.position))
    rx_gain = sector_gain_dbi(rx.codebook, rx_sector, bearing_deg(rx.position, tx.position))
    loss = path_loss_db(d, cfg.carrier_hz) + cfg.pair_loss_db(tx.node_id, rx.node_id)
    return tx.tx_power_dbm + tx_gain + rx_gain - loss


def link_snr_db(
    tx: NodeModel,
    tx_sector: int,
    rx: NodeModel,
    rx_sector: int,
    cfg: LinkBudgetConfig,
) -> LinkSample:
    """Full link-budget evaluation for one directed (sector, sector) link.

    RSNI equals SNR under this deterministic model; RCPI is the received
    power itself.
    """
    rcpi = received_power_dbm(tx, tx_sector, rx, rx_sector, cfg)
    snr = rcpi - noise_floor_dbm(cfg)
    return LinkSample(
        tx_node=tx.node_id,
        rx_node=rx.node_id,
        tx_sector=tx_sector,
        rx_sector=rx_sector,
        snr_db=snr,
        rcpi_dbm=rcpi,
        rsni_db=snr,
    )


def interferes(
    tx: NodeModel,
    tx_sector: int,
    victim_rx: NodeModel,
    victim_rx_sector: int,
    cfg: LinkBudgetConfig,
) -> bool:
    """True when tx's unintended power at the victim receiver exceeds the
    protection threshold above the noise floor."""
    power = received_power_dbm(tx, tx_sector, victim_rx, victim_rx_sector, cfg)
    return power > noise_floor_dbm(cfg) + cfg.interference_threshold_db
