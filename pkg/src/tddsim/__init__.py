"""Discrete-event simulator for TDD millimeter-wave fixed wireless access.

The package models the directional TDD machinery of a 60 GHz distribution
network: slot-structured service periods, sweep-based beamforming training,
link maintenance over announce frames, and a centralized interference-aware
slot controller, all driven by an exact-arithmetic event engine.
"""

from .beamforming import (
    BeamformingConfig,
    BeamformingResult,
    BeamMeasurementReport,
    BfMode,
    TrainedLink,
    run_beamforming,
)
from .channel import LinkBudgetConfig, link_snr_db, propagation_delay_us
from .config import ScenarioConfig, load_config, parse_config, serialize_config
from .controller import (
    AssignmentResult,
    DemandSpec,
    DirectedLink,
    GlobalSchedule,
    InterferenceGraph,
    StarvedLink,
    assign_slots,
    build_interference_graph,
    links_from_trained,
    verify_global,
)
from .domain import (
    DEFAULT_MCS_TABLE,
    ClockModel,
    ClockQuality,
    Codebook,
    McsEntry,
    NodeModel,
    PowerLimits,
    Role,
    Sector,
    mcs_from_snr,
    uniform_codebook,
)
from .engine import (
    MaintenanceSettings,
    Metrics,
    TrafficSource,
    World,
    collect_metrics,
    metrics_to_csv,
    run_until,
)
from .errors import (
    ConfigError,
    NoTxOpportunityError,
    ProtocolError,
    SimulationError,
    StructureError,
)
from .frames import FrameKind, FrameSizes
from .maintenance import (
    AnnounceFrame,
    KeepAlive,
    LinkState,
    PeriodicReportRequest,
    ReportSchedule,
    TddSynchronization,
    advance_clock,
    handle_periodic_report_request,
    keepalive_check,
    tpc_update,
)
from .schedule import (
    AbsoluteSlot,
    Direction,
    ExtendedScheduleEntry,
    SlotCategory,
    TddSlotSchedule,
    TddSlotStructure,
    default_slot_structure,
    expand_sp,
    next_basic_tx_slot,
)
from .trace import TraceRecorder

__all__ = [
    "AbsoluteSlot",
    "AnnounceFrame",
    "AssignmentResult",
    "BeamMeasurementReport",
    "BeamformingConfig",
    "BeamformingResult",
    "BfMode",
    "ClockModel",
    "ClockQuality",
    "Codebook",
    "ConfigError",
    "DEFAULT_MCS_TABLE",
    "DemandSpec",
    "DirectedLink",
    "Direction",
    "ExtendedScheduleEntry",
    "FrameKind",
    "FrameSizes",
    "GlobalSchedule",
    "InterferenceGraph",
    "KeepAlive",
    "LinkBudgetConfig",
    "LinkState",
    "MaintenanceSettings",
    "McsEntry",
    "Metrics",
    "NoTxOpportunityError",
    "NodeModel",
    "PeriodicReportRequest",
    "PowerLimits",
    "ProtocolError",
    "ReportSchedule",
    "Role",
    "ScenarioConfig",
    "Sector",
    "SimulationError",
    "SlotCategory",
    "StarvedLink",
    "StructureError",
    "TddSlotSchedule",
    "TddSlotStructure",
    "TddSynchronization",
    "TraceRecorder",
    "TrafficSource",
    "TrainedLink",
    "World",
    "advance_clock",
    "assign_slots",
    "build_interference_graph",
    "collect_metrics",
    "default_slot_structure",
    "expand_sp",
    "handle_periodic_report_request",
    "keepalive_check",
    "link_snr_db",
    "links_from_trained",
    "load_config",
    "metrics_to_csv",
    "next_basic_tx_slot",
    "parse_config",
    "propagation_delay_us",
    "run_beamforming",
    "run_until",
    "mcs_from_snr",
    "serialize_config",
    "tpc_update",
    "uniform_codebook",
    "verify_global",
]

__version__ = "0.1.0"
