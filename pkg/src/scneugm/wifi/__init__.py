from .csma import ReliabilityReport, link_tables, simulate_periods
from .network import (Network, PairIndicators, SlotAssignment, StationState, TopologyError,
                      generate_network, measure_states, move_stations, pair_indicators)
from .radio import NoFeasibleMcs, decode_error, detect_range, path_loss_db, select_mcs

__all__ = ["ReliabilityReport", "link_tables", "simulate_periods", "Network", "PairIndicators",
           "SlotAssignment", "StationState", "TopologyError", "generate_network",
           "measure_states", "move_stations", "pair_indicators", "NoFeasibleMcs",
           "decode_error", "detect_range", "path_loss_db", "select_mcs"]
