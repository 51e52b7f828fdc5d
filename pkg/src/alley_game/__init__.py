"""Time-slotted simulator and strategy library for the narrow-alley vehicle game."""

from .comms import (CommConfig, Detection, Message, SensingResult, TypeAndState, TypeOnly,
                    broadcast_round, sense, sense_all, slot_beacon)
from .model import (ACTION_ORDER, Action, ActionEvaluation, AlleyConfig, CollisionEvent,
                    Direction, UtilityParams, VehicleState, VType, apply_actions,
                    expected_elapsed_time_central, expected_elapsed_time_two_vehicle,
                    make_vehicles, utility)
from .planning import OpponentSummary, minmax_oracle, opponent_summary, plan_central
from .sim import (EpisodeResult, ExperimentStats, PoAResult, Scenario, consecutive_scenario,
                  price_of_anarchy, run_episode, run_experiment, social_optimum)
from .strategy import (DEFAULT_PRIOR, BeliefProfile, MixedStrategy, NeighborBelief, PolicyKind,
                       Prior, best_response_bayes, best_response_pure, decide,
                       solve_two_vehicle_game)

__version__ = "0.1.0"

__all__ = [
    "ACTION_ORDER", "Action", "ActionEvaluation", "AlleyConfig", "BeliefProfile", "CollisionEvent",
    "CommConfig", "DEFAULT_PRIOR", "Detection", "Direction", "EpisodeResult", "ExperimentStats",
    "Message", "MixedStrategy", "NeighborBelief", "OpponentSummary", "PoAResult", "PolicyKind",
    "Prior", "Scenario", "SensingResult", "TypeAndState", "TypeOnly", "UtilityParams",
    "VType", "VehicleState", "apply_actions", "best_response_bayes", "best_response_pure",
    "broadcast_round", "consecutive_scenario", "decide", "expected_elapsed_time_central",
    "expected_elapsed_time_two_vehicle", "make_vehicles", "minmax_oracle", "opponent_summary",
    "plan_central", "price_of_anarchy", "run_episode", "run_experiment", "sense", "sense_all",
    "slot_beacon", "social_optimum", "solve_two_vehicle_game", "utility",
]
