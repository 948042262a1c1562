"""Safety-verified lane changing in mixed connected/non-connected traffic.

The package computes worst-case behaviour envelopes of surrounding vehicles
from connectivity promises, verifies the existence of closed-form safe
evasion trajectories, arbitrates proceed/hesitate/abort every control step,
and reproduces Monte Carlo lane-change experiments (success rate, collision
rate, promise-violation robustness).
"""
from .behaviors import (LABEL_AGGRESSIVE, LABEL_COLLABORATIVE, LABEL_UNKNOWN,
                        ViolationModel, assess_aggressiveness,
                        follower_policy, leader_policy,
                        sample_promise_violation)
from .decision import (BEHAVIOR_ABORT, BEHAVIOR_HESITATE, BEHAVIOR_PROCEED,
                       Decision, abort_action, decide_step, hesitate_action)
from .errors import (EmptyResults, EvasionInfeasible, GapTooSmall, Infeasible,
                     InvalidScenario, LanesafeError, PlanExhausted,
                     ShapeMismatch)
from .evasion import (EvasionCheck, LateralPlan, LongitudinalPlan,
                      ego_position_at, evasion_exists, follower_position_at,
                      lateral_evasion, longitudinal_evasion)
from .harness import (SweepConfig, SweepRow, load_sweep_config, run_sweep,
                      sample_scenario, write_results)
from .planner import (NetworkWeights, Observation, PlannerSpec, RuleParams,
                      baseline_lane_change, load_weights, mlp_forward, plan)
from .sim import (MODES, MODE_CV_ALL, MODE_CV_FOLLOW, MODE_CV_NONE,
                  MODE_NO_AGG, TrialResult, check_success, detect_collision,
                  mask_observation, run_trial, step_kinematics)
from .types import (ConnectivityPromise, EventSpec, LaneGeometry,
                    MechanicalLimits, ScenarioConfig, SurroundingVehicle,
                    VehicleState, default_promise, dump_scenario,
                    load_scenario, validate_scenario)
from .worst_case import (ChainResult, FORMULA_CERTIFIED, FORMULA_LEGACY,
                         apply_promise_floor, leader_position_at,
                         propagate_chain, required_decel)

__version__ = "0.1.0"
