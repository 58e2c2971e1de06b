"""Delay-minimizing power allocation and energy transfer for
energy-harvesting sensor networks sharing an interference channel."""

from .channel import (
    CapacityViolation,
    ChannelState,
    PowerVector,
    capacity_approx,
    capacity_exact,
    link_delay,
    sample_gains,
    sinr,
    total_delay,
)
from .config import ConfigError, ScenarioConfig, load_scenario, scenario_from_dict
from .oracle import OracleResult, ProbeResult, brute_force_solve, convexity_probe, objective_raw_power
from .simulate import (
    RoundResult,
    SlotResult,
    build_slot_problem,
    export_results,
    run_round,
    run_slot,
    solution_from_dict,
    solution_to_dict,
)
from .energy import (
    EnergyState,
    TransferVector,
    available_energy,
    check_energy_budget,
    sample_arrivals,
)
from .feasibility import (
    FeasibilityReport,
    RateInfeasibleError,
    check_problem_feasible,
    min_power_vector,
    spectral_radius,
)
from .problem import SlotProblem, validate_slot_problem
from .solver import (
    InfeasibleProblemError,
    KktReport,
    Solution,
    SolverError,
    gradient_logdomain,
    kkt_report,
    objective_logdomain,
    solve_no_transfer,
    solve_with_transfer,
)
from .topology import (
    EnergyLink,
    FlowAssignment,
    IncidenceMatrices,
    Schedule,
    Topology,
    TopologyError,
    build_incidence,
    check_flow_conservation,
    half_duplex_schedule,
)

__version__ = "0.1.0"
