"""Time-domain simulation of the inverter, grid and controllers."""
from .core import (COLUMNS, InitResidualTooLarge, SimState, SimulationError, Simulator,
                   TimeSeriesRecord, assemble_residual, initialize, records_to_array, run, step)
from .scenario import (PhaseJump, PStep, QStep, Scenario, ScenarioError, SimConfig,
                       SupportToggle)
