from simulator.steady_state import AgentState, SimStats, WorkerSimStats, simulate_steady_state
from simulator.panel import PanelDataset, PanelScenario, generate_panel, staggered_treatment_years
from simulator.calibration import CalibrationResult, calibrate_shock
