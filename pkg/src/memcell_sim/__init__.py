"""Switched-capacitor analog memory cell: transient simulation and
leakage calibration."""

from .constants import SILICON, DeviceConstants
from .device import (MosBias, MosParams, NoiseParams, NoiseResult,
                     ProcessDoping, ProcessParameters, RegionError,
                     SmallSignal, default_params, drain_current, noise,
                     process_parameters, small_signal, threshold_voltage)
from .leak import LeakModel, retention
from .waveform import PwlWaveform, pwl_eval
from .circuit import (Capacitor, ConvergenceError, LeakageSink, MosSwitch,
                      Netlist, OpAmpBlock, Resistor, SingularNodeError,
                      StepPolicy, Trace, VSource, run_transient, step)
from .memcell import (CellConfig, CellTrace, ConfigError, ControlSchedule,
                      PulseWidths, ScheduleError, Stage, behavioral_store,
                      build_cell, default_schedule, default_switch_params,
                      pass_gate_limit, simulate_cell)
from .calib import (ErrorRow, FitReport, GainRow, calibrate_reproduction,
                    error_table, fit_retention, gain_table)
from .config import RunConfig, load_config

__version__ = "0.1.0"
