"""Simulator of a transition-edge sensor photon detector under optical attacks."""

__version__ = "0.1.0"

from .attacks import (BlindingCalibration, InsufficientPoints, NotBlindable, WavelengthFakePlan,
                      calibrate_blinding, faked_state_response, plan_wavelength_fake,
                      superlinearity_index, verify_wavelength_fake)
from .config import load_profile
from .detector import Detector
from .optics import (CwFloor, OpticalWaveform, PhotonPulse, SamplingTooCoarse, build_waveform,
                     photon_energy, pulse_energy, sample_photon_number)
from .qkd import (AttackScenario, ClickModel, SiftedKeyStats, Undefined, analytic_qber,
                  click_model_from_physics, loss_budget, run_bb84_attack)
from .readout import (DiscriminationThresholds, FitFailed, PulseRecord, ReadoutParams, VoltageTrace,
                      WindowOutOfRange, assign_photon_number, calibrate_thresholds, extract_vmax,
                      histogram, trace_to_vout)
from .tes import (BiasPoint, NoConvergence, StepTooLarge, TesParams, TesState, iv_curve,
                  match_cw_to_bath, reconstruct_vtes, resistance, steady_state, step)
