"""Haar-wavelet spin-echo sensing of temporal magnetic fields."""

from .signals import (SampledSignal, Sinusoid, Waveform, Impulse, ImpulseTrain,
                      generate, load_csv, save_csv, random_impulse_train)
from .wavelet import (DyadicIndex, HaarCoefficients, Reconstruction, WalshSpectrum,
                      haar_eval, haar_transform, haar_partial_sum,
                      haar_reconstruct_points, walsh_eval, walsh_transform,
                      walsh_inverse, walsh_reconstruct_points)
from .spinsim import (SensorParams, EchoSequence, FreePrecession, WalshSequence,
                      MeasurementOutcome, CalibrationCurve, filter_function,
                      accumulate_phase, contrast_of_phase, simulate_readout,
                      estimate_phase, calibrate)
from .protocol import (ProtocolPlan, RunBudget, EventDetection, plan_haar,
                       plan_walsh, plan_ramsey, run_budget, phase_to_coefficient,
                       run_haar_protocol, run_sparse_haar, run_walsh_protocol,
                       run_ramsey_protocol, detect_events)
from .sensitivity import (ResolutionReport, min_detectable_field, haar_resolution,
                          gain_over_ramsey, compare_protocols)

__version__ = "0.1.0"
