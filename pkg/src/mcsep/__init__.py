"""Multi-channel target-speaker separation: simulation, spatial features,
complex masking, mask-based MVDR beamforming and Si-SNR evaluation."""
from .beamforming import (BeamformerWeights, PsdSet, apply_weights, delay_and_sum, estimate_psd,
                          mvdr_from_psd, mvdr_from_steering)
from .features import DEFAULT_PAIRS, angle_feature, ipd, steering_vector
from .masking import ComplexMask, af_heuristic_masks, apply_mask, oracle_crm
from .metrics import EvalReport, si_snr, si_snr_loss
from .room import ArrayGeometry, RoomSpec, SceneSpec, sample_scene, simulate_rir, synthesize_mixture
from .separation import separate
from .spectral import ComplexSpectrogram, MultiChannelWaveform, StftConfig, istft, stft

__version__ = "0.1.0"
