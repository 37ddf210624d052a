"""OFDM joint radar-communication simulation with IQ-imbalance-robust waveforms."""
from __future__ import annotations

from .params import C0, SystemConfig, WindowSpec, measurement_config, unambiguous_limits
from .waveform import Rule, SymbolFrame, TimeBurst, complete_frame, ofdm_demodulate, ofdm_modulate, random_frame
from .impairments import ImpairmentModel, IqProfile, apply_rx_iq, apply_tx_iq, reference_impairments
from .channels import RadarTarget, generate_cir, radar_channel, reference_targets
from .radar import compute_rdm, detect_peaks, predict_ghosts, remove_median
from .link import BurstLayout, EffectiveChannel, build_burst, estimate_channel, receive_burst

__version__ = "0.1.0"

__all__ = [
    "C0",
    "SystemConfig",
    "WindowSpec",
    "measurement_config",
    "unambiguous_limits",
    "Rule",
    "SymbolFrame",
    "TimeBurst",
    "complete_frame",
    "ofdm_modulate",
    "ofdm_demodulate",
    "random_frame",
    "ImpairmentModel",
    "IqProfile",
    "apply_tx_iq",
    "apply_rx_iq",
    "reference_impairments",
    "RadarTarget",
    "generate_cir",
    "radar_channel",
    "reference_targets",
    "compute_rdm",
    "detect_peaks",
    "predict_ghosts",
    "remove_median",
    "BurstLayout",
    "EffectiveChannel",
    "build_burst",
    "estimate_channel",
    "receive_burst",
]
