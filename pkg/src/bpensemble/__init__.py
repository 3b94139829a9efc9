"""Ensembles of weighted belief-propagation decoders for linear block codes.

Submodules:
    codes      parity-check matrices, Tanner graphs, syndromes
    channel    BPSK/AWGN simulation, LLRs, seeded streams
    bp         the (weighted) belief-propagation decoder
    hdd        Berlekamp-Massey bounded-distance decoding
    training   datasets, multiloss, reverse-mode gradients, RMSProp
    partition  Hamming and Bernoulli-mixture EM error regions
    ensemble   gating, expert decoding, combining
    evaluate   Monte Carlo FER/BER sweeps and curve comparison
"""

from .codes import CodeSpec, KNOWN_CODES, ParityCheckMatrix, load_alist, syndrome, is_codeword
from .channel import ChannelConfig, hard_decision, make_rng, modulate_bpsk, q_function, transmit
from .bp import DecodeResult, WeightsSet, bp_decode, wbp_decode

__all__ = [
    "CodeSpec", "KNOWN_CODES", "ParityCheckMatrix", "load_alist", "syndrome",
    "is_codeword", "ChannelConfig", "hard_decision", "make_rng",
    "modulate_bpsk", "q_function", "transmit", "DecodeResult", "WeightsSet",
    "bp_decode", "wbp_decode",
]

__version__ = "0.1.0"
