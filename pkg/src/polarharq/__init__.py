"""Polar-coded incremental-redundancy HARQ over punctured mother codes.

Transmissions are carved back-to-front out of one mother codeword so that
every retransmission extends the previous code instead of replacing it.
Binary (BPSK) and multilevel set-partitioned ASK links are supported.
"""

from .construction import build_reliability, design_qup_code, estimate_fer_sc, ga_basic_transform, mi_dga_levels
from .crc import CRC16, CrcSpec, crc_append, crc_check
from .decoder import DecodeResult, decode_punctured, sc_decode, scl_decode
from .harq import HarqPlan, HarqRx, HarqTx, PlanError, SessionError, build_plan
from .modem import ChannelModel, Constellation, awgn, demap_level, map_symbols, mlpc_decode, mlpc_encode
from .polar import CodeSpec, FrozenSpec, assemble_u, polar_transform

__version__ = "0.1.0"
