"""Cycle-accurate model of a mesh of transport-triggered vision PEs."""
from .array import (ArrayConfig, ArrayState, Boundary, Group, RunStats, init_array,
                    load_image_flat, load_image_wave, neighbor_view, read_plane, run,
                    run_batch, run_fovea, step)
from .isa import Dst, Guard, Move, Program, Src, decode_instruction, disassemble, \
    encode_instruction, parse_program
from .kernels import Kernel3x3, conv3x3_program, lbp3x3_program, maxpool_program, \
    predicted_cycles

__version__ = "0.1.0"
