"""Bit-exact semantics of a single processing element.

Every function unit has a one-cycle latency: a trigger computes its result
during the cycle and the output latch is readable from the next cycle on.
With one move per cycle this means the latch can simply be written in place.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .isa import ALU_OPS, LOGIC_OPS, NFU_OPS, BOOL_COUNT, Dst, GPR_COUNT, Guard, Move, Src

WORD = 0xFFFF

# (dx, dy) per neighbour port; y grows southwards.
DIRECTIONS = (
    (0, -1),   # N
    (1, -1),   # NE
    (1, 0),    # E
    (1, 1),    # SE
    (0, 1),    # S
    (-1, 1),   # SW
    (-1, 0),   # W
    (-1, -1),  # NW
)
DIRECTION_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")


def alu_exec(op: str, trig: int, in2: int) -> int:
    if op == "add":
        return (trig + in2) & WORD
    if op == "eq":
        return int(trig == in2)
    if op == "gtu":
        return int(trig > in2)
    raise ValueError(f"unknown ALU op {op!r}")


def logic_exec(op: str, trig: int, in2: int) -> int:
    """Bitwise ops on (trig, in2). Shifts move ``in2`` by ``trig mod 16``."""
    if op == "and":
        return trig & in2
    if op == "or":
        return trig | in2
    if op == "xor":
        return trig ^ in2
    if op == "shr":
        return in2 >> (trig & 15)
    if op == "shl":
        return (in2 << (trig & 15)) & WORD
    raise ValueError(f"unknown logic op {op!r}")


def nfu_exec(op: str, operand: int, view, x: int, y: int) -> tuple[int | None, int | None]:
    """Neighbour FU. Returns ``(nfu_out, pending_shared)``; None means unchanged."""
    if op == "read_neighbour":
        return view[operand & 7], None
    if op == "read_index":
        return (x if operand & 1 == 0 else y), None
    if op == "write_shared":
        return None, operand
    raise ValueError(f"unknown NFU op {op!r}")


@dataclass
class PEState:
    x: int = 0
    y: int = 0
    gpr: list[int] = field(default_factory=lambda: [0] * GPR_COUNT)
    boolreg: list[bool] = field(default_factory=lambda: [False] * BOOL_COUNT)
    alu_out: int = 0
    logic_out: int = 0
    nfu_out: int = 0
    alu_in2: int = 0
    logic_in2: int = 0
    shared_current: int = 0
    shared_pending: int = 0
    pc: int = 0
    halted: bool = False


def guard_passes(guard: Guard, boolreg) -> bool:
    if guard == Guard.ALWAYS:
        return True
    value = bool(boolreg[0 if guard in (Guard.IF_B0, Guard.IF_NOT_B0) else 1])
    return value if guard in (Guard.IF_B0, Guard.IF_B1) else not value


def read_source(state: PEState, move: Move) -> int:
    """Value the move puts on the bus."""
    if move.is_immediate:
        return move.imm
    s = move.src
    if s < GPR_COUNT:
        return state.gpr[s]
    if s in (Src.B0, Src.B1):
        return int(state.boolreg[s - Src.B0])
    return {Src.ALU_OUT: state.alu_out, Src.LOGIC_OUT: state.logic_out,
            Src.NFU_OUT: state.nfu_out}[s]


def pe_step(state: PEState, move: Move, view) -> PEState:
    """Execute one move and return the next state; ``state`` is not modified."""
    new = replace(state, gpr=list(state.gpr), boolreg=list(state.boolreg))
    new.pc = state.pc + 1
    if not guard_passes(move.guard, state.boolreg):
        return new

    value = read_source(state, move)
    d = move.dst
    if d < GPR_COUNT:
        new.gpr[d] = value
    elif d in (Dst.B0, Dst.B1):
        new.boolreg[d - Dst.B0] = value != 0
    elif d == Dst.ALU_IN2:
        new.alu_in2 = value
    elif d == Dst.LOGIC_IN2:
        new.logic_in2 = value
    elif d in ALU_OPS:
        new.alu_out = alu_exec(ALU_OPS[d], value, state.alu_in2)
    elif d in LOGIC_OPS:
        new.logic_out = logic_exec(LOGIC_OPS[d], value, state.logic_in2)
    elif d in NFU_OPS:
        out, pending = nfu_exec(NFU_OPS[d], value, view, state.x, state.y)
        if out is not None:
            new.nfu_out = out
        if pending is not None:
            new.shared_pending = pending
    elif d == Dst.GCU_PC:
        new.pc = value
    elif d == Dst.GCU_HALT:
        new.halted = True
    return new
