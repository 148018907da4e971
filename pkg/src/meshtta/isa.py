"""Transport instruction set: sockets, moves, assembler, 23-bit encoding.

Every instruction is a single move from a source socket (or a 16-bit short
immediate) to a destination socket. Writing a trigger destination launches the
corresponding function-unit operation.

Word layout (bits 22..0)::

    immediate form   1 | imm16 (21..6) | dst (5..0)
    register form    0 | guard (21..19) | src (18..13) | dst (12..7) | 0000000
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import BinaryIO

INSTRUCTION_BITS = 23
IMM_MAX = 0xFFFF
MAGIC = b"TTAM"
FORMAT_VERSION = 1


class Src(IntEnum):
    RF0 = 0
    RF1 = 1
    RF2 = 2
    RF3 = 3
    RF4 = 4
    RF5 = 5
    RF6 = 6
    RF7 = 7
    B0 = 8
    B1 = 9
    ALU_OUT = 10
    LOGIC_OUT = 11
    NFU_OUT = 12


class Dst(IntEnum):
    RF0 = 0
    RF1 = 1
    RF2 = 2
    RF3 = 3
    RF4 = 4
    RF5 = 5
    RF6 = 6
    RF7 = 7
    B0 = 8
    B1 = 9
    ALU_IN2 = 10
    ALU_ADD = 11
    ALU_EQ = 12
    ALU_GTU = 13
    LOGIC_IN2 = 14
    LOGIC_AND = 15
    LOGIC_OR = 16
    LOGIC_XOR = 17
    LOGIC_SHR = 18
    LOGIC_SHL = 19
    NFU_READ_NEIGHBOUR = 20
    NFU_READ_INDEX = 21
    NFU_WRITE_SHARED = 22
    GCU_PC = 23
    GCU_HALT = 24


class Guard(IntEnum):
    ALWAYS = 0
    IF_B0 = 1
    IF_B1 = 2
    IF_NOT_B0 = 3
    IF_NOT_B1 = 4


GPR_COUNT = 8
BOOL_COUNT = 2

ALU_OPS = {Dst.ALU_ADD: "add", Dst.ALU_EQ: "eq", Dst.ALU_GTU: "gtu"}
LOGIC_OPS = {
    Dst.LOGIC_AND: "and",
    Dst.LOGIC_OR: "or",
    Dst.LOGIC_XOR: "xor",
    Dst.LOGIC_SHR: "shr",
    Dst.LOGIC_SHL: "shl",
}
NFU_OPS = {
    Dst.NFU_READ_NEIGHBOUR: "read_neighbour",
    Dst.NFU_READ_INDEX: "read_index",
    Dst.NFU_WRITE_SHARED: "write_shared",
}
TRIGGERS = {**ALU_OPS, **LOGIC_OPS, **NFU_OPS}

SRC_NAMES = {Src(i): f"RF.{i}" for i in range(GPR_COUNT)}
SRC_NAMES.update({Src.B0: "bool.0", Src.B1: "bool.1", Src.ALU_OUT: "ALU.out",
                  Src.LOGIC_OUT: "LOGIC.out", Src.NFU_OUT: "NFU.out"})

DST_NAMES = {Dst(i): f"RF.{i}" for i in range(GPR_COUNT)}
DST_NAMES.update({Dst.B0: "bool.0", Dst.B1: "bool.1", Dst.ALU_IN2: "ALU.in2",
                  Dst.LOGIC_IN2: "LOGIC.in2", Dst.GCU_PC: "GCU.pc",
                  Dst.GCU_HALT: "GCU.halt"})
DST_NAMES.update({d: f"ALU.trig.{op}" for d, op in ALU_OPS.items()})
DST_NAMES.update({d: f"LOGIC.trig.{op}" for d, op in LOGIC_OPS.items()})
DST_NAMES.update({d: f"NFU.trig.{op}" for d, op in NFU_OPS.items()})

# Lookup is case-insensitive; a few spellings seen in hand-written listings
# are accepted as aliases.
_SRC_LOOKUP = {name.lower(): s for s, name in SRC_NAMES.items()}
_SRC_LOOKUP.update({"fu.p2": Src.NFU_OUT, "customfu.output": Src.NFU_OUT})
_DST_LOOKUP = {name.lower(): d for d, name in DST_NAMES.items()}
_DST_LOOKUP.update({
    "nfu.trig.read_neighbor": Dst.NFU_READ_NEIGHBOUR,
    "fu.p1.read_neighbour": Dst.NFU_READ_NEIGHBOUR,
    "fu.p1.read_index": Dst.NFU_READ_INDEX,
    "fu.p1.write_shared": Dst.NFU_WRITE_SHARED,
})

_GUARD_TEXT = {Guard.IF_B0: "?bool.0", Guard.IF_B1: "?bool.1",
               Guard.IF_NOT_B0: "!bool.0", Guard.IF_NOT_B1: "!bool.1"}


class AsmError(ValueError):
    """Assembly source could not be turned into a program."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MalformedInstruction(ValueError):
    pass


@dataclass(frozen=True)
class Move:
    """One guarded transport. Exactly one of ``src`` / ``imm`` is set."""

    dst: Dst
    src: Src | None = None
    imm: int | None = None
    guard: Guard = Guard.ALWAYS

    def __post_init__(self):
        if (self.src is None) == (self.imm is None):
            raise ValueError("a move needs exactly one of src or imm")
        object.__setattr__(self, "dst", Dst(self.dst))
        object.__setattr__(self, "guard", Guard(self.guard))
        if self.src is not None:
            object.__setattr__(self, "src", Src(self.src))
        else:
            if not 0 <= self.imm <= IMM_MAX:
                raise ValueError(f"immediate {self.imm} does not fit in 16 bits")
            if self.guard != Guard.ALWAYS:
                raise ValueError("immediate moves cannot be guarded")

    @property
    def is_immediate(self) -> bool:
        return self.imm is not None


@dataclass(frozen=True)
class Program:
    moves: tuple[Move, ...] = ()
    labels: dict[str, int] = field(default_factory=dict, compare=False)
    name: str = field(default="", compare=False)

    def __len__(self):
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def __getitem__(self, i):
        return self.moves[i]


def format_move(m: Move) -> str:
    if m.is_immediate and m.dst == Dst.GCU_HALT and m.imm == 0:
        return "HALT"
    src = str(m.imm) if m.is_immediate else SRC_NAMES[m.src]
    text = f"{src} -> {DST_NAMES[m.dst]}"
    if m.guard != Guard.ALWAYS:
        text = f"{_GUARD_TEXT[m.guard]} {text}"
    return text


# ---------------------------------------------------------------------------
# assembler

_LABEL_RE = re.compile(r"^([A-Za-z_][\w]*)\s*:\s*(.*)$")
_GUARD_RE = re.compile(r"^([?!])\s*bool\.(\d+)\s+(.*)$", re.IGNORECASE)
_ARROW_RE = re.compile(r"\s*(?:->|→)\s*")

_GUARDED_IMM_HINT = (
    "guarded immediate moves are not encodable; load the immediate into a "
    "register first, then guard the register move (e.g. '5 -> RF.1' "
    "followed by '?bool.0 RF.1 -> RF.2')"
)


def _parse_literal(tok: str) -> int | None:
    try:
        return int(tok, 0)
    except ValueError:
        return None


def _parse_move(text: str, lineno: int) -> Move | tuple:
    guard = Guard.ALWAYS
    m = _GUARD_RE.match(text)
    if m:
        sense, idx, text = m.groups()
        if int(idx) >= 2:
            raise AsmError(f"no boolean register bool.{idx}", lineno)
        guard = Guard(1 + int(idx) + (2 if sense == "!" else 0))

    words = text.split()
    head = words[0].upper()
    if head == "HALT" and len(words) == 1:
        if guard != Guard.ALWAYS:
            raise AsmError(_GUARDED_IMM_HINT, lineno)
        return Move(Dst.GCU_HALT, imm=0)
    if head == "JUMP":
        if len(words) != 2:
            raise AsmError("JUMP takes exactly one label", lineno)
        if guard != Guard.ALWAYS:
            raise AsmError(_GUARDED_IMM_HINT, lineno)
        target = _parse_literal(words[1])
        if target is not None:
            return ("jump", target, lineno)
        return ("jump", words[1], lineno)

    parts = _ARROW_RE.split(text)
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise AsmError(f"expected '<src> -> <dst>', got {text!r}", lineno)
    src_tok, dst_tok = parts[0].strip(), parts[1].strip()

    dst = _DST_LOOKUP.get(dst_tok.lower())
    if dst is None:
        raise AsmError(f"unknown destination socket {dst_tok!r}", lineno)

    imm = _parse_literal(src_tok)
    if imm is not None:
        if guard != Guard.ALWAYS:
            raise AsmError(_GUARDED_IMM_HINT, lineno)
        if not 0 <= imm <= IMM_MAX:
            raise AsmError(f"immediate {imm} outside 0..65535", lineno)
        return Move(dst, imm=imm)
    src = _SRC_LOOKUP.get(src_tok.lower())
    if src is None:
        raise AsmError(f"unknown source socket {src_tok!r}", lineno)
    return Move(dst, src=src, guard=guard)


def parse_program(text: str, name: str = "") -> Program:
    """Assemble source text into a :class:`Program` (two passes)."""
    items: list = []
    labels: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        for piece in line.split(";"):
            piece = piece.strip()
            while True:
                m = _LABEL_RE.match(piece)
                if not m:
                    break
                label, piece = m.groups()
                if label in labels:
                    raise AsmError(f"duplicate label {label!r}", lineno)
                labels[label] = len(items)
            if piece:
                items.append(_parse_move(piece, lineno))

    moves = []
    for item in items:
        if isinstance(item, Move):
            moves.append(item)
            continue
        _, target, lineno = item
        if isinstance(target, str):
            if target not in labels:
                raise AsmError(f"unresolved label {target!r}", lineno)
            target = labels[target]
        if not 0 <= target < len(items):
            raise AsmError(f"jump target {target} is not an instruction index", lineno)
        moves.append(Move(Dst.GCU_PC, imm=target))
    return Program(tuple(moves), labels, name)


def disassemble(p: Program) -> str:
    """Render a program as assembly; jump targets get labels where needed."""
    names: dict[int, list[str]] = {}
    for label, idx in sorted(p.labels.items(), key=lambda kv: (kv[1], kv[0])):
        names.setdefault(idx, []).append(label)
    for m in p.moves:
        if m.is_immediate and m.dst == Dst.GCU_PC and m.imm not in names:
            names[m.imm] = [f"L{m.imm}"]

    lines = []
    for i, m in enumerate(p.moves):
        lines.extend(f"{label}:" for label in names.get(i, ()))
        if m.is_immediate and m.dst == Dst.GCU_PC and m.imm < len(p.moves):
            lines.append(f"JUMP {names[m.imm][0]}")
        else:
            lines.append(format_move(m))
    for idx in sorted(k for k in names if k >= len(p.moves)):
        lines.extend(f"{label}:" for label in names[idx])
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# binary encoding

def encode_instruction(m: Move) -> int:
    if m.is_immediate:
        return (1 << 22) | (m.imm << 6) | int(m.dst)
    return (int(m.guard) << 19) | (int(m.src) << 13) | (int(m.dst) << 7)


def decode_instruction(word: int) -> Move:
    if not 0 <= word < (1 << INSTRUCTION_BITS):
        raise MalformedInstruction(f"word {word:#x} wider than 23 bits")
    if word >> 22:
        dst = word & 0x3F
        if dst >= len(Dst):
            raise MalformedInstruction(f"unused destination id {dst}")
        return Move(Dst(dst), imm=(word >> 6) & IMM_MAX)
    if word & 0x7F:
        raise MalformedInstruction("reserved bits 6..0 must be zero")
    guard, src, dst = (word >> 19) & 0x7, (word >> 13) & 0x3F, (word >> 7) & 0x3F
    if guard >= len(Guard):
        raise MalformedInstruction(f"unused guard code {guard}")
    if src >= len(Src):
        raise MalformedInstruction(f"unused source id {src}")
    if dst >= len(Dst):
        raise MalformedInstruction(f"unused destination id {dst}")
    return Move(Dst(dst), src=Src(src), guard=Guard(guard))


def write_binary(p: Program, fh: BinaryIO) -> None:
    fh.write(MAGIC + bytes([FORMAT_VERSION]) + struct.pack("<I", len(p.moves)))
    for m in p.moves:
        fh.write(struct.pack("<I", encode_instruction(m)))


def read_binary(fh: BinaryIO, name: str = "") -> Program:
    header = fh.read(9)
    if len(header) != 9 or header[:4] != MAGIC:
        raise MalformedInstruction("not a TTAM program file")
    if header[4] != FORMAT_VERSION:
        raise MalformedInstruction(f"unsupported TTAM version {header[4]}")
    (count,) = struct.unpack("<I", header[5:9])
    body = fh.read(4 * count)
    if len(body) != 4 * count:
        raise MalformedInstruction("truncated TTAM program file")
    words = struct.unpack(f"<{count}I", body)
    return Program(tuple(decode_instruction(w) for w in words), {}, name)
