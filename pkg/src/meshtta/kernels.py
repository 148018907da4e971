"""Transport programs for the vision workloads.

Every kernel expects the pixel plane to have been loaded already, which leaves
each PE's own pixel in its shared register and on its NFU output latch. The
result is left in ``RF.3`` and the program halts. No shipped kernel has
input-dependent control flow, so its cycle count is known statically.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .isa import BOOL_COUNT, Dst, GPR_COUNT, Guard, Program, Src, parse_program

RESULT_REG = 3

# direction index of each (dx, dy) offset, matching the NFU port numbering
DIRECTION_OF = {(0, -1): 0, (1, -1): 1, (1, 0): 2, (1, 1): 3,
                (0, 1): 4, (-1, 1): 5, (-1, 0): 6, (-1, -1): 7}


@dataclass(frozen=True)
class Kernel3x3:
    """3x3 integer weights, ``weights[row][col]`` with row 0 above the centre."""

    weights: tuple[tuple[int, int, int], ...]
    post_shift: int = 0

    def __post_init__(self):
        w = tuple(tuple(int(v) for v in row) for row in self.weights)
        if len(w) != 3 or any(len(row) != 3 for row in w):
            raise ValueError("kernel must be 3x3")
        if all(v == 0 for row in w for v in row):
            raise ValueError("kernel needs at least one nonzero weight")
        if any(abs(v) >= 1 << 15 for row in w for v in row):
            raise ValueError("weight magnitude must be below 2**15")
        if not 0 <= self.post_shift < 16:
            raise ValueError("post_shift must be in 0..15")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_flat(cls, values, post_shift: int = 0) -> "Kernel3x3":
        values = list(values)
        if len(values) != 9:
            raise ValueError("need nine weights")
        return cls((tuple(values[0:3]), tuple(values[3:6]), tuple(values[6:9])), post_shift)

    def flat(self) -> list[int]:
        return [v for row in self.weights for v in row]

    def is_binary(self) -> bool:
        return all(v in (-1, 0, 1) for v in self.flat())


SOBEL_X = Kernel3x3(((-1, 0, 1), (-2, 0, 2), (-1, 0, 1)))
SOBEL_Y = Kernel3x3(((-1, -2, -1), (0, 0, 0), (1, 2, 1)))
BOX_BLUR = Kernel3x3(((1, 1, 1), (1, 1, 1), (1, 1, 1)))


@dataclass(frozen=True)
class KernelProgramReport:
    program: Program
    predicted_cycles: int
    registers_used: int
    bool_registers_used: int


def predicted_cycles(program: Program) -> int:
    """Exact cycle count along the program's single execution path.

    Refuses programs whose path could depend on data: guarded or
    register-sourced pc writes, guarded halts, and unconditional loops.
    """
    for i, m in enumerate(program):
        if m.dst == Dst.GCU_PC and not (m.is_immediate and m.guard == Guard.ALWAYS):
            raise ValueError(f"instruction {i} writes the pc from data or under a guard; "
                             "the cycle count depends on the input")
        if m.dst == Dst.GCU_HALT and m.guard != Guard.ALWAYS:
            raise ValueError(f"instruction {i} is a guarded halt; "
                             "the cycle count depends on the input")
    pc, cycles, seen = 0, 0, set()
    while 0 <= pc < len(program):
        if pc in seen:
            raise ValueError(f"program never halts (loop through instruction {pc})")
        seen.add(pc)
        m = program[pc]
        cycles += 1
        if m.dst == Dst.GCU_HALT:
            break
        pc = m.imm if m.dst == Dst.GCU_PC else pc + 1
    return cycles


def report(program: Program) -> KernelProgramReport:
    gprs, bools = set(), set()
    for m in program:
        if m.src is not None and m.src < GPR_COUNT:
            gprs.add(int(m.src))
        if m.src in (Src.B0, Src.B1):
            bools.add(m.src - Src.B0)
        if m.dst < GPR_COUNT:
            gprs.add(int(m.dst))
        if m.dst in (Dst.B0, Dst.B1):
            bools.add(m.dst - Dst.B0)
        if m.guard != Guard.ALWAYS:
            bools.add(0 if m.guard in (Guard.IF_B0, Guard.IF_NOT_B0) else 1)
    assert len(bools) <= BOOL_COUNT
    return KernelProgramReport(program, predicted_cycles(program), len(gprs), len(bools))


# ---------------------------------------------------------------------------
# shipped assembly files

def shipped_names() -> list[str]:
    files = resources.files("meshtta").joinpath("programs").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".tta"))


def shipped_source(name: str) -> str:
    path = resources.files("meshtta").joinpath("programs", f"{name}.tta")
    if not path.is_file():
        raise KeyError(f"no shipped kernel named {name!r}")
    return path.read_text()


def load_shipped(name: str) -> KernelProgramReport:
    return report(parse_program(shipped_source(name), name=name))


def lbp3x3_program() -> KernelProgramReport:
    """Hand-scheduled LBP: ``RF.3`` bit k set iff neighbour k > centre."""
    return load_shipped("lbp3x3")


# ---------------------------------------------------------------------------
# convolution

def conv3x3_source(kernel: Kernel3x3) -> str:
    """Generate shift-add convolution code for ``kernel``.

    The running sum lives in ``ALU.in2``. Negative-weight terms are summed
    first starting from 0xFFFF, so a single XOR with 0xFFFF afterwards yields
    the negated sum without a separate +1.
    """
    lines = [f"# conv3x3 weights={','.join(map(str, kernel.flat()))} "
             f"post_shift={kernel.post_shift}",
             "NFU.out -> RF.0            # centre pixel"]
    terms = [(c - 1, r - 1, w) for r in range(3) for c in range(3)
             if (w := kernel.weights[r][c])]
    negative = [t for t in terms if t[2] < 0]
    positive = [t for t in terms if t[2] > 0]
    pending = False  # ALU.out holds a sum not yet latched back into ALU.in2

    def add(src):
        nonlocal pending
        if pending:
            lines.append("ALU.out -> ALU.in2")
        lines.append(f"{src} -> ALU.trig.add")
        pending = True

    def emit_term(dx, dy, weight):
        magnitude = abs(weight)
        if (dx, dy) == (0, 0):
            src = "RF.0"
        else:
            lines.append(f"{DIRECTION_OF[(dx, dy)]} -> NFU.trig.read_neighbour")
            src = "NFU.out"
        bits = [b for b in range(15) if magnitude >> b & 1]
        if bits[-1] > 0:
            lines.append(f"{src} -> LOGIC.in2")
        for b in bits:
            if b == 0:
                add(src)
            else:
                lines.append(f"{b} -> LOGIC.trig.shl")
                add("LOGIC.out")

    result = "ALU.out"
    if negative:
        lines.append("0xFFFF -> ALU.in2          # negative terms, biased by -1")
        for term in negative:
            emit_term(*term)
        lines += ["ALU.out -> LOGIC.in2",
                  "0xFFFF -> LOGIC.trig.xor",
                  "LOGIC.out -> ALU.in2        # minus the negative-term sum"]
        pending = False
        result = "LOGIC.out"
    else:
        lines.append("0 -> ALU.in2")
    for term in positive:
        emit_term(*term)
        result = "ALU.out"

    if kernel.post_shift:
        lines += [f"{result} -> LOGIC.in2",
                  f"{kernel.post_shift} -> LOGIC.trig.shr",
                  f"LOGIC.out -> RF.{RESULT_REG}"]
    else:
        lines.append(f"{result} -> RF.{RESULT_REG}")
    lines.append("HALT")
    return "\n".join(lines) + "\n"


def conv3x3_program(kernel: Kernel3x3) -> KernelProgramReport:
    return report(parse_program(conv3x3_source(kernel), name="conv3x3"))


# ---------------------------------------------------------------------------
# max-pooling

POOL_DIRECTIONS = {2: (2, 4, 3), 3: tuple(range(8))}


def maxpool_source(window: int, stride: int) -> str:
    """Window max into ``RF.3`` on PEs whose x and y are multiples of ``stride``.

    The activity test is ``((x | y) & (stride - 1)) == 0`` which only needs
    AND/OR/EQ, hence powers of two only. Other PEs squash the final write.
    """
    if window not in POOL_DIRECTIONS:
        raise ValueError("window must be 2 or 3")
    if stride < 1 or stride & (stride - 1):
        raise ValueError("stride must be a power of two (other divisors are not supported)")
    lines = [f"# maxpool window={window} stride={stride}",
             "NFU.out -> RF.0            # centre pixel",
             "0 -> NFU.trig.read_index",
             "NFU.out -> LOGIC.in2",
             "1 -> NFU.trig.read_index",
             "NFU.out -> LOGIC.trig.or",
             "LOGIC.out -> LOGIC.in2",
             f"{stride - 1} -> LOGIC.trig.and",
             "0 -> ALU.in2",
             "LOGIC.out -> ALU.trig.eq",
             "ALU.out -> bool.1          # active PE",
             "RF.0 -> ALU.in2            # running max"]
    for d in POOL_DIRECTIONS[window]:
        lines += [f"{d} -> NFU.trig.read_neighbour",
                  "NFU.out -> ALU.trig.gtu",
                  "ALU.out -> bool.0",
                  "?bool.0 NFU.out -> ALU.in2"]
    lines += ["0 -> ALU.trig.add",
              f"?bool.1 ALU.out -> RF.{RESULT_REG}",
              "HALT"]
    return "\n".join(lines) + "\n"


def maxpool_program(window: int, stride: int) -> KernelProgramReport:
    return report(parse_program(maxpool_source(window, stride), name="maxpool"))


# ---------------------------------------------------------------------------
# registry

GENERATED = {
    "sobel_x": lambda: conv3x3_source(SOBEL_X),
    "sobel_y": lambda: conv3x3_source(SOBEL_Y),
    "box_blur": lambda: conv3x3_source(BOX_BLUR),
    "maxpool_w2_s2": lambda: maxpool_source(2, 2),
    "maxpool_w3_s2": lambda: maxpool_source(3, 2),
}

NAMED_CONV = {"sobel_x": SOBEL_X, "sobel_y": SOBEL_Y, "box_blur": BOX_BLUR}
KERNEL_NAMES = ("lbp3x3", "sobel_x", "sobel_y", "box_blur", "conv3x3", "maxpool")


def kernel_by_name(name: str, weights=None, post_shift: int = 0,
                   window: int = 3, stride: int = 2) -> KernelProgramReport:
    if name == "conv3x3":
        if weights is None:
            raise ValueError("conv3x3 needs weights")
        return conv3x3_program(Kernel3x3.from_flat(weights, post_shift))
    if name == "maxpool":
        shipped = f"maxpool_w{window}_s{stride}"
        if shipped in GENERATED:
            return load_shipped(shipped)
        return maxpool_program(window, stride)
    if name in KERNEL_NAMES or name in GENERATED:
        return load_shipped(name)
    raise KeyError(f"unknown kernel {name!r}")
