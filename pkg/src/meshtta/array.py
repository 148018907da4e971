"""Lockstep 2-D mesh of PEs.

State is kept as numpy planes with a leading batch axis so that many
independent arrays (e.g. one per test image, or one per fovea window) can be
stepped together. Index order inside a plane is ``[batch, y, x]``.

Each cycle has two phases: every live PE executes its move against the
shared-register values as they stood at the start of the cycle, then all
pending shared writes are committed. This makes the result independent of the
order in which PEs are evaluated.

Two engines implement the same semantics: ``"vector"`` executes one move for
all PEs of a group at once; ``"scalar"`` walks PEs one by one through
:func:`meshtta.pe.pe_step` and accepts an explicit evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import isa
from .isa import ALU_OPS, LOGIC_OPS, Dst, Guard, Move, Program, Src
from .pe import DIRECTIONS, PEState, guard_passes, pe_step, read_source

WORD = 0xFFFF


class Boundary(Enum):
    ZERO = "zero"
    CLAMP = "clamp"
    WRAP = "wrap"


class LockstepError(RuntimeError):
    """PEs sharing an instruction stream ended up at different pcs."""


Predicate = Callable[[int, int], bool]


def everywhere(x: int, y: int) -> bool:
    return True


def rect(x0: int, y0: int, x1: int, y1: int) -> Predicate:
    """PEs with ``x0 <= x < x1`` and ``y0 <= y < y1``."""
    return lambda x, y: x0 <= x < x1 and y0 <= y < y1


def index_mod(k: int, r: int = 0, axis: str = "both") -> Predicate:
    if axis == "x":
        return lambda x, y: x % k == r
    if axis == "y":
        return lambda x, y: y % k == r
    return lambda x, y: x % k == r and y % k == r


@dataclass(frozen=True)
class Group:
    program: Program
    predicate: Predicate = everywhere
    name: str = ""


@dataclass
class ArrayConfig:
    rows: int
    cols: int
    groups: list[Group]
    boundary: Boundary = Boundary.ZERO
    trace_enabled: bool = False

    @classmethod
    def single(cls, rows, cols, program, boundary=Boundary.ZERO, trace_enabled=False):
        return cls(rows, cols, [Group(program)], Boundary(boundary), trace_enabled)


@dataclass
class RunStats:
    cycles: int = 0
    executed_moves: int = 0
    squashed_moves: int = 0
    halted_pe_count: int = 0
    load_cycles: int = 0
    cutoff: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class TraceEvent:
    cycle: int
    group: int
    x: int
    y: int
    executed: bool
    move: Move
    bus: int

    def __str__(self):
        flag = "EXEC" if self.executed else "SQSH"
        return (f"{self.cycle:6d} g{self.group} ({self.x},{self.y}) {flag} "
                f"{isa.format_move(self.move)} bus={self.bus}")


_PLANE_FIELDS = ("alu_out", "logic_out", "nfu_out", "alu_in2", "logic_in2",
                 "shared", "shared_pending", "pc")


@dataclass(eq=False)
class ArrayState:
    config: ArrayConfig
    group_map: np.ndarray
    gpr: np.ndarray
    boolreg: np.ndarray
    alu_out: np.ndarray
    logic_out: np.ndarray
    nfu_out: np.ndarray
    alu_in2: np.ndarray
    logic_in2: np.ndarray
    shared: np.ndarray
    shared_pending: np.ndarray
    pc: np.ndarray
    halted: np.ndarray
    cycle: int = 0
    batch_cycles: np.ndarray = None
    executed_moves: int = 0
    squashed_moves: int = 0
    _padded: np.ndarray | None = field(default=None, repr=False)

    @property
    def batch(self) -> int:
        return self.shared.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.config.rows, self.config.cols

    def copy(self) -> "ArrayState":
        kw = {name: getattr(self, name).copy() for name in
              _PLANE_FIELDS + ("gpr", "boolreg", "halted", "batch_cycles")}
        return ArrayState(self.config, self.group_map, cycle=self.cycle,
                          executed_moves=self.executed_moves,
                          squashed_moves=self.squashed_moves, **kw)

    def same_as(self, other: "ArrayState") -> bool:
        """Bit-identical machine state (configuration objects not compared)."""
        names = _PLANE_FIELDS + ("gpr", "boolreg", "halted", "batch_cycles")
        return (self.cycle == other.cycle
                and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names))

    def pe(self, x: int, y: int, b: int = 0) -> PEState:
        return PEState(
            x=x, y=y,
            gpr=[int(v) for v in self.gpr[:, b, y, x]],
            boolreg=[bool(v) for v in self.boolreg[:, b, y, x]],
            alu_out=int(self.alu_out[b, y, x]), logic_out=int(self.logic_out[b, y, x]),
            nfu_out=int(self.nfu_out[b, y, x]), alu_in2=int(self.alu_in2[b, y, x]),
            logic_in2=int(self.logic_in2[b, y, x]),
            shared_current=int(self.shared[b, y, x]),
            shared_pending=int(self.shared_pending[b, y, x]),
            pc=int(self.pc[b, y, x]), halted=bool(self.halted[b, y, x]),
        )

    def set_pe(self, s: PEState, b: int = 0) -> None:
        x, y = s.x, s.y
        self.gpr[:, b, y, x] = s.gpr
        self.boolreg[:, b, y, x] = s.boolreg
        self.alu_out[b, y, x] = s.alu_out
        self.logic_out[b, y, x] = s.logic_out
        self.nfu_out[b, y, x] = s.nfu_out
        self.alu_in2[b, y, x] = s.alu_in2
        self.logic_in2[b, y, x] = s.logic_in2
        self.shared[b, y, x] = s.shared_current
        self.shared_pending[b, y, x] = s.shared_pending
        self.pc[b, y, x] = s.pc
        self.halted[b, y, x] = s.halted


def _group_map(config: ArrayConfig) -> np.ndarray:
    hits = np.zeros((config.rows, config.cols), dtype=np.int64)
    gmap = np.full((config.rows, config.cols), -1, dtype=np.int64)
    for g, group in enumerate(config.groups):
        for y in range(config.rows):
            for x in range(config.cols):
                if group.predicate(x, y):
                    hits[y, x] += 1
                    gmap[y, x] = g
    if (hits > 1).any():
        y, x = np.argwhere(hits > 1)[0]
        raise ValueError(f"PE ({x},{y}) matched by more than one group")
    if (hits == 0).any():
        y, x = np.argwhere(hits == 0)[0]
        raise ValueError(f"PE ({x},{y}) not covered by any group")
    return gmap


def init_array(config: ArrayConfig, batch: int = 1) -> ArrayState:
    if config.rows < 1 or config.cols < 1:
        raise ValueError("array needs at least one PE")
    if not config.groups:
        raise ValueError("array needs at least one group")
    gmap = _group_map(config)
    shape = (batch, config.rows, config.cols)
    planes = {name: np.zeros(shape, dtype=np.int64) for name in _PLANE_FIELDS}
    state = ArrayState(
        config, gmap,
        gpr=np.zeros((isa.GPR_COUNT,) + shape, dtype=np.int64),
        boolreg=np.zeros((isa.BOOL_COUNT,) + shape, dtype=bool),
        halted=np.zeros(shape, dtype=bool),
        batch_cycles=np.zeros(batch, dtype=np.int64),
        **planes,
    )
    # a PE whose program is empty has nothing to do
    for g, group in enumerate(config.groups):
        if len(group.program) == 0:
            state.halted[:, gmap == g] = True
    return state


# ---------------------------------------------------------------------------
# neighbourhood

def _resolve(i: int, n: int, boundary: Boundary) -> int | None:
    if 0 <= i < n:
        return i
    if boundary is Boundary.CLAMP:
        return min(max(i, 0), n - 1)
    if boundary is Boundary.WRAP:
        return i % n
    return None


def neighbor_view(state: ArrayState, x: int, y: int, b: int = 0) -> list[int]:
    """Shared values of the eight neighbours of PE (x, y), N first, clockwise."""
    rows, cols = state.shape
    bnd = state.config.boundary
    view = []
    for dx, dy in DIRECTIONS:
        nx, ny = _resolve(x + dx, cols, bnd), _resolve(y + dy, rows, bnd)
        view.append(0 if nx is None or ny is None else int(state.shared[b, ny, nx]))
    return view


_PAD_MODE = {Boundary.ZERO: "constant", Boundary.CLAMP: "edge", Boundary.WRAP: "wrap"}


def _neighbor_plane(state: ArrayState, direction: int) -> np.ndarray:
    if state._padded is None:
        state._padded = np.pad(state.shared, ((0, 0), (1, 1), (1, 1)),
                               mode=_PAD_MODE[state.config.boundary])
    rows, cols = state.shape
    dx, dy = DIRECTIONS[direction]
    return state._padded[:, 1 + dy:1 + dy + rows, 1 + dx:1 + dx + cols]


# ---------------------------------------------------------------------------
# stepping

def _vec_alu(op, t, in2):
    if op == "add":
        return (t + in2) & WORD
    if op == "eq":
        return (t == in2).astype(np.int64)
    return (t > in2).astype(np.int64)


def _vec_logic(op, t, in2):
    if op == "and":
        return t & in2
    if op == "or":
        return t | in2
    if op == "xor":
        return t ^ in2
    if op == "shr":
        return in2 >> (t & 15)
    return (in2 << (t & 15)) & WORD


def _guard_mask(state: ArrayState, guard: Guard) -> np.ndarray | None:
    if guard == Guard.ALWAYS:
        return None
    reg = state.boolreg[0 if guard in (Guard.IF_B0, Guard.IF_NOT_B0) else 1]
    return reg if guard in (Guard.IF_B0, Guard.IF_B1) else ~reg


def _source(state: ArrayState, move: Move):
    if move.is_immediate:
        return move.imm
    s = move.src
    if s < isa.GPR_COUNT:
        return state.gpr[s]
    if s in (Src.B0, Src.B1):
        return state.boolreg[s - Src.B0].astype(np.int64)
    return {Src.ALU_OUT: state.alu_out, Src.LOGIC_OUT: state.logic_out,
            Src.NFU_OUT: state.nfu_out}[s]


def _exec_vector(state: ArrayState, move: Move, mask: np.ndarray):
    """Execute ``move`` on the PEs selected by ``mask``; returns the enabled mask."""
    cond = _guard_mask(state, move.guard)
    ok = mask if cond is None else mask & cond
    # source values are read before anything is written
    val = _source(state, move)
    if not isinstance(val, int):
        val = val.copy()
    d = move.dst

    if d < isa.GPR_COUNT:
        np.copyto(state.gpr[d], val, where=ok)
    elif d in (Dst.B0, Dst.B1):
        np.copyto(state.boolreg[d - Dst.B0], np.not_equal(val, 0), where=ok)
    elif d == Dst.ALU_IN2:
        np.copyto(state.alu_in2, val, where=ok)
    elif d == Dst.LOGIC_IN2:
        np.copyto(state.logic_in2, val, where=ok)
    elif d in ALU_OPS:
        np.copyto(state.alu_out, _vec_alu(ALU_OPS[d], val, state.alu_in2), where=ok)
    elif d in LOGIC_OPS:
        np.copyto(state.logic_out, _vec_logic(LOGIC_OPS[d], val, state.logic_in2), where=ok)
    elif d == Dst.NFU_READ_NEIGHBOUR:
        if isinstance(val, int):
            np.copyto(state.nfu_out, _neighbor_plane(state, val & 7), where=ok)
        else:
            dirs = val & 7
            for direction in np.unique(dirs[ok]):
                np.copyto(state.nfu_out, _neighbor_plane(state, int(direction)),
                          where=ok & (dirs == direction))
    elif d == Dst.NFU_READ_INDEX:
        rows, cols = state.shape
        ys, xs = np.indices((rows, cols))
        picked = np.where(np.bitwise_and(val, 1) == 0, xs, ys)
        np.copyto(state.nfu_out, np.broadcast_to(picked, ok.shape), where=ok)
    elif d == Dst.NFU_WRITE_SHARED:
        np.copyto(state.shared_pending, val, where=ok)

    state.pc[mask] += 1
    if d == Dst.GCU_PC:
        np.copyto(state.pc, val, where=ok)
    elif d == Dst.GCU_HALT:
        state.halted |= ok
    return ok, val


def _check_lockstep(state: ArrayState, g: int) -> None:
    in_group = (state.group_map == g)[None] & ~state.halted
    for b in range(state.batch):
        pcs = np.unique(state.pc[b][in_group[b]])
        if len(pcs) > 1:
            raise LockstepError(
                f"group {g} diverged to pcs {pcs.tolist()} at cycle {state.cycle}")


def _trace_events(state, g, move, mask, ok, val):
    events = []
    for b, y, x in np.argwhere(mask):
        bus = val if isinstance(val, int) else int(val[b, y, x])
        events.append(TraceEvent(state.cycle, g, int(x), int(y), bool(ok[b, y, x]), move, bus))
    return events


def _step_vector(state: ArrayState, trace: bool):
    events = []
    live_any = np.zeros(state.batch, dtype=bool)
    for g, group in enumerate(state.config.groups):
        live = (state.group_map == g)[None] & ~state.halted
        if not live.any():
            continue
        live_any |= live.any(axis=(1, 2))
        # masks are fixed before execution so no PE runs twice in one cycle
        work = [(int(p), live & (state.pc == p)) for p in np.unique(state.pc[live])]
        diverging = False
        for p, mask in work:
            move = group.program[p]
            ok, val = _exec_vector(state, move, mask)
            n_ok = int(ok.sum())
            state.executed_moves += n_ok
            state.squashed_moves += int(mask.sum()) - n_ok
            if trace:
                events.extend(_trace_events(state, g, move, mask, ok, val))
            if move.dst == Dst.GCU_PC and (move.guard != Guard.ALWAYS or not move.is_immediate):
                diverging = True
        if diverging:
            _check_lockstep(state, g)
    return live_any, events


def _step_scalar(state: ArrayState, trace: bool, order):
    rows, cols = state.shape
    if order is None:
        order = [(b, y, x) for b in range(state.batch)
                 for y in range(rows) for x in range(cols)]
    events = []
    live_any = np.zeros(state.batch, dtype=bool)
    groups_touched = set()
    for b, y, x in order:
        if state.halted[b, y, x]:
            continue
        g = int(state.group_map[y, x])
        live_any[b] = True
        pe = state.pe(x, y, b)
        move = state.config.groups[g].program[pe.pc]
        view = neighbor_view(state, x, y, b)
        executed = guard_passes(move.guard, pe.boolreg)
        if executed:
            state.executed_moves += 1
        else:
            state.squashed_moves += 1
        if trace:
            events.append(TraceEvent(state.cycle, g, x, y, executed, move, read_source(pe, move)))
        state.set_pe(pe_step(pe, move, view), b)
        if move.dst == Dst.GCU_PC:
            groups_touched.add(g)
    for g in sorted(groups_touched):
        _check_lockstep(state, g)
    return live_any, events


def step(state: ArrayState, engine: str = "vector", order: Sequence | None = None):
    """Advance one global cycle in place. Returns ``(state, trace_events)``.

    ``order`` (scalar engine only) is a sequence of ``(batch, y, x)`` tuples
    giving the PE evaluation order.
    """
    trace = state.config.trace_enabled
    if state.batch > 1 and trace:
        raise ValueError("tracing is only supported for a single array")
    if engine == "vector":
        live_any, events = _step_vector(state, trace)
    elif engine == "scalar":
        live_any, events = _step_scalar(state, trace, order)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    # falling off the end of a program halts the PE
    for g, group in enumerate(state.config.groups):
        off = (state.group_map == g)[None] & (state.pc >= len(group.program))
        state.halted |= off

    # commit phase
    state.shared[...] = state.shared_pending
    state._padded = None
    if live_any.any():
        state.cycle += 1
        state.batch_cycles += live_any
    events.sort(key=lambda e: (e.cycle, e.y, e.x))
    return state, events


def run(state: ArrayState, max_cycles: int, engine: str = "vector",
        order: Sequence | None = None, trace_sink: Callable[[TraceEvent], None] | None = None):
    """Step until every PE has halted or ``max_cycles`` cycles have run."""
    if max_cycles <= 0:
        raise ValueError("max_cycles must be positive")
    start_cycle, start_exec, start_sq = state.cycle, state.executed_moves, state.squashed_moves
    cutoff = False
    while not state.halted.all():
        if state.cycle - start_cycle >= max_cycles:
            cutoff = True
            break
        _, events = step(state, engine=engine, order=order)
        if trace_sink is not None:
            for e in events:
                trace_sink(e)
    stats = RunStats(
        cycles=state.cycle - start_cycle,
        executed_moves=state.executed_moves - start_exec,
        squashed_moves=state.squashed_moves - start_sq,
        halted_pe_count=int(state.halted.sum()),
        cutoff=cutoff,
    )
    return state, stats


# ---------------------------------------------------------------------------
# image loading / readout

def as_plane(img) -> np.ndarray:
    """Validate and normalise an image plane: 2-D (or stacked 3-D) uint16."""
    a = np.asarray(img)
    if a.ndim not in (2, 3):
        raise ValueError("image plane must be 2-D (or a 3-D stack)")
    if a.size and (a.min() < 0 or a.max() > WORD):
        raise ValueError("pixel values must fit in 16 bits")
    return a.astype(np.uint16)


def _stack_for(state: ArrayState, img) -> np.ndarray:
    a = as_plane(img).astype(np.int64)
    if a.ndim == 2:
        a = np.broadcast_to(a, (state.batch,) + a.shape)
    if a.shape != (state.batch,) + state.shape:
        raise ValueError(f"image shape {a.shape[1:]} does not match grid {state.shape}"
                         + ("" if a.shape[0] == state.batch else f" x batch {state.batch}"))
    return a


def _deposit(state: ArrayState, plane: np.ndarray) -> None:
    # A loaded pixel arrives through the neighbour FU, so it is left on the
    # NFU output latch as well as in the shared register.
    state.shared[...] = plane
    state.shared_pending[...] = plane
    state.nfu_out[...] = plane
    state._padded = None


def load_image_flat(state: ArrayState, img) -> ArrayState:
    _deposit(state, _stack_for(state, img))
    return state


def load_image_wave(state: ArrayState, img) -> tuple[ArrayState, int]:
    """Column-serial injection at the west edge, shifted east once per cycle."""
    target = _stack_for(state, img)
    cols = state.shape[1]
    plane = np.zeros_like(target)
    for c in range(cols):
        plane[:, :, 1:] = plane[:, :, :-1].copy()
        plane[:, :, 0] = target[:, :, cols - 1 - c]
    _deposit(state, plane)
    return state, cols


def read_plane(state: ArrayState, source="shared", b: int | None = 0) -> np.ndarray:
    """``source`` is ``"shared"`` or a GPR index. ``b=None`` returns the whole stack."""
    if source == "shared":
        data = state.shared
    elif isinstance(source, int) and 0 <= source < isa.GPR_COUNT:
        data = state.gpr[source]
    else:
        raise ValueError(f"unknown plane source {source!r}")
    data = data.astype(np.uint16)
    return data if b is None else data[b]


def run_batch(config: ArrayConfig, images, max_cycles: int = 100_000,
              load: str = "flat", result_reg: int = 3, engine: str = "vector"):
    """Run one independent array per image. Returns ``(result_stack, stats)``."""
    images = as_plane(images)
    if images.ndim == 2:
        images = images[None]
    state = init_array(config, batch=images.shape[0])
    load_cycles = 0
    if load == "wave":
        _, load_cycles = load_image_wave(state, images)
    elif load == "flat":
        load_image_flat(state, images)
    else:
        raise ValueError(f"unknown load mode {load!r}")
    state, stats = run(state, max_cycles, engine=engine)
    stats.load_cycles = load_cycles
    return read_plane(state, result_reg, b=None), stats


# ---------------------------------------------------------------------------
# fovea

def fovea_origins(size: int, window: int, halo: int) -> list[int]:
    """Window origins along one axis so that interiors tile ``[halo, size-halo)``."""
    step_len = window - 2 * halo
    if step_len <= 0:
        raise ValueError("window step must be positive (halo too large)")
    n = max(1, math.ceil((size - 2 * halo) / step_len))
    return [min(i * step_len, size - window) for i in range(n)]


def run_fovea(img, config: ArrayConfig, halo: int, max_cycles: int = 100_000,
              result_reg: int = 3):
    """Sweep a grid-sized window over a larger image and stitch the results.

    Each window keeps its interior (``halo`` PEs trimmed on every side), except
    where the window touches the image border: there the array's own boundary
    policy stands in for the missing pixels and the edge rows/columns are kept.
    """
    img = as_plane(img)
    if img.ndim != 2:
        raise ValueError("run_fovea takes a single image")
    rows, cols = config.rows, config.cols
    height, width = img.shape
    if height < rows or width < cols:
        raise ValueError(f"image {height}x{width} smaller than grid {rows}x{cols}")
    if not 0 <= 2 * halo < min(rows, cols):
        raise ValueError(f"halo {halo} too large for a {rows}x{cols} grid")

    oys = fovea_origins(height, rows, halo)
    oxs = fovea_origins(width, cols, halo)
    windows = [(oy, ox) for oy in oys for ox in oxs]
    stack = np.stack([img[oy:oy + rows, ox:ox + cols] for oy, ox in windows])

    state = init_array(config, batch=len(windows))
    _, wave = load_image_wave(state, stack)
    state, stats = run(state, max_cycles)
    results = read_plane(state, result_reg, b=None)

    out = np.zeros_like(img)
    for (oy, ox), res in zip(windows, results):
        y0 = 0 if oy == 0 else halo
        y1 = rows if oy + rows == height else rows - halo
        x0 = 0 if ox == 0 else halo
        x1 = cols if ox + cols == width else cols - halo
        out[oy + y0:oy + y1, ox + x0:ox + x1] = res[y0:y1, x0:x1]

    # windows run one after another on the physical array
    stats.cycles = int(state.batch_cycles.sum())
    stats.load_cycles = wave * len(windows)
    return out, stats
