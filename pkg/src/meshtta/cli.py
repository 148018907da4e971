"""Command line: ``meshtta {asm,disasm,run,energy}``.

Exit codes: 0 ok, 1 usage or parse error, 2 runtime error (dimension
mismatch, cycle cutoff), 3 oracle mismatch under ``--check``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import energy, isa, kernels, oracle, pgm
from .array import (ArrayConfig, Boundary, LockstepError, init_array, load_image_flat,
                    load_image_wave, read_plane, run, run_fovea)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(text: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None
    if r < 1 or c < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return r, c


def _weights(text: str) -> list[int]:
    try:
        values = [int(v, 0) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad weight list {text!r}") from None
    if len(values) != 9:
        raise argparse.ArgumentTypeError("conv3x3 needs nine comma-separated weights")
    return values


def _emit(record: dict, path: str | None) -> None:
    text = json.dumps(record, sort_keys=True)
    print(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


# ---------------------------------------------------------------------------
# asm / disasm

def cmd_asm(args) -> int:
    with open(args.input) as fh:
        source = fh.read()
    try:
        program = isa.parse_program(source, name=os.path.basename(args.input))
    except isa.AsmError as e:
        print(f"{args.input}: {e}", file=sys.stderr)
        return EXIT_USAGE
    with open(args.output, "wb") as fh:
        isa.write_binary(program, fh)
    print(f"{len(program)} instructions")
    return EXIT_OK


def cmd_disasm(args) -> int:
    with open(args.input, "rb") as fh:
        try:
            program = isa.read_binary(fh)
        except isa.MalformedInstruction as e:
            print(f"{args.input}: {e}", file=sys.stderr)
            return EXIT_USAGE
    text = isa.disassemble(program)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def _load_program(args) -> isa.Program:
    if bool(args.kernel) == bool(args.program):
        raise UsageError("give exactly one of --kernel or --program")
    if args.kernel:
        try:
            return kernels.kernel_by_name(args.kernel, weights=args.weights,
                                          post_shift=args.post_shift,
                                          window=args.window, stride=args.stride).program
        except KeyError:
            raise UsageError(f"unknown kernel {args.kernel!r}; "
                             f"known: {', '.join(kernels.KERNEL_NAMES)}") from None
        except ValueError as e:
            raise UsageError(str(e)) from None
    if args.program.endswith(".tta"):
        with open(args.program) as fh:
            return isa.parse_program(fh.read(), name=args.program)
    with open(args.program, "rb") as fh:
        return isa.read_binary(fh, name=args.program)


def _reference(args, img: np.ndarray, boundary: Boundary) -> np.ndarray:
    name = args.kernel
    if name == "lbp3x3":
        return oracle.lbp_ref(img, boundary)
    if name == "maxpool":
        return oracle.maxpool_ref(img, args.window, args.stride, boundary)
    if name == "conv3x3":
        k = kernels.Kernel3x3.from_flat(args.weights, args.post_shift)
    else:
        k = kernels.NAMED_CONV[name]
    return oracle.conv3x3_ref(img, k, boundary)


def cmd_run(args) -> int:
    program = _load_program(args)
    boundary = Boundary(args.boundary)
    trace = args.trace or os.environ.get("MESHTTA_TRACE") == "1"
    if args.check and not args.kernel:
        raise UsageError("--check needs a named --kernel")

    if args.image:
        try:
            img = pgm.read_pgm(args.image)
        except ValueError as e:
            raise UsageError(f"{args.image}: {e}") from None
    else:
        if not args.grid:
            raise UsageError("give --image or --grid")
        img = np.random.default_rng(args.seed).integers(0, 256, args.grid).astype(np.uint16)
    rows, cols = args.grid or img.shape
    config = ArrayConfig.single(rows, cols, program, boundary, trace_enabled=trace)
    height, width = img.shape

    record = {"program": program.name or args.kernel, "grid": f"{rows}x{cols}",
              "image": f"{height}x{width}", "boundary": boundary.value}
    trace_lines = []
    if (height, width) == (rows, cols):
        state = init_array(config)
        if args.load == "wave":
            _, load_cycles = load_image_wave(state, img)
        else:
            load_image_flat(state, img)
            load_cycles = 0
        state, stats = run(state, args.max_cycles,
                           trace_sink=trace_lines.append if trace else None)
        stats.load_cycles = load_cycles
        result = read_plane(state, args.result_reg)
        record["load"] = args.load
    elif height >= rows and width >= cols:
        if trace:
            raise UsageError("tracing is not available for fovea runs")
        try:
            result, stats = run_fovea(img, config, args.halo, args.max_cycles, args.result_reg)
        except ValueError as e:
            raise RuntimeFailure(str(e)) from None
        record["load"] = "wave"
        record["halo"] = args.halo
    else:
        raise RuntimeFailure(f"image {height}x{width} is smaller than grid {rows}x{cols}")

    record.update(stats.as_dict())
    if trace:
        text = "".join(f"{e}\n" for e in trace_lines)
        if args.trace_out:
            with open(args.trace_out, "w") as fh:
                fh.write(text)
        else:
            sys.stderr.write(text)

    if args.corner:
        n_pe = rows * cols
        if args.corner == "fpga":
            freq = args.freq or energy.FPGA.clock_hz
            joules = energy.fpga_program_energy(stats.cycles, n_pe, freq)
        else:
            freq = args.freq or energy.ANCHOR_HZ
            joules = energy.program_energy(energy.get_corner(args.corner), freq,
                                           stats.cycles, n_pe)
        record.update(corner=args.corner, freq_hz=freq, energy_j=joules,
                      energy_per_pixel_j=joules / (height * width))

    if args.output:
        pgm.write_pgm(args.output, result)

    status = EXIT_OK
    if args.check:
        expected = _reference(args, img, boundary)
        region = (slice(None), slice(None))
        fovea = (height, width) != (rows, cols)
        if fovea and boundary is Boundary.WRAP:
            # windows wrap around themselves, not around the image
            region = (slice(1, -1), slice(1, -1))
            record["check_region"] = "interior"
        mismatches = int((result[region] != expected[region]).sum())
        record["check"] = "pass" if mismatches == 0 else "fail"
        record["mismatches"] = mismatches
        if mismatches:
            status = EXIT_MISMATCH
    if stats.cutoff:
        status = EXIT_RUNTIME
    _emit(record, args.stats_out)
    if stats.cutoff:
        print(f"cycle limit {args.max_cycles} reached before all PEs halted", file=sys.stderr)
    return status


# ---------------------------------------------------------------------------
# energy

def cmd_energy(args) -> int:
    rows, cols = args.dims
    n_pe = rows * cols
    rec: dict = {"corner": args.corner, "dims": f"{rows}x{cols}", "pes": n_pe,
                 "cycles": args.cycles}
    if args.corner == "fpga":
        if args.frame_rate:
            raise UsageError("frame-rate modelling needs an ASIC corner")
        freq = args.freq or energy.FPGA.clock_hz
        joules = energy.fpga_program_energy(args.cycles, n_pe, freq)
        rec.update(freq_hz=freq,
                   pe_dynamic_mw=energy.FPGA.core_dynamic_mw * freq / energy.FPGA.clock_hz)
        rec.update({f"fpga_{k}": v for k, v in energy.fpga_report(rows, cols).items()})
    else:
        try:
            corner = energy.get_corner(args.corner)
        except KeyError as e:
            raise UsageError(e.args[0]) from None
        freq = args.freq or energy.ANCHOR_HZ
        try:
            s, d = energy.static_power(corner, freq), energy.dynamic_power(corner, freq)
        except ValueError as e:
            raise UsageError(str(e)) from None
        joules = energy.program_energy(corner, freq, args.cycles, n_pe)
        rec.update(freq_hz=freq, pe_static_uw=s * 1e6, pe_dynamic_uw=d * 1e6,
                   pe_total_uw=(s + d) * 1e6, array_power_mw=n_pe * (s + d) * 1e3)
        if args.frame_rate:
            duty = energy.DutyCycle(args.cycles, freq, args.frame_rate,
                                    energy.SleepMode(args.sleep))
            try:
                p = energy.average_frame_power(corner, duty, n_pe)
            except ValueError as e:
                raise RuntimeFailure(str(e)) from None
            rec.update(frame_rate=args.frame_rate, sleep=args.sleep,
                       active_fraction=duty.active_fraction, average_power_mw=p * 1e3)
    area = energy.area(rows, cols)
    rec.update(run_time_us=args.cycles / freq * 1e6, energy_nj=joules * 1e9,
               energy_per_pixel_nj=joules * 1e9 / n_pe, area_mm2=area,
               side_mm=area ** 0.5)
    if args.json:
        print(json.dumps(rec, sort_keys=True))
    else:
        for k, v in rec.items():
            print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="meshtta", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("asm", help="assemble .tta text into a TTAM binary")
    a.add_argument("input")
    a.add_argument("output")
    a.set_defaults(func=cmd_asm)

    d = sub.add_parser("disasm", help="disassemble a TTAM binary")
    d.add_argument("input")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_disasm)

    r = sub.add_parser("run", help="run a program on an image")
    r.add_argument("--kernel", help=f"built-in kernel: {', '.join(kernels.KERNEL_NAMES)}")
    r.add_argument("--program", help=".tta source or TTAM binary")
    r.add_argument("--weights", type=_weights, help="conv3x3 weights, row-major, comma separated")
    r.add_argument("--post-shift", type=int, default=0)
    r.add_argument("--window", type=int, choices=(2, 3), default=3)
    r.add_argument("--stride", type=int, default=2)
    r.add_argument("--image", help="input PGM (P2 or P5)")
    r.add_argument("--seed", type=int, default=0, help="random image seed when --image is absent")
    r.add_argument("--grid", type=_dims, help="ROWSxCOLS (default: image size)")
    r.add_argument("--boundary", choices=[b.value for b in Boundary], default="zero")
    r.add_argument("--load", choices=("flat", "wave"), default="flat")
    r.add_argument("--halo", type=int, default=1, help="fovea window overlap")
    r.add_argument("--max-cycles", type=int, default=100_000)
    r.add_argument("--result-reg", type=int, default=kernels.RESULT_REG)
    r.add_argument("--trace", action="store_true", help="also enabled by MESHTTA_TRACE=1")
    r.add_argument("--trace-out", help="trace file (default: stderr)")
    r.add_argument("--output", "-o", help="result plane as PGM")
    r.add_argument("--stats-out", help="also write the stats record here")
    r.add_argument("--check", action="store_true", help="compare against the scalar oracle")
    r.add_argument("--corner", help="add energy fields: ASIC corner name or 'fpga'")
    r.add_argument("--freq", type=float)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("energy", help="power, energy and area report")
    e.add_argument("--corner", required=True,
                   help=f"{', '.join(energy.CORNERS)} or fpga")
    e.add_argument("--freq", type=float, help="Hz (default 10e6, or 50e6 for fpga)")
    e.add_argument("--cycles", type=int, required=True)
    e.add_argument("--dims", type=_dims, default=(1, 1))
    e.add_argument("--frame-rate", type=float)
    e.add_argument("--sleep", choices=("clock", "power"), default="clock")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_energy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, isa.AsmError, isa.MalformedInstruction) as e:
        print(f"meshtta: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as e:
        print(f"meshtta: error: {e.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"meshtta: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeFailure, LockstepError, ValueError) as e:
        print(f"meshtta: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
