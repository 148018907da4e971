"""Per-pixel energy, race-to-sleep frame power and area for a few array sizes.

    python3 scripts/energy_summary.py [--cycles 54] [--frame-rate 30]
"""
import argparse

from meshtta import energy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cycles", type=int, default=54, help="cycles per frame (default: LBP)")
    ap.add_argument("--frame-rate", type=float, default=30.0)
    ap.add_argument("--freq", type=float, default=10e6)
    args = ap.parse_args()

    print(f"energy per pixel, {args.cycles} cycles at {args.freq / 1e6:g} MHz")
    for name, corner in energy.CORNERS.items():
        e = energy.program_energy(corner, args.freq, args.cycles, 1)
        print(f"  {name:<10} {e * 1e9:8.4f} nJ")
    fpga = energy.fpga_program_energy(args.cycles, 1)
    print(f"  {'fpga':<10} {fpga * 1e9:8.4f} nJ at {energy.FPGA.clock_hz / 1e6:g} MHz")

    print(f"\naverage array power at {args.frame_rate:g} fps")
    print(f"  {'corner':<10}{'dims':>9}{'clock-gated mW':>16}{'power-gated mW':>16}"
          f"{'area mm2':>10}")
    for dims in ((10, 11), (64, 64), (128, 128)):
        n = dims[0] * dims[1]
        for name, corner in energy.CORNERS.items():
            p = [energy.average_frame_power(
                     corner, energy.DutyCycle(args.cycles, args.freq, args.frame_rate, mode), n)
                 for mode in (energy.SleepMode.CLOCK_GATED, energy.SleepMode.POWER_GATED)]
            print(f"  {name:<10}{dims[0]:>4}x{dims[1]:<4}{p[0] * 1e3:16.4f}{p[1] * 1e3:16.6f}"
                  f"{energy.area(*dims):10.2f}")

    rep = energy.fpga_report(10, 11)
    print(f"\nfpga 10x11: static {rep['static_mw']} mW, dynamic {rep['dynamic_mw']} mW, "
          f"sum {rep['total_mw']} mW, printed total {rep['reported_total_mw']} mW")


if __name__ == "__main__":
    main()
