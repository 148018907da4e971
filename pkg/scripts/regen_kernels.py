"""Rewrite the generated kernel listings under src/meshtta/programs/.

lbp3x3.tta is hand scheduled and left alone.
"""
from pathlib import Path

from meshtta.kernels import GENERATED

OUT = Path(__file__).resolve().parents[1] / "src" / "meshtta" / "programs"

if __name__ == "__main__":
    for name, make in GENERATED.items():
        path = OUT / f"{name}.tta"
        path.write_text(make())
        print(f"wrote {path.relative_to(OUT.parents[2])}")
