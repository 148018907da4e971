"""Reference implementations of the shipped kernels.

These mirror the hardware exactly: unsigned 16-bit words, arithmetic modulo
2**16, the same neighbour order and the same boundary resolution as the array.
Neighbours are gathered through explicitly resolved coordinates, which keeps
them independent of the simulator's padding-based neighbour planes.
All functions accept a single ``(H, W)`` image or a ``(B, H, W)`` stack.
"""
from __future__ import annotations

import numpy as np

from .array import Boundary
from .kernels import Kernel3x3

WORD = 0xFFFF

# (dx, dy), north first then clockwise; bit k of an LBP code is direction k.
NEIGHBOURS = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))

POOL_OFFSETS = {
    2: ((0, 0), (1, 0), (0, 1), (1, 1)),
    3: ((0, 0),) + NEIGHBOURS,
}


def shifted(img: np.ndarray, dx: int, dy: int, boundary=Boundary.ZERO) -> np.ndarray:
    """``out[..., y, x] = img[..., y+dy, x+dx]`` with off-image reads resolved."""
    boundary = Boundary(boundary)
    h, w = img.shape[-2:]
    ys = np.arange(h)[:, None] + dy
    xs = np.arange(w)[None, :] + dx
    inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    if boundary is Boundary.WRAP:
        ys, xs = ys % h, xs % w
    else:
        ys, xs = np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1)
    out = img[..., ys, xs]
    if boundary is Boundary.ZERO:
        out = np.where(inside, out, 0)
    return out


def lbp_ref(img, boundary=Boundary.ZERO) -> np.ndarray:
    """8-bit code per pixel: bit k set iff neighbour k is strictly greater."""
    img = np.asarray(img, dtype=np.int64)
    code = np.zeros_like(img)
    for k, (dx, dy) in enumerate(NEIGHBOURS):
        code |= (shifted(img, dx, dy, boundary) > img).astype(np.int64) << k
    return code.astype(np.uint16)


def conv3x3_ref(img, kernel: Kernel3x3, boundary=Boundary.ZERO) -> np.ndarray:
    """Weighted neighbourhood sum mod 2**16, then logical right shift."""
    img = np.asarray(img, dtype=np.int64)
    acc = np.zeros_like(img)
    for r in range(3):
        for c in range(3):
            wgt = kernel.weights[r][c]
            if wgt:
                acc += wgt * shifted(img, c - 1, r - 1, boundary)
    return ((acc & WORD) >> kernel.post_shift).astype(np.uint16)


def maxpool_ref(img, window: int, stride: int, boundary=Boundary.ZERO) -> np.ndarray:
    """Window max at PEs whose x and y are multiples of ``stride``, zero elsewhere.

    Window 2 covers the PE and its E, S and SE neighbours; window 3 the PE and
    all eight neighbours.
    """
    if window not in POOL_OFFSETS:
        raise ValueError("window must be 2 or 3")
    if stride < 1 or stride & (stride - 1):
        raise ValueError("stride must be a power of two")
    img = np.asarray(img, dtype=np.int64)
    best = np.max([shifted(img, dx, dy, boundary) for dx, dy in POOL_OFFSETS[window]], axis=0)
    h, w = img.shape[-2:]
    active = (np.arange(h)[:, None] % stride == 0) & (np.arange(w)[None, :] % stride == 0)
    return np.where(active, best, 0).astype(np.uint16)
