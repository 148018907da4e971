import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import loop_oracles as slow
from meshtta import oracle
from meshtta.array import Boundary
from meshtta.kernels import BOX_BLUR, SOBEL_X, Kernel3x3

BOUNDARIES = list(Boundary)
images = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda hw: arrays(np.int64, hw, elements=st.integers(0, 65535)))
kernels = st.builds(Kernel3x3.from_flat,
                    st.lists(st.integers(-300, 300), min_size=9, max_size=9)
                    .filter(any), st.integers(0, 15))


def test_single_bright_pixel_sets_one_bit_per_neighbour():
    img = np.zeros((5, 5), dtype=np.int64)
    img[2, 2] = 100
    code = oracle.lbp_ref(img)
    assert code[2, 2] == 0
    for k, (dx, dy) in enumerate(oracle.NEIGHBOURS):
        # neighbour at offset (dx, dy) sees the bright pixel in the opposite direction
        assert code[2 + dy, 2 + dx] == 1 << ((k + 4) % 8)


def test_north_only():
    img = np.full((3, 3), 5)
    img[0, 1] = 9
    assert oracle.lbp_ref(img)[1, 1] == 1


def test_uniform_and_zero():
    assert (oracle.lbp_ref(np.full((4, 4), 7)) == 0).all()
    assert (oracle.conv3x3_ref(np.zeros((4, 4)), SOBEL_X) == 0).all()


def test_identity_kernel():
    img = np.random.default_rng(0).integers(0, 65536, (5, 6))
    ident = Kernel3x3(((0, 0, 0), (0, 1, 0), (0, 0, 0)))
    for b in BOUNDARIES:
        assert (oracle.conv3x3_ref(img, ident, b) == img).all()


def test_box_blur_uniform():
    assert (oracle.conv3x3_ref(np.full((3, 3), 10), BOX_BLUR, Boundary.CLAMP) == 90).all()


def test_maxpool_ascending():
    img = np.arange(1, 17).reshape(4, 4)
    out = oracle.maxpool_ref(img, 2, 2)
    assert [out[0, 0], out[0, 2], out[2, 0], out[2, 2]] == [6, 8, 14, 16]
    assert out[1].tolist() == [0, 0, 0, 0]


def test_stack_matches_single():
    imgs = np.random.default_rng(1).integers(0, 256, (3, 5, 5))
    stacked = oracle.lbp_ref(imgs, Boundary.WRAP)
    for img, res in zip(imgs, stacked):
        assert (oracle.lbp_ref(img, Boundary.WRAP) == res).all()


@settings(max_examples=80, deadline=None)
@given(images, st.sampled_from(BOUNDARIES))
def test_lbp_agrees_with_loop_oracle(img, b):
    fast = oracle.lbp_ref(img, b)
    assert fast.tolist() == slow.lbp(img.tolist(), b.value)
    assert (fast < 256).all()


@settings(max_examples=80, deadline=None)
@given(images, kernels, st.sampled_from(BOUNDARIES))
def test_conv_agrees_with_loop_oracle(img, k, b):
    assert oracle.conv3x3_ref(img, k, b).tolist() == \
        slow.conv(img.tolist(), k.weights, k.post_shift, b.value)


@settings(max_examples=60, deadline=None)
@given(images, st.sampled_from([2, 3]), st.sampled_from([1, 2, 4]), st.sampled_from(BOUNDARIES))
def test_maxpool_agrees_with_loop_oracle(img, window, stride, b):
    assert oracle.maxpool_ref(img, window, stride, b).tolist() == \
        slow.maxpool(img.tolist(), window, stride, b.value)


def test_maxpool_argument_checks():
    with pytest.raises(ValueError):
        oracle.maxpool_ref(np.zeros((4, 4)), 4, 2)
    with pytest.raises(ValueError):
        oracle.maxpool_ref(np.zeros((4, 4)), 2, 3)
