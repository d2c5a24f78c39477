import struct
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from quadtext.config import RunConfig, dump_config, load_config
from quadtext.errors import FormatError, InvalidInputError, ParseError
from quadtext.evaluation import evaluate, evaluate_many
from quadtext.formats import (
    detections_from_jsonl,
    detections_to_jsonl,
    format_icdar_gt,
    parse_icdar_gt,
    read_detections,
    read_icdar_gt,
    read_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
    write_detections,
    write_tensor,
)
from quadtext.geometry import Quad
from quadtext.postprocess import ANCHOR, PIXEL, Detection
from quadtext.svg import render_svg
from quadtext.synthetic import random_convex_quad
from quadtext.targets import GroundTruth


def sq(x0, y0, s=10):
    return Quad.from_rect((x0, y0, x0 + s, y0 + s))


# -- tensor files ---------------------------------------------------------------------


def test_tensor_roundtrip_bitwise(tmp_path):
    arr = np.random.default_rng(0).normal(size=(5, 7, 3)).astype(np.float32)
    path = tmp_path / "t.pxat"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.dtype == np.float32 and back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


def test_tensor_header_layout():
    buf = tensor_to_bytes(np.zeros((2, 3), dtype=np.float32))
    assert buf[:4] == b"PXAT"
    assert struct.unpack("<HHI", buf[4:12]) == (1, 1, 2)
    assert struct.unpack("<II", buf[12:20]) == (2, 3)
    assert len(buf) == 12 + 4 * 2 + 4 * 6


@settings(max_examples=50)
@given(arrays(np.float32, st.lists(st.integers(0, 5), min_size=1, max_size=4).map(tuple),
              elements=st.floats(width=32, allow_nan=False)))
def test_tensor_roundtrip_property(arr):
    back = tensor_from_bytes(tensor_to_bytes(arr))
    assert back.shape == arr.shape and back.tobytes() == arr.tobytes()


def test_tensor_rejects_bad_input():
    with pytest.raises(FormatError):
        tensor_to_bytes(np.float32(1.0))
    good = tensor_to_bytes(np.ones((4, 4), dtype=np.float32))
    with pytest.raises(FormatError):
        tensor_from_bytes(b"XXXX" + good[4:])
    with pytest.raises(FormatError):
        tensor_from_bytes(good[:-1])
    with pytest.raises(FormatError):
        tensor_from_bytes(good + b"\0")
    with pytest.raises(FormatError):
        tensor_from_bytes(good[:4] + struct.pack("<HHI", 2, 1, 2) + good[12:])
    with pytest.raises(FormatError):
        tensor_from_bytes(good[:4] + struct.pack("<HHI", 1, 7, 2) + good[12:])
    huge = b"PXAT" + struct.pack("<HHI", 1, 1, 3) + struct.pack("<III", 2**32 - 1, 2**32 - 1, 2**32 - 1)
    with pytest.raises(FormatError):
        tensor_from_bytes(huge)
    with pytest.raises(FormatError):
        tensor_from_bytes(b"PX")


# -- detections -----------------------------------------------------------------------


def test_detections_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    dets = [Detection(random_convex_quad(rng, (50, 50), 20), float(rng.random()), PIXEL if k % 2 else ANCHOR)
            for k in range(30)]
    assert detections_from_jsonl(detections_to_jsonl(dets)) == dets
    path = tmp_path / "d.jsonl"
    write_detections(path, dets)
    assert read_detections(path) == dets
    assert detections_from_jsonl("") == []


def test_detections_parse_error_line_number():
    good = detections_to_jsonl([Detection(sq(0, 0), 0.5, PIXEL)])
    with pytest.raises(ParseError, match="line 2"):
        detections_from_jsonl(good + "{not json}\n")
    with pytest.raises(ParseError, match="line 1"):
        detections_from_jsonl('{"quad": [0, 0, 1, 0], "score": 1, "source": "pixel"}\n')


# -- ICDAR ground truth ----------------------------------------------------------------


def test_icdar_examples():
    gt = parse_icdar_gt("0,0,10,0,10,10,0,10,hello\n")
    assert len(gt) == 1 and gt.care == (True,)
    assert gt.quads[0] == sq(0, 0)
    gt = parse_icdar_gt("0,0,10,0,10,10,0,10,###\n20,20,30,20,30,30,20,30,a,b\n")
    assert gt.care == (False, True)
    assert len(parse_icdar_gt("")) == 0


def test_icdar_bom_and_crlf(tmp_path):
    path = tmp_path / "gt.txt"
    path.write_bytes("﻿0,0,10,0,10,10,0,10,x\r\n\r\n".encode("utf-8"))
    gt = read_icdar_gt(path)
    assert len(gt) == 1


def test_icdar_errors_carry_line():
    with pytest.raises(ParseError, match="line 2"):
        parse_icdar_gt("0,0,10,0,10,10,0,10,a\n0,0,10,0,10\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_icdar_gt("a,b,c,d,e,f,g,h,i\n")


def test_icdar_format_roundtrip():
    gt = GroundTruth.from_quads([sq(0, 0), sq(20, 5)], [True, False])
    back = parse_icdar_gt(format_icdar_gt(gt))
    assert back.quads == gt.quads and back.care == gt.care


# -- evaluation ---------------------------------------------------------------------------


def test_evaluate_examples():
    quads = [sq(0, 0), sq(20, 0), sq(40, 0)]
    gt = GroundTruth.from_quads(quads)
    m = evaluate([Detection(q, 0.9, PIXEL) for q in quads], gt)
    assert (m.precision, m.recall, m.f_measure) == (1.0, 1.0, 1.0)
    m = evaluate([], gt)
    assert (m.precision, m.recall, m.f_measure) == (0.0, 0.0, 0.0)
    dets = [Detection(quads[0], 0.9, PIXEL), Detection(quads[1], 0.8, PIXEL), Detection(sq(100, 100), 0.7, PIXEL)]
    m = evaluate(dets, gt)
    assert m.precision == pytest.approx(2 / 3) and m.recall == pytest.approx(2 / 3)
    assert m.f_measure == pytest.approx(2 / 3)


def test_evaluate_dont_care_excluded():
    gt = GroundTruth.from_quads([sq(0, 0), sq(20, 0)], [True, False])
    dets = [Detection(sq(0, 0), 0.9, PIXEL), Detection(sq(20, 0), 0.9, PIXEL)]
    m = evaluate(dets, gt)
    assert m.num_care_gt == 1 and m.num_detections == 1
    assert (m.precision, m.recall) == (1.0, 1.0)


def test_evaluate_one_to_one():
    gt = GroundTruth.from_quads([sq(0, 0)])
    m = evaluate([Detection(sq(0, 0), 0.9, PIXEL), Detection(sq(0, 0), 0.8, ANCHOR)], gt)
    assert m.true_positives == 1 and m.precision == 0.5


def test_evaluate_permutation_invariant():
    rng = np.random.default_rng(2)
    quads = [sq(30 * k, 0, 20) for k in range(6)]
    gt = GroundTruth.from_quads(quads)
    dets = [Detection(Quad(q.points + rng.normal(0, 2, (4, 2))), float(rng.random()), PIXEL) for q in quads]
    dets += [Detection(random_convex_quad(rng, (90, 10), 15), float(rng.random()), PIXEL) for _ in range(4)]
    base = evaluate(dets, gt)
    for _ in range(5):
        perm = rng.permutation(len(dets))
        m = evaluate([dets[i] for i in perm], gt)
        assert (m.precision, m.recall, m.true_positives) == (base.precision, base.recall, base.true_positives)


def test_evaluate_many_pools_counts():
    gt = GroundTruth.from_quads([sq(0, 0), sq(20, 0)])
    m = evaluate_many([([Detection(sq(0, 0), 1, PIXEL)], gt), ([], gt)])
    assert m.true_positives == 1 and m.num_care_gt == 4 and m.precision == 1.0 and m.recall == 0.25


# -- svg and config -----------------------------------------------------------------------


def test_svg_is_well_formed():
    gt = GroundTruth.from_quads([sq(0, 0), sq(20, 0)], [True, False])
    dets = [Detection(sq(0, 0), 0.9, PIXEL), Detection(sq(40, 0), 1.5, ANCHOR)]
    svg = render_svg(dets, gt, (64, 64))
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polygon")) == 4


def test_config_roundtrip(tmp_path):
    cfg = RunConfig().with_input_size((320, 256))
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    assert load_config(None) == RunConfig()


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidInputError):
        RunConfig.from_dict({"bogus": 1})
