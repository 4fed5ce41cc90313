#!/usr/bin/env python3
"""Recompute DP20 and AUC from prediction and ground-truth files by brute force.

Usage: eval_bruteforce.py PRED GT [PRED GT ...]

PRED is a per-frame CSV (frame,x,y,w,h,...), GT has one "x,y,w,h" line per
frame (or is a sequence directory holding groundtruth.txt). Prints one
"DP20=<v>,AUC=<v>" line per pair and a final line with the unweighted means.
"""

import math
import os
import sys


def read_gt(path):
    if os.path.isdir(path):
        path = os.path.join(path, "groundtruth.txt")
    boxes = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                boxes.append(tuple(float(v) for v in line.split(",")))
    return boxes


def read_pred(path, n, first):
    rows = {}
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line or (i == 0 and line.startswith("frame")):
                continue
            cells = line.split(",")
            rows[int(cells[0])] = tuple(float(v) for v in cells[1:5])
    rows.setdefault(1, first)
    return [rows[t] for t in range(1, n + 1)]


def overlap(a, b):
    # area of the intersection rectangle, written out corner by corner
    left, right = max(a[0], b[0]), min(a[0] + a[2], b[0] + b[2])
    top, bottom = max(a[1], b[1]), min(a[1] + a[3], b[1] + b[3])
    inter = max(0.0, right - left) * max(0.0, bottom - top)
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def center_error(a, b):
    dx = (a[0] + a[2] / 2) - (b[0] + b[2] / 2)
    dy = (a[1] + a[3] / 2) - (b[1] + b[3] / 2)
    return math.sqrt(dx * dx + dy * dy)


def score(pred, gt):
    n = len(gt)
    within = sum(1 for p, g in zip(pred, gt) if center_error(p, g) <= 20)
    # AUC as the mean over thresholds i/20 of the success fraction,
    # counted per frame: how many thresholds does this frame clear
    cleared = 0
    for p, g in zip(pred, gt):
        o = overlap(p, g)
        cleared += sum(1 for i in range(21) if o > i / 20)
    return within / n, cleared / (21 * n)


def main(argv):
    if len(argv) < 2 or len(argv) % 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    results = []
    for pred_path, gt_path in zip(argv[0::2], argv[1::2]):
        gt = read_gt(gt_path)
        pred = read_pred(pred_path, len(gt), gt[0])
        dp, auc = score(pred, gt)
        results.append((dp, auc))
        print(f"DP20={dp!r},AUC={auc!r}")
    dp = sum(r[0] for r in results) / len(results)
    auc = sum(r[1] for r in results) / len(results)
    print(f"DP20={dp!r},AUC={auc!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
