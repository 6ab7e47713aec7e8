import numpy as np

from triview.config import PipelineConfig
from triview.depth import score_hypotheses, regress_depth, CostVolume
from triview.pyramid import build_pyramid
from triview.scene import render
from triview.sweep import coarse_hypotheses
from scratch_probe import downward_setup


def coarse_curve(spec, sources, target, level=6, beta=10.0):
    views = [render(spec, p) for p in sources]
    pyramids = [build_pyramid(v[0], v[2]) for v in views]
    hyps = coarse_hypotheses()
    intr = target.intrinsics.scaled(level)
    shape = (intr.height, intr.width)
    planes = np.stack([hyps.depth_plane(k, shape) for k in range(hyps.count)])
    scores, validity = score_hypotheses(pyramids, sources, target, level, planes)
    vol = CostVolume(level=level, scores=scores, validity=validity)
    depth, conf = regress_depth(vol, hyps, beta)
    return hyps, scores, validity, depth


for label, kwargs in [
    ("base 0.85/0.35 cell0.3", {}),
    ("bright 0.95/0.50", dict(ca=(0.95, 0.95, 0.95), cb=(0.5, 0.5, 0.5))),
    ("dark-contrast 0.95/0.15", dict(ca=(0.95, 0.95, 0.95), cb=(0.15, 0.15, 0.15))),
    ("cell 0.6", dict(cell=0.6)),
    ("bigger quad half=1.6", dict(half=1.6)),
    ("wide ring=1.2", dict(ring=1.2)),
]:
    spec, sources, target = downward_setup(**kwargs)
    hyps, scores, validity, depth = coarse_curve(spec, sources, target)
    i, j = 2, 2
    print(f"--- {label}")
    print("  d:", np.round(hyps.shared[::4], 2))
    print("  s(2,2):", np.round(scores[::4, i, j], 3))
    print("  v(2,2):", np.round(validity[::4, i, j], 2))
    k_true = np.argmin(np.abs(hyps.shared - 3.0))
    print(f"  score@3.0={scores[k_true, i, j]:.3f} max@{hyps.shared[np.argmax(scores[:, i, j])]:.2f}")
    print("  regressed center:", np.round(depth.values[1:3, 1:3].ravel(), 3))
