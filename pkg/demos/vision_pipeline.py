"""
From a ceiling-camera frame to a roadmap
========================================

Render the standard bedroom, find the robot by background subtraction,
segment the furniture with mean-shift, then build the distance field, the
skeleton and the roadmap graph. Every intermediate image is written as a PGM
so it can be opened in any image viewer.

Run:  python demos/vision_pipeline.py [output_dir]
"""

import sys
from pathlib import Path

import numpy as np

from bedside.gridworld import render_topdown, standard_scene
from bedside.pgm import write_pgm
from bedside import vision

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

# the camera sees the room twice: once empty, once with the robot on its dock
scene = standard_scene()
frame = render_topdown(scene, noise_sigma=2.0, seed=1)
empty = render_topdown(scene.with_robot(None), noise_sigma=2.0, seed=2)
(out / "frame.pgm").write_bytes(write_pgm(frame))

moving = vision.background_subtract(frame, empty)
print("robot pixels:", int(moving.sum()), "at cell", vision.locate_robot(moving))
(out / "foreground.pgm").write_bytes(write_pgm(np.where(moving, 255, 0).astype(np.uint8)))

# mean-shift groups pixels by position and brightness; the brightest mode is floor
labels = vision.mean_shift_segment(frame)
print("segments:", int(labels.max()) + 1)
obstacles = vision.obstacle_mask(labels, moving)

# 3-4 chamfer distance, in thirds of a cell
field = vision.chamfer_transform(obstacles)
print("largest clearance: %.1f cells" % (field.max() / 3))
(out / "field.pgm").write_bytes(write_pgm(vision.field_to_pgm16(field), 65535))

# ridges of the distance field, thinned to one pixel, far enough from furniture
clearance = vision.default_min_clearance(scene.radius_cells)
skel = vision.skeletonize(field, ~obstacles, clearance)
(out / "skeleton.pgm").write_bytes(write_pgm(np.where(skel, 255, 0).astype(np.uint8)))

roadmap = vision.build_roadmap(skel)
print("roadmap: %d nodes, %d edges" % (len(roadmap.nodes), len(roadmap.edges)))
for e in roadmap.edges[:5]:
    print("  ", roadmap.nodes[e.u], "->", roadmap.nodes[e.v], "length", e.length)

# ascii view: '#' furniture and walls, 'o' skeleton, 'R' robot
art = np.full(frame.shape, ".", dtype="<U1")
art[obstacles] = "#"
art[skel] = "o"
art[moving] = "R"
print("\n".join("".join(row) for row in art[::2, ::1]))
print("images written to", out.resolve())
