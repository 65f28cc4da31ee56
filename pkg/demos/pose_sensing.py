"""
Reading a bed through its legs
==============================

Four load cells under the bed legs tell lying from sitting. We train the
Gaussian Bayes and fuzzy classifiers on 15 s of synthetic data per pose, score
them on a fresh draw, then feed a get-up stream to the transition detector.

Run:  python demos/pose_sensing.py
"""

from bedside import posesense
from bedside.posesense import PoseClass

for kind in ("bayes", "fuzzy"):
    print(f"{kind:>6} accuracy: {posesense.benchmark_accuracy(kind):.4f}")

# nominal leg forces (lbf): head-left, head-right, foot-left, foot-right
for pose, f in posesense.NOMINAL_LBF.items():
    print(f"{pose.value:>16}", f)

train = []
for k, pose in enumerate(PoseClass):
    train += [(s, pose) for s in posesense.generate_synthetic(pose, 15.0, seed=[1, k])]
model = posesense.train_bayes(train)

# ten seconds lying, then the person sits up on the edge of the bed
stream = posesense.generate_synthetic(PoseClass.Lying, 10.0, seed=5)
stream += posesense.generate_synthetic(PoseClass.Sitting, 5.0, seed=6, t0=10.0)
labels = [posesense.classify_bayes(model, s)[0] for s in stream]
events = posesense.detect_transition(labels, 5, [s.t for s in stream])
for ev in events:
    print(f"{ev.kind.value} detected at t = {ev.t:.1f} s")
