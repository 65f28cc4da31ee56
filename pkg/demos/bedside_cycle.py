"""
One night, start to finish
==========================

The person gets up, the robot drives its nightstand to the bedside, the
person opens the door, spins a tray, closes the door with a touch, and the
robot goes home. Prints a compact timeline of the event log.

Run:  python demos/bedside_cycle.py [scenario.scn] [seed]
"""

import sys
from pathlib import Path

from bedside import orchestrator

here = Path(__file__).resolve().parent
path = Path(sys.argv[1]) if len(sys.argv) > 1 else here.parent / "scenarios" / "getup.scn"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 7

scene, script, expect = orchestrator.load_scenario(path)
log = orchestrator.run_scenario(scene, script, seed=seed)

# the per-tick pose and robot records are too chatty for a timeline
quiet = {"pose", "robot", "frame_sent", "frame_delivered"}
for t, cat, detail in log.records:
    if cat not in quiet:
        print(f"{t:8.2f}  {cat:<12} {detail}")

sent = len(log.where("frame_sent"))
print(f"\n{len(log)} log records, {sent} radio frames")
for r in orchestrator.check_assertions(log, expect):
    print("PASS" if r.passed else "FAIL", r.name, "-", r.detail)
