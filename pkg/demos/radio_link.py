"""
The radio link in numbers
=========================

Encode a route, look at the bytes, corrupt one, and measure the delay
distribution of the simulated link.

Run:  python demos/radio_link.py
"""

import numpy as np

from bedside import netlink

route = netlink.NavigateTo(((48, 8), (40, 16), (25, 42)))
data = netlink.encode(route, seq=12)
print("frame:", netlink.hexdump(data))
print("decoded:", netlink.decode(data))

bad = bytearray(data)
bad[6] ^= 0x10
try:
    netlink.decode(bytes(bad))
except netlink.FrameError as e:
    print("corrupted frame rejected:", type(e).__name__, "-", e)

rng = np.random.default_rng(0)
for sigma in (0.0, 2.0, 5.0):
    link = netlink.LinkConfig(jitter_sigma=sigma)
    d = np.array([netlink.send(link, data, 0.0, rng).at for _ in range(10_000)])
    print(f"jitter {sigma:.0f} ms: mean {d.mean():.3f} ms, p99 {np.percentile(d, 99):.2f} ms")

far = netlink.LinkConfig(distance=150)
print("150 ft away:", netlink.send(far, data, 0.0, rng))
