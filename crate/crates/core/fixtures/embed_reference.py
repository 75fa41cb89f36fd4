"""Reference embedding for fixtures/embed_k3.lfw on the probe image.

Writes embed_k3_probe.txt next to this file. Needs numpy.
"""
import pathlib
import struct

import numpy as np

here = pathlib.Path(__file__).parent
raw = (here / "embed_k3.lfw").read_bytes()
assert raw[:4] == b"LFW1"
(n,) = struct.unpack_from("<I", raw, 4)
dims = [struct.unpack_from("<II", raw, 8 + 8 * i) for i in range(n)]
off = 8 + 8 * n
stages = []
for cin, cout in dims:
    w = np.frombuffer(raw, "<f8", cout * cin * 9, off).reshape(cout, cin, 3, 3)
    off += w.nbytes
    b = np.frombuffer(raw, "<f8", cout, off)
    off += b.nbytes
    stages.append((w, b))
assert off == len(raw)

r, c, k = np.meshgrid(np.arange(20), np.arange(24), np.arange(3), indexing="ij")
x = ((r * 37 + c * 11 + k * 71) % 256).astype(np.float64) / 255.0
x = x.transpose(2, 0, 1)

for w, b in stages:
    cin, h, wd = x.shape
    p = np.zeros((cin, h + 2, wd + 2))
    p[:, 1:-1, 1:-1] = x
    oh, ow = (h - 1) // 2 + 1, (wd - 1) // 2 + 1
    out = np.zeros((w.shape[0], oh, ow))
    for o in range(w.shape[0]):
        for y in range(oh):
            for xx in range(ow):
                out[o, y, xx] = b[o] + np.sum(w[o] * p[:, 2 * y:2 * y + 3, 2 * xx:2 * xx + 3])
    x = np.maximum(out, 0.0)

emb = x.mean(axis=(1, 2))
(here / "embed_k3_probe.txt").write_text("\n".join(repr(float(v)) for v in emb) + "\n")
