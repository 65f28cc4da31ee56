"""Binary PGM (P5) reading and writing.

Only the binary variant is supported. Comment lines may appear anywhere in
the header; the writer emits an optional list of comment strings right after
the magic number.
"""

import numpy as np


class PGMError(ValueError):
    pass


MAX_DIM = 1 << 15


def _tokens(data: bytes):
    """Yield (token, end_offset) for the header, skipping comments."""
    i = 0
    n = len(data)
    while True:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i >= n:
            raise PGMError("truncated PGM header")
        if data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        yield data[i:j], j
        i = j


def read_pgm(data: bytes):
    """Parse a P5 image.

    Returns ``(pixels, maxval, comments)`` where pixels is a 2-D uint8 or
    uint16 array (row-major, shape ``(height, width)``).
    """
    if not data.startswith(b"P5"):
        magic = data[:2].decode("ascii", "replace")
        raise PGMError(f"unsupported PGM magic {magic!r}, expected 'P5'")
    comments = []
    for line in data.split(b"\n")[1:]:
        s = line.strip()
        if s.startswith(b"#"):
            comments.append(s[1:].strip().decode("ascii", "replace"))
        elif s:
            break
    toks = _tokens(data[2:])
    try:
        fields = []
        end = 0
        for _ in range(3):
            tok, end = next(toks)
            fields.append(int(tok))
    except (ValueError, StopIteration):
        raise PGMError("malformed PGM header") from None
    width, height, maxval = fields
    if not (0 < width <= MAX_DIM and 0 < height <= MAX_DIM):
        raise PGMError(f"PGM dimensions out of range: {width}x{height}")
    if not 0 < maxval < 65536:
        raise PGMError(f"PGM maxval out of range: {maxval}")
    # exactly one whitespace byte separates the header from the raster
    start = 2 + end + 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    size = width * height * dtype.itemsize
    raster = data[start : start + size]
    if len(raster) != size:
        raise PGMError(f"PGM raster truncated: expected {size} bytes, got {len(raster)}")
    if len(data) != start + size:
        raise PGMError("trailing bytes after PGM raster")
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    pixels = pixels.astype(np.uint16 if maxval > 255 else np.uint8)
    if pixels.max(initial=0) > maxval:
        raise PGMError("PGM pixel exceeds maxval")
    return pixels, maxval, comments


def write_pgm(pixels, maxval=255, comments=()) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise PGMError("PGM image must be 2-D")
    if not 0 < maxval < 65536:
        raise PGMError(f"PGM maxval out of range: {maxval}")
    if pixels.size and (pixels.min() < 0 or pixels.max() > maxval):
        raise PGMError("pixel values outside [0, maxval]")
    height, width = pixels.shape
    header = "P5\n" + "".join(f"# {c}\n" for c in comments) + f"{width} {height}\n{maxval}\n"
    dtype = ">u2" if maxval > 255 else np.uint8
    return header.encode("ascii") + np.ascontiguousarray(pixels, dtype=dtype).tobytes()
