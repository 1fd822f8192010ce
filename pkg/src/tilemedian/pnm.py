"""Binary PNM image I/O plus a raw 32-bit container.

Grayscale images travel as PGM ``P5`` (one byte per sample up to maxval 255,
two big-endian bytes up to 65535) and RGB as PPM ``P6``. Nothing in the PNM
family carries 32-bit samples, so those use a minimal private container:
the magic ``MF32``, little-endian 32-bit width and height, then width*height
little-endian 32-bit samples in row-major order.
"""

from pathlib import Path

import numpy as np

MF32_MAGIC = b"MF32"


def _tokenize_header(data: bytes, n_tokens: int) -> tuple[list[int], int]:
    """Read whitespace-separated header ints, skipping '#' comments.

    Returns the tokens and the offset of the first raster byte (one
    whitespace character after the last token, per the PNM spec).
    """
    tokens: list[int] = []
    pos = 2  # past the magic
    while len(tokens) < n_tokens:
        if pos >= len(data):
            raise ValueError("truncated header")
        c = data[pos:pos + 1]
        if c == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise ValueError("unterminated comment in header")
            pos += 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tok = data[pos:end]
            if not tok.isdigit():
                raise ValueError(f"bad header token {tok!r}")
            tokens.append(int(tok))
            pos = end
    return tokens, pos + 1


def _decode_pnm(data: bytes, channels: int) -> np.ndarray:
    (width, height, maxval), start = _tokenize_header(data, 3)
    if width < 1 or height < 1:
        raise ValueError(f"bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ValueError(f"unsupported maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raster = np.frombuffer(data, dtype=dtype, count=-1, offset=start)
    if raster.size < count:
        raise ValueError(f"raster holds {raster.size} samples, expected {count}")
    img = raster[:count].astype(dtype.newbyteorder("="))
    if channels == 1:
        return img.reshape(height, width)
    return img.reshape(height, width, channels)


def _decode_mf32(data: bytes) -> np.ndarray:
    if len(data) < 12:
        raise ValueError("truncated MF32 header")
    width, height = np.frombuffer(data, dtype="<u4", count=2, offset=4)
    count = int(width) * int(height)
    raster = np.frombuffer(data, dtype="<u4", count=-1, offset=12)
    if raster.size < count:
        raise ValueError(f"raster holds {raster.size} samples, expected {count}")
    return raster[:count].astype(np.uint32).reshape(int(height), int(width))


def read_image(path) -> np.ndarray:
    """Decode a P5/P6/MF32 file to (H, W) or (H, W, 3), dispatching on magic."""
    data = Path(path).read_bytes()
    magic = data[:4]
    if magic[:2] == b"P5":
        return _decode_pnm(data, 1)
    if magic[:2] == b"P6":
        return _decode_pnm(data, 3)
    if magic == MF32_MAGIC:
        return _decode_mf32(data)
    raise ValueError(f"unrecognised image magic {data[:2]!r}")


def write_image(path, image) -> None:
    """Encode to P5 (2-D), P6 ((H, W, 3) 8-bit), or MF32 (2-D uint32)."""
    image = np.asarray(image)
    path = Path(path)
    if image.ndim == 3:
        if image.shape[2] != 3 or image.dtype != np.uint8:
            raise ValueError("multi-channel output must be (H, W, 3) uint8")
        header = b"P6\n%d %d\n255\n" % (image.shape[1], image.shape[0])
        path.write_bytes(header + image.tobytes())
        return
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D or (H, W, 3) image, got shape {image.shape}")
    h, w = image.shape
    if image.dtype == np.uint8:
        path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + image.tobytes())
    elif image.dtype == np.uint16:
        raster = image.astype(">u2").tobytes()
        path.write_bytes(b"P5\n%d %d\n65535\n" % (w, h) + raster)
    elif image.dtype == np.uint32:
        header = MF32_MAGIC + np.array([w, h], dtype="<u4").tobytes()
        path.write_bytes(header + image.astype("<u4").tobytes())
    else:
        raise ValueError(f"no container for dtype {image.dtype}")
