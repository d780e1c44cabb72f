"""Regenerates the MRC fixtures with a plain struct-based writer."""
import struct
from pathlib import Path

HERE = Path(__file__).parent


def write_mrc(path, mode, nx, ny, payload, pixel_a=2.5, ext=b""):
    h = bytearray(1024)
    struct.pack_into("<3i", h, 0, nx, ny, 1)
    struct.pack_into("<i", h, 12, mode)
    struct.pack_into("<3i", h, 28, nx, ny, 1)
    struct.pack_into("<3f", h, 40, pixel_a * nx, pixel_a * ny, pixel_a)
    struct.pack_into("<3f", h, 52, 90, 90, 90)
    struct.pack_into("<3i", h, 64, 1, 2, 3)
    struct.pack_into("<i", h, 92, len(ext))
    h[104:108] = b"    "
    struct.pack_into("<i", h, 108, 20140)
    h[208:212] = b"MAP "
    h[212:216] = bytes([0x44, 0x44, 0, 0])
    struct.pack_into("<i", h, 220, 1)
    label = b"64x64 ramp v = 0.5*x - 2*y + 3"
    h[224:224 + len(label)] = label
    path.write_bytes(bytes(h) + ext + payload)


nx = ny = 64
values = [0.5 * x - 2.0 * y + 3.0 for y in range(ny) for x in range(nx)]
write_mrc(HERE / "ramp64.mrc", 2, nx, ny, struct.pack("<%df" % len(values), *values), ext=b"\0" * 128)
write_mrc(HERE / "ramp64_int16.mrc", 1, nx, ny, struct.pack("<%dh" % len(values), *[int(v) for v in values]))
