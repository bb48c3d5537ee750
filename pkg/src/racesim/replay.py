"""Binary episode replay log: versioned header, length-prefixed CRC records.

Everything is little-endian. A file starts with a fixed header and then one
record per environment step (record 0 is the reset: zero rewards, the primed
action, the first observation). Masks are stored bit-packed (512 bytes per
64x64 frame). The ground-truth block is written whenever the producing
environment logged it, independent of whether the consumer saw privileged
observations.

A human-readable schema sidecar (`<file>.schema.txt`) is written next to every
log. Read errors are distinct: bad magic/version, truncation (with the record
index), and per-record checksum mismatch.
"""

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .track import GateCrossing

FORMAT_VERSION = 1
_MAGIC = b"RSIMRPL\x00"
_HEADER = struct.Struct("<8sHHHHHH")  # magic, version, H, W, vec_dim, priv_dim, reserved

VEC_DIM = 31   # measured rates (3) + measured rotor speeds (4) + flight plan (24)
PRIV_DIM = 58  # p_w 3, p_g 3, v_w 3, v_g 3, euler+gate yaw 4, rates 3, rotors 4,
               # camera mount 3, dynamics parameter vector 32

_TERM_KINDS = ("none", "gate_collision", "ground_collision")
_CROSSING_KINDS = ("pre", "main", "post")


class ReplayError(Exception):
    pass


class ReplayVersionError(ReplayError):
    pass


class ReplayTruncatedError(ReplayError):
    def __init__(self, record_index: int, message: str):
        super().__init__(f"replay truncated at record {record_index}: {message}")
        self.record_index = record_index


class ReplayChecksumError(ReplayError):
    def __init__(self, record_index: int):
        super().__init__(f"checksum mismatch in record {record_index}")
        self.record_index = record_index


@dataclass(eq=False)
class ReplayRecord:
    step_index: int
    terminated: bool
    truncated: bool
    term_kind: str = "none"
    term_detail: str = ""
    crossings: list = field(default_factory=list)
    fp_index: int = 0
    fp_changed: bool = False
    lap: int = 0
    r_prog: float = 0.0
    r_rate: float = 0.0
    r_gate: float = 0.0
    r_total: float = 0.0
    action: np.ndarray = None
    rates_meas: np.ndarray = None
    motors_meas: np.ndarray = None
    flight_plan: np.ndarray = None
    mask: np.ndarray = None
    priv: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, ReplayRecord):
            return NotImplemented
        scalar = all(
            getattr(self, n) == getattr(other, n)
            for n in ("step_index", "terminated", "truncated", "term_kind", "term_detail",
                      "fp_index", "fp_changed", "lap", "r_prog", "r_rate", "r_gate",
                      "r_total", "crossings")
        )
        arrays = all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("action", "rates_meas", "motors_meas", "flight_plan", "mask")
        )
        if self.priv is None or other.priv is None:
            priv = self.priv is None and other.priv is None
        else:
            priv = np.array_equal(self.priv, other.priv)
        return scalar and arrays and priv


SCHEMA_DOC = f"""racesim replay log, format version {FORMAT_VERSION}
All integers and floats little-endian.

header: magic {_MAGIC!r} (8 bytes), u16 version, u16 image height, u16 image
width, u16 vec_dim, u16 priv_dim, u16 reserved.

record framing: u32 payload length, payload, u32 crc32(payload).

payload:
  u32 step_index
  u8  flags (bit0 terminated, bit1 truncated)
  u8  termination kind (0 none, 1 gate_collision, 2 ground_collision)
  u8  detail length, ascii detail bytes
  u8  crossing count; per crossing: u8 kind (0 pre, 1 main, 2 post),
      i32 gate index, f64 lateral offset, f64 vertical offset, f64 step fraction
  i32 flight-plan index (after the step), u8 flight-plan changed flag
  u32 lap counter
  f64 progress reward, f64 rate penalty, f64 gate reward, f64 total reward
  f64[4] commanded action (clamped)
  f64[vec_dim] observation vector: measured body rates (3), measured rotor
      speeds (4), flight plan (24)
  u8[ceil(H*W/8)] observation mask, bit-packed row major
  u8  ground-truth present flag
  f64[priv_dim] ground truth (if present): world position (3), gate-frame
      position (3), world velocity (3), gate-frame velocity (3), roll/pitch/
      world yaw/gate yaw (4), body rates (3), rotor speeds (4), camera mount
      angles (3), dynamics parameter vector (32)
"""


def _mask_bytes(height: int, width: int) -> int:
    return (height * width + 7) // 8


def _encode_record(rec: ReplayRecord, height: int, width: int) -> bytes:
    buf = bytearray()
    buf += struct.pack("<I", rec.step_index)
    flags = (1 if rec.terminated else 0) | (2 if rec.truncated else 0)
    buf += struct.pack("<BB", flags, _TERM_KINDS.index(rec.term_kind))
    detail = rec.term_detail.encode("ascii", "replace")[:255]
    buf += struct.pack("<B", len(detail)) + detail
    buf += struct.pack("<B", len(rec.crossings))
    for c in rec.crossings:
        buf += struct.pack("<Biddd", _CROSSING_KINDS.index(c.kind), c.gate_index,
                           c.y_g, c.z_g, c.frac)
    buf += struct.pack("<iBI", rec.fp_index, 1 if rec.fp_changed else 0, rec.lap)
    buf += struct.pack("<dddd", rec.r_prog, rec.r_rate, rec.r_gate, rec.r_total)
    buf += np.asarray(rec.action, dtype="<f8").tobytes()
    vec = np.concatenate([rec.rates_meas, rec.motors_meas, rec.flight_plan])
    if vec.shape != (VEC_DIM,):
        raise ValueError(f"observation vector must have {VEC_DIM} entries, got {vec.shape}")
    buf += vec.astype("<f8").tobytes()
    if rec.mask.shape != (height, width):
        raise ValueError(f"mask shape {rec.mask.shape} does not match header ({height}, {width})")
    buf += np.packbits(rec.mask.astype(bool).ravel()).tobytes()
    if rec.priv is None:
        buf += struct.pack("<B", 0)
    else:
        priv = np.asarray(rec.priv, dtype="<f8")
        if priv.shape != (PRIV_DIM,):
            raise ValueError(f"ground-truth vector must have {PRIV_DIM} entries, got {priv.shape}")
        buf += struct.pack("<B", 1) + priv.tobytes()
    return bytes(buf)


def _decode_record(payload: bytes, height: int, width: int, index: int) -> ReplayRecord:
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(payload):
            raise ReplayTruncatedError(index, "record payload ends early")
        vals = struct.unpack_from(fmt, payload, off)
        off += size
        return vals

    (step_index,) = take("<I")
    flags, kind_idx = take("<BB")
    (detail_len,) = take("<B")
    if off + detail_len > len(payload):
        raise ReplayTruncatedError(index, "record payload ends early")
    detail = payload[off:off + detail_len].decode("ascii")
    off += detail_len
    (n_cross,) = take("<B")
    crossings = []
    for _ in range(n_cross):
        ck, gi, y, z, frac = take("<Biddd")
        crossings.append(GateCrossing(gate_index=gi, y_g=y, z_g=z,
                                      kind=_CROSSING_KINDS[ck], frac=frac))
    fp_index, fp_changed, lap = take("<iBI")
    r_prog, r_rate, r_gate, r_total = take("<dddd")

    def take_floats(n):
        nonlocal off
        size = 8 * n
        if off + size > len(payload):
            raise ReplayTruncatedError(index, "record payload ends early")
        arr = np.frombuffer(payload, dtype="<f8", count=n, offset=off).copy()
        off += size
        return arr

    action = take_floats(4)
    vec = take_floats(VEC_DIM)
    nbytes = _mask_bytes(height, width)
    if off + nbytes > len(payload):
        raise ReplayTruncatedError(index, "record payload ends early")
    bits = np.frombuffer(payload, dtype=np.uint8, count=nbytes, offset=off)
    mask = np.unpackbits(bits)[: height * width].reshape(height, width).astype(np.uint8)
    off += nbytes
    (has_priv,) = take("<B")
    priv = take_floats(PRIV_DIM) if has_priv else None

    return ReplayRecord(
        step_index=step_index,
        terminated=bool(flags & 1),
        truncated=bool(flags & 2),
        term_kind=_TERM_KINDS[kind_idx],
        term_detail=detail,
        crossings=crossings,
        fp_index=fp_index,
        fp_changed=bool(fp_changed),
        lap=lap,
        r_prog=r_prog, r_rate=r_rate, r_gate=r_gate, r_total=r_total,
        action=action,
        rates_meas=vec[0:3],
        motors_meas=vec[3:7],
        flight_plan=vec[7:31],
        mask=mask,
        priv=priv,
    )


class ReplayWriter:
    """Streams records to disk; writes the schema sidecar on open."""

    def __init__(self, path, height: int = 64, width: int = 64):
        self.path = Path(path)
        self.height = height
        self.width = width
        self._fh = open(self.path, "wb")
        self._fh.write(_HEADER.pack(_MAGIC, FORMAT_VERSION, height, width, VEC_DIM, PRIV_DIM, 0))
        self.path.with_suffix(self.path.suffix + ".schema.txt").write_text(SCHEMA_DOC)

    def append(self, rec: ReplayRecord) -> None:
        payload = _encode_record(rec, self.height, self.width)
        self._fh.write(struct.pack("<I", len(payload)))
        self._fh.write(payload)
        self._fh.write(struct.pack("<I", zlib.crc32(payload)))

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_replay(path, records, height: int = 64, width: int = 64) -> None:
    """One-shot write of a record sequence (possibly empty)."""
    with ReplayWriter(path, height, width) as writer:
        for rec in records:
            writer.append(rec)


def read_header(path) -> dict:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ReplayTruncatedError(0, "file shorter than the header")
    magic, version, height, width, vec_dim, priv_dim, _ = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ReplayVersionError(f"{path}: not a replay file (bad magic)")
    if version != FORMAT_VERSION:
        raise ReplayVersionError(
            f"{path}: format version {version}, this reader supports {FORMAT_VERSION}")
    if vec_dim != VEC_DIM or priv_dim != PRIV_DIM:
        raise ReplayVersionError(f"{path}: unexpected vector dimensions in header")
    return {"height": height, "width": width, "size": len(raw)}


def read_replay(path) -> list[ReplayRecord]:
    """Read all records; raises distinct errors for version, truncation and
    checksum problems."""
    raw = Path(path).read_bytes()
    info = read_header(path)
    height, width = info["height"], info["width"]
    records = []
    off = _HEADER.size
    index = 0
    while off < len(raw):
        if off + 4 > len(raw):
            raise ReplayTruncatedError(index, "length prefix cut off")
        (plen,) = struct.unpack_from("<I", raw, off)
        off += 4
        if off + plen + 4 > len(raw):
            raise ReplayTruncatedError(index, "payload or checksum cut off")
        payload = raw[off:off + plen]
        off += plen
        (crc,) = struct.unpack_from("<I", raw, off)
        off += 4
        if zlib.crc32(payload) != crc:
            raise ReplayChecksumError(index)
        records.append(_decode_record(payload, height, width, index))
        index += 1
    return records
