"""Reader and writer for MSCT tensor files and cache directories.

Layout of one tensor file, all little-endian:
    b"MSCT" | u16 version | u8 dtype | u8 ndim | ndim x u64 dims | payload (row-major)
"""

from __future__ import annotations

import json
import re
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MSCT"
VERSION = 1

_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_NAMES = {"f32": 0, "f64": 1, "i64": 2}
_NAME_OF = {v: k for k, v in _NAMES.items()}
_VALID_NAME = re.compile(r"^[A-Za-z0-9_.-]+$")


class MsctError(ValueError):
    pass


def _code_for(arr: np.ndarray) -> int:
    kind = arr.dtype.kind
    if kind == "f" and arr.dtype.itemsize == 4:
        return 0
    if kind == "f" and arr.dtype.itemsize == 8:
        return 1
    if kind in "iu":
        return 2
    raise MsctError(f"unsupported dtype {arr.dtype}")


def encode(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 255:
        raise MsctError("too many dimensions")
    if arr.size == 0:
        raise MsctError("zero extent")
    code = _code_for(arr)
    payload = np.ascontiguousarray(arr, dtype=_CODES[code])
    head = MAGIC + struct.pack("<HBB", VERSION, code, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + payload.tobytes()


def decode(buf: bytes, name: str = "tensor") -> np.ndarray:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise MsctError(f"{name}: bad magic")
    if len(buf) < 8:
        raise MsctError(f"{name}: truncated header")
    version, code, ndim = struct.unpack_from("<HBB", buf, 4)
    if version != VERSION:
        raise MsctError(f"{name}: unsupported version {version}")
    if code not in _CODES:
        raise MsctError(f"{name}: unsupported dtype code {code}")
    if ndim == 0:
        raise MsctError(f"{name}: empty dims")
    end = 8 + 8 * ndim
    if len(buf) < end:
        raise MsctError(f"{name}: truncated header")
    dims = struct.unpack_from(f"<{ndim}Q", buf, 8)
    count = int(np.prod(dims, dtype=np.uint64))
    if count == 0:
        raise MsctError(f"{name}: zero extent")
    want = end + count * _CODES[code].itemsize
    if len(buf) < want:
        raise MsctError(f"{name}: truncated payload")
    if len(buf) > want:
        raise MsctError(f"{name}: trailing bytes")
    return np.frombuffer(buf, dtype=_CODES[code], count=count, offset=end).reshape(dims).copy()


def write_tensor(arr: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode(arr))


def read_tensor(path: str | Path) -> np.ndarray:
    p = Path(path)
    return decode(p.read_bytes(), p.stem)


def dtype_name(arr: np.ndarray) -> str:
    return _NAME_OF[_code_for(np.asarray(arr))]


class Cache:
    """Directory of MSCT files plus manifest.json. Tensors load on first access."""

    def __init__(self, meta: dict | None = None):
        self.meta: dict = dict(meta or {})
        self._entries: dict[str, dict] = {}
        self._data: dict[str, np.ndarray] = {}
        self._dir: Path | None = None

    @classmethod
    def open(cls, path: str | Path) -> "Cache":
        root = Path(path)
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        c = cls(manifest.get("meta", {}))
        c._dir = root
        for e in manifest["tensors"]:
            if e["dtype"] not in _NAMES:
                raise MsctError(f"{e['name']}: unknown dtype {e['dtype']}")
            c._entries[e["name"]] = {"name": e["name"], "dtype": e["dtype"], "dims": list(e["dims"]), "file": e["file"]}
        return c

    def put(self, name: str, arr: np.ndarray) -> None:
        if not _VALID_NAME.match(name):
            raise MsctError(f"invalid tensor name '{name}'")
        arr = np.asarray(arr)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.dtype.kind in "iu":
            arr = arr.astype("<i8")
        self._entries[name] = {"name": name, "dtype": dtype_name(arr), "dims": list(arr.shape), "file": name + ".msct"}
        self._data[name] = arr

    def names(self) -> list[str]:
        return sorted(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self._entries:
            raise KeyError(f"cache has no tensor '{name}'")
        if name not in self._data:
            e = self._entries[name]
            arr = read_tensor(self._dir / e["file"])
            if list(arr.shape) != e["dims"] or dtype_name(arr) != e["dtype"]:
                raise MsctError(f"tensor '{name}' disagrees with manifest")
            self._data[name] = arr
        return self._data[name]

    def manifest(self) -> dict:
        return {"meta": self.meta, "tensors": [self._entries[n] for n in self.names()]}

    def save(self, path: str | Path) -> None:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        for n in self.names():
            write_tensor(self[n], root / self._entries[n]["file"])
        text = json.dumps(self.manifest(), indent=2, sort_keys=True, ensure_ascii=False)
        (root / "manifest.json").write_text(text + "\n", encoding="utf-8")

    def validate(self) -> None:
        if "d" not in self.meta:
            raise MsctError("cache meta has no 'd'")
        for n in self.names():
            self[n]
        if "activations" in self and self["activations"].shape[-1] != int(self.meta["d"]):
            raise MsctError("meta d does not match the activations width")
