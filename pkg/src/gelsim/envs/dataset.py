"""Trajectory dataset files: fixed-size binary records + JSONL index.

Layout: <name>.traj holds back-to-back float32 records; <name>.traj.idx is
JSONL whose first line describes the record fields (name, shape, offset in
floats) and subsequent lines index records {offset, env, episode, step}.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class TrajectoryWriter:
    def __init__(self, path, field_shapes: dict):
        """field_shapes: ordered {name: shape tuple} for one record."""
        self.path = Path(path)
        self.index_path = Path(str(path) + ".idx")
        self.fields = {k: tuple(v) for k, v in field_shapes.items()}
        self.record_floats = int(sum(np.prod(s) for s in self.fields.values()))
        self._fh = open(self.path, "wb")
        self._idx = open(self.index_path, "w")
        header = {"format": "gelsim-traj-v1", "record_floats": self.record_floats,
                  "fields": {k: list(v) for k, v in self.fields.items()}}
        self._idx.write(json.dumps(header) + "\n")
        self.count = 0

    def append(self, env: int, episode: int, step: int, **arrays):
        parts = []
        for name, shape in self.fields.items():
            a = np.asarray(arrays[name], dtype=np.float32)
            if a.shape != shape:
                raise ValueError(f"{name}: expected {shape}, got {a.shape}")
            parts.append(a.reshape(-1))
        rec = np.concatenate(parts).astype("<f4")
        offset = self.count * self.record_floats * 4
        self._fh.write(rec.tobytes())
        self._idx.write(json.dumps({"offset": offset, "env": int(env),
                                    "episode": int(episode), "step": int(step)}) + "\n")
        self.count += 1

    def close(self):
        self._fh.close()
        self._idx.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TrajectoryReader:
    def __init__(self, path):
        self.path = Path(path)
        self.index_path = Path(str(path) + ".idx")
        lines = self.index_path.read_text().splitlines()
        header = json.loads(lines[0])
        if header.get("format") != "gelsim-traj-v1":
            raise ValueError(f"{path}: not a trajectory file")
        self.fields = {k: tuple(v) for k, v in header["fields"].items()}
        self.record_floats = header["record_floats"]
        self.index = [json.loads(ln) for ln in lines[1:]]
        self._data = np.fromfile(self.path, dtype="<f4").reshape(
            len(self.index), self.record_floats)

    def __len__(self):
        return len(self.index)

    def record(self, i: int) -> dict:
        flat = self._data[i]
        out = {}
        pos = 0
        for name, shape in self.fields.items():
            n = int(np.prod(shape))
            out[name] = flat[pos:pos + n].reshape(shape).astype(np.float64)
            pos += n
        return out

    def column(self, name: str) -> np.ndarray:
        """All records' values for one field, stacked on axis 0."""
        pos = 0
        for k, shape in self.fields.items():
            n = int(np.prod(shape))
            if k == name:
                return self._data[:, pos:pos + n].reshape(
                    (len(self.index),) + shape).astype(np.float64)
            pos += n
        raise KeyError(name)
