"""On-disk artifacts: network snapshots, episode logs and learning curves.

Everything written here is a pure function of config and seed. Wall-clock
timings go to a separate file so the episode log stays byte-identical
across reruns, and snapshots use a zip container with fixed timestamps
because ``np.savez`` stamps the current time into every member.
"""
from __future__ import annotations

import csv
import io
import json
import zipfile
from pathlib import Path

import numpy as np

from ..network import Network, NetworkConfig

SNAPSHOT_FORMAT = "nibox-network"
SNAPSHOT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)
_ARRAYS = ("C", "P", "A", "exists", "positions", "roles", "last_firings", "current_firings")

CURVE_FIELDS = ("episode", "steps", "total_reward", "mean_reward", "total_novelty", "goal_reached")


def _zip_member(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_network(net: Network, path) -> Path:
    """Write a deterministic snapshot of every matrix plus the config and RNG state."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "config": net.config.to_dict(),
        "rng_state": net.rng.bit_generator.state,
    }
    with zipfile.ZipFile(path, "w") as zf:
        _zip_member(zf, "meta.json", dumps_json(meta).encode())
        for name in _ARRAYS:
            _zip_member(zf, f"{name}.npy", _npy_bytes(getattr(net, name)))
    return path


def load_network(path) -> Network:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"{path}: not a network snapshot")
        if meta.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: snapshot version {meta.get('version')} is not supported")
        arrays = {name: np.load(io.BytesIO(zf.read(f"{name}.npy")), allow_pickle=False)
                  for name in _ARRAYS}
    config = NetworkConfig.from_dict(meta["config"])
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]
    net = Network(config, arrays["positions"], arrays["roles"], arrays["C"], arrays["P"],
                  arrays["exists"], rng)
    net.A = arrays["A"]
    net.last_firings = arrays["last_firings"]
    net.current_firings = arrays["current_firings"]
    return net


def write_jsonl(path, rows) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(dumps_json(row) + "\n")


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return rows


def write_learning_curve(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for r in records:
            w.writerow([r.episode, r.steps, repr(float(r.total_reward)), repr(float(r.mean_reward)),
                        repr(float(r.total_novelty)), int(r.goal_reached)])


def export_connection_heatmap(net: Network, path, mask_path=None) -> tuple[Path, Path]:
    """Dense CSV of C (row = presynaptic) and a parallel 0/1 grid marking fixed connections.

    Values are written with ``repr`` so re-parsing returns bit-identical floats.
    A connection counts as fixed when it exists but has P = 0.
    """
    path = Path(path)
    mask_path = Path(mask_path) if mask_path else path.with_name(path.stem + "_fixed.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in net.C:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    fixed = (net.exists & (net.P == 0)).astype(int)
    with open(mask_path, "w") as fh:
        for row in fixed:
            fh.write(",".join(str(v) for v in row) + "\n")
    return path, mask_path


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return np.array(rows, dtype=float)
