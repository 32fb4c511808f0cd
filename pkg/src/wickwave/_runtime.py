"""Keyed random streams, deterministic chunked parallel maps and CSV manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__

CHUNK = 256  # samples per work unit; fixed so results never depend on --threads


def stream(seed: int, purpose: str, *key: int) -> np.random.Generator:
    """Independent generator for (seed, purpose, key...); same inputs give the same draws."""
    tag = zlib.crc32(purpose.encode())
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(tag,) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunks(samples: Sequence[int], size: int = CHUNK) -> list[Sequence[int]]:
    return [samples[i : i + size] for i in range(0, len(samples), size)]


def map_chunks(fn: Callable, samples: Sequence[int], threads: int = 1, size: int = CHUNK) -> list:
    """Apply fn to fixed-size sample chunks; output order is the chunk order."""
    parts = chunks(samples, size)
    if threads <= 1 or len(parts) <= 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, parts))


def manifest_lines(config: dict, seed: int | None, extra: Iterable[str] = ()) -> list[str]:
    body = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    digest = hashlib.sha256(body.encode()).hexdigest()[:16]
    lines = [f"# wickwave {__version__}", f"# config_hash={digest}", f"# seed={seed}"]
    lines += [f"# {k}={config[k]}" for k in sorted(config)]
    lines += [f"# {e}" for e in extra]
    return lines


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], manifest: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in manifest:
        buf.write(line + "\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows, manifest=()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows, manifest))


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Return (manifest lines, rows as dicts) for a file written by write_csv."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    return meta, list(csv.DictReader(body))
