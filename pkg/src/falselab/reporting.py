"""CSV, PGM, and manifest writers shared by the experiment runners.

All writers produce byte-deterministic output for identical inputs, so a
rerun with the same config and seed yields identical checksums.
"""

import csv
import hashlib
from pathlib import Path

import numpy as np

PGM_LO = -0.01
PGM_HI = 1.01


def write_csv(path, columns, rows) -> Path:
    """Write rows (sequences matching columns); floats use repr formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def write_pgm(path, image: np.ndarray) -> Path:
    """Dump a gray image as 16-bit binary PGM, affine-mapped from [-0.01, 1.01]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = np.asarray(image, dtype=np.float64)
    scaled = np.rint((img - PGM_LO) / (PGM_HI - PGM_LO) * 65535.0)
    data = np.clip(scaled, 0, 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Read a PGM written by write_pgm back into the original value range."""
    raw = Path(path).read_bytes()
    magic, dims, maxval, rest = raw.split(b"\n", 3)
    if magic != b"P5" or maxval != b"65535":
        raise ValueError(f"{path} is not a 16-bit binary PGM")
    w, h = (int(t) for t in dims.split())
    data = np.frombuffer(rest, dtype=">u2", count=w * h).reshape(h, w)
    return data.astype(np.float64) / 65535.0 * (PGM_HI - PGM_LO) + PGM_LO


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir, config_items, artifacts) -> Path:
    """Write manifest.txt: config echo, config hash, and per-file checksums.

    config_items: ordered (key, value) pairs; artifacts: iterable of paths
    inside out_dir.  Checksum lines use paths relative to out_dir.
    """
    out_dir = Path(out_dir)
    lines = [f"config.{k}={v}" for k, v in config_items]
    blob = "\n".join(lines).encode()
    lines.append(f"config_sha256={hashlib.sha256(blob).hexdigest()}")
    for art in sorted(Path(a) for a in artifacts):
        rel = art.relative_to(out_dir)
        lines.append(f"file.{rel}={sha256_file(art)}")
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path):
    """Parse a manifest back into (config_items, checksums) dicts."""
    config, files = {}, {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition("=")
        if key.startswith("config."):
            config[key[len("config."):]] = value
        elif key.startswith("file."):
            files[key[len("file."):]] = value
        elif key == "config_sha256":
            config["__hash__"] = value
    return config, files


def verify_manifest(out_dir) -> list[str]:
    """Re-hash every file listed in out_dir/manifest.txt; return mismatches."""
    out_dir = Path(out_dir)
    _, files = read_manifest(out_dir / "manifest.txt")
    problems = []
    for rel, expect in files.items():
        target = out_dir / rel
        if not target.exists():
            problems.append(f"{rel}: missing")
        elif sha256_file(target) != expect:
            problems.append(f"{rel}: checksum mismatch")
    return problems
