"""Shared output helpers for the experiment scripts."""

import argparse
import json
import os
from pathlib import Path

import numpy as np

from bhdimer import __version__


def out_dir(default_name: str) -> Path:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default=os.environ.get("BHDIMER_OUTPUT_DIR", "results"))
    args = ap.parse_args()
    path = Path(args.out_dir) / default_name
    path.mkdir(parents=True, exist_ok=True)
    return path


def save(path: Path, columns, data, meta=None):
    arr = np.column_stack([np.asarray(c, dtype=float) for c in data])
    np.savetxt(path, arr, delimiter=",", header=",".join(columns), comments="", fmt="%.15e")
    info = {"version": __version__, "columns": list(columns), **(meta or {})}
    path.with_name(path.name + ".meta.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
    print(path)
