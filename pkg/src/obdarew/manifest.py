"""Run manifests: what was run, on which inputs, with what outcome."""

import hashlib
import json
from pathlib import Path

from . import __version__


def digest(path):
    p = Path(path)
    h = hashlib.sha256()
    if p.is_dir():
        for f in sorted(p.iterdir()):
            if f.is_file():
                h.update(f.name.encode() + b"\0")
                h.update(f.read_bytes())
    else:
        h.update(p.read_bytes())
    return h.hexdigest()


def build(command, inputs, parameters, result=None):
    """Manifest dict with a fixed key order.

    `inputs` maps a role ("tbox", "mapping", ...) to a path or a list of
    paths; only base names are recorded so the file is location independent.
    """
    ins = {}
    for role in sorted(inputs):
        paths = inputs[role]
        if paths is None:
            continue
        many = isinstance(paths, (list, tuple))
        entries = [{"file": Path(p).name, "sha256": digest(p)} for p in (paths if many else [paths])]
        ins[role] = entries if many else entries[0]
    out = {"tool": "obdarew", "version": __version__, "command": command, "inputs": ins,
           "parameters": dict(parameters)}
    result = dict(result or {})
    for key in ("k", "max_lhs", "exhaustive", "verdicts", "label", "warnings", "notes"):
        if key in result:
            out[key] = result.pop(key)
    out.update(result)
    out.setdefault("warnings", [])
    return out


def dumps(m):
    return json.dumps(m, indent=2, ensure_ascii=False) + "\n"


def write(m, path):
    Path(path).write_text(dumps(m))


def verify_digests(m, base):
    """True when every recorded input digest matches the file under `base`."""
    for entry in m["inputs"].values():
        for e in entry if isinstance(entry, list) else [entry]:
            if digest(Path(base) / e["file"]) != e["sha256"]:
                return False
    return True
