"""Linkage documents and line-delimited motion traces.

A linkage document is JSON::

    {"chains": [{"closed": false, "vertices": [[0, 0], [1, 0], [1, 1]]}],
     "bars": [[0, 2]]}

``bars`` is optional and lists extra analysis bars by global vertex id.
Floats are written with ``repr``, the shortest text that reads back to the
same double, so parse -> serialize -> parse is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, TextIO

import numpy as np

from .errors import LinkageSyntaxError, StructuralError
from .flow import Frame, MotionTrace
from .geometry import Chain, Linkage, require_simple


@dataclass(frozen=True)
class LinkageDocument:
    linkage: Linkage
    extra_bars: tuple = ()


def _syntax(msg, text=None, pos=None, lineno=None):
    if lineno is None and text is not None and pos is not None:
        lineno = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    else:
        col = None
    return LinkageSyntaxError(msg, ("<linkage>", lineno, col, None))


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise _syntax(f"{where}: expected a number, got {json.dumps(x)}")
    return float(x)


def linkage_from_obj(obj, check_simple: bool = True) -> LinkageDocument:
    """Build a linkage from already-decoded JSON, with field paths in every diagnostic."""
    if not isinstance(obj, dict):
        raise _syntax("top level must be an object with a 'chains' field")
    unknown = set(obj) - {"chains", "bars"}
    if unknown:
        raise _syntax(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    if "chains" not in obj:
        raise _syntax("missing field 'chains'")
    raw = obj["chains"]
    if not isinstance(raw, list):
        raise _syntax("'chains' must be a list")
    if not raw:
        raise StructuralError("'chains' is empty: a linkage needs at least one chain")
    chains = []
    for k, c in enumerate(raw):
        where = f"chains[{k}]"
        if not isinstance(c, dict):
            raise _syntax(f"{where}: expected an object")
        if set(c) - {"closed", "vertices"}:
            raise _syntax(f"{where}: unknown field(s) {sorted(set(c) - {'closed', 'vertices'})}")
        closed = c.get("closed", None)
        if not isinstance(closed, bool):
            raise _syntax(f"{where}.closed: expected true or false")
        verts = c.get("vertices")
        if not isinstance(verts, list):
            raise _syntax(f"{where}.vertices: expected a list of [x, y] pairs")
        pts = []
        for m, p in enumerate(verts):
            if not isinstance(p, list) or len(p) != 2:
                raise _syntax(f"{where}.vertices[{m}]: expected [x, y]")
            pts.append((_number(p[0], f"{where}.vertices[{m}][0]"), _number(p[1], f"{where}.vertices[{m}][1]")))
        try:
            chains.append(Chain(np.array(pts, dtype=float).reshape(-1, 2), closed))
        except StructuralError as exc:
            raise StructuralError(f"{where}: {exc}") from exc
    linkage = Linkage(chains)
    bars = []
    for m, b in enumerate(obj.get("bars", [])):
        if not (isinstance(b, list) and len(b) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in b)):
            raise _syntax(f"bars[{m}]: expected [i, j] with integer vertex ids")
        i, j = b
        if i == j or not (0 <= i < linkage.n and 0 <= j < linkage.n):
            raise StructuralError(f"bars[{m}]: ({i}, {j}) is not a pair of distinct vertex ids below {linkage.n}")
        bars.append((min(i, j), max(i, j)))
    if check_simple:
        require_simple(linkage)
    return LinkageDocument(linkage, tuple(bars))


def parse_linkage_document(text: str, check_simple: bool = True) -> LinkageDocument:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _syntax(f"invalid JSON: {exc.msg}", lineno=exc.lineno) from exc
    return linkage_from_obj(obj, check_simple)


def parse_linkage(text: str, check_simple: bool = True) -> Linkage:
    """Parse a linkage document; non-simple input raises ``SimplicityError`` unless ``check_simple`` is off."""
    return parse_linkage_document(text, check_simple).linkage


def load_linkage(path, check_simple: bool = True) -> LinkageDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_linkage_document(fh.read(), check_simple)


def chains_obj(linkage: Linkage) -> list:
    return [{"closed": c.closed, "vertices": [[float(x), float(y)] for x, y in c.vertices]}
            for c in linkage.chains]


def serialize_linkage(linkage: Linkage, extra_bars: Iterable = ()) -> str:
    obj = {"chains": chains_obj(linkage)}
    bars = [list(b) for b in extra_bars]
    if bars:
        obj["bars"] = bars
    return json.dumps(obj, indent=1) + "\n"


# ---------------------------------------------------------------------------
# traces


def _finite(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def frame_record(frame: Frame) -> dict:
    d = frame.diag
    diag = {"min_strut_slack": _finite(d.min_strut_slack) if d else None,
            "max_bar_drift": _finite(d.max_bar_drift) if d else None,
            "dt": _finite(d.dt) if d else None}
    return {"type": "frame", "t": float(frame.t), "chains": chains_obj(frame.config), "diag": diag}


def trace_lines(trace: MotionTrace, params: dict) -> Iterator[str]:
    """Header, one record per stored frame, then the outcome trailer; one JSON object per line."""
    yield json.dumps({"type": "header", "format": "unlock-trace", "version": 1, "params": params})
    for fr in trace.frames:
        yield json.dumps(frame_record(fr))
    trailer = {"type": "trailer", "outcome": trace.outcome, "steps": trace.steps, "frames": len(trace.frames)}
    if trace.sections is not None:
        trailer["sections"] = trace.sections
    if trace.failure_step is not None:
        trailer["failure_step"] = trace.failure_step
        trailer["failure_reason"] = trace.failure_reason
    yield json.dumps(trailer)


def write_trace(trace: MotionTrace, params: dict, fh: TextIO) -> None:
    for line in trace_lines(trace, params):
        fh.write(line + "\n")


@dataclass
class TraceFile:
    params: dict
    frames: list  # (t, Linkage, diag dict)
    trailer: Optional[dict]

    @property
    def complete(self) -> bool:
        return self.trailer is not None


def read_trace(text: str) -> TraceFile:
    """Parse a trace; a missing trailer marks an interrupted run."""
    params, frames, trailer = None, [], None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise _syntax(f"trace line {lineno}: {exc.msg}", lineno=lineno) from exc
        kind = rec.get("type")
        if kind == "header":
            params = rec.get("params", {})
        elif kind == "frame":
            doc = linkage_from_obj({"chains": rec["chains"]}, check_simple=False)
            frames.append((rec["t"], doc.linkage, rec.get("diag")))
        elif kind == "trailer":
            trailer = rec
        else:
            raise _syntax(f"trace line {lineno}: unknown record type {kind!r}", lineno=lineno)
    if params is None:
        raise _syntax("trace has no header record")
    return TraceFile(params, frames, trailer)
