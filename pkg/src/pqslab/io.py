"""Flat key=value configs, CSV/JSON serialization and minimal SVG line plots."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError

__all__ = [
    "parse_config",
    "parse_overrides",
    "parse_grid",
    "parse_bool",
    "format_value",
    "write_csv",
    "read_csv",
    "to_json",
    "svg_lines",
]

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _parse_pairs(lines: Iterable[str], source: str):
    out: dict[str, tuple[str, int | None]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' in {source}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r} in {source}", line=lineno, field=key)
        if key in out:
            raise ConfigError(f"duplicate key in {source}", line=lineno, field=key)
        out[key] = (value, lineno)
    return out


def parse_config(text: str, source: str = "config") -> dict[str, tuple[str, int | None]]:
    """``key = value`` lines; ``#`` starts a comment.  Values stay strings with their line numbers."""
    return _parse_pairs(text.splitlines(), source)


def parse_overrides(items: Sequence[str]) -> dict[str, tuple[str, None]]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = (p.strip() for p in item.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"invalid override key {key!r}", field=key)
        out[key] = (value, None)
    return out


_FUNC = re.compile(r"^(-?)(logspace|linspace|geomspace)\(([^)]*)\)$")


def _split_top(text):
    # split on commas that are not inside parentheses
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_grid(text: str, key: str = "", line: int | None = None) -> tuple[float, ...]:
    """Comma list of numbers and ``[-]logspace(a, b, k)`` / ``linspace`` / ``geomspace`` items."""
    values: list[float] = []
    for item in _split_top(text):
        m = _FUNC.match(item.replace(" ", ""))
        if m:
            sign, fn, args = m.groups()
            try:
                a, b, k = args.split(",")
                arr = getattr(np, fn)(float(a), float(b), int(k))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad {fn} arguments {args!r}", line=line, field=key) from exc
            if int(k) < 1:
                raise ConfigError(f"{fn} needs at least one point", line=line, field=key)
            values.extend((-arr if sign else arr).tolist())
            continue
        try:
            values.append(float(item))
        except ValueError as exc:
            raise ConfigError(f"not a number: {item!r}", line=line, field=key) from exc
    if not values:
        raise ConfigError("empty grid", line=line, field=key)
    if not all(math.isfinite(v) for v in values):
        raise ConfigError("grid values must be finite", line=line, field=key)
    return tuple(values)


def parse_bool(text: str, key: str = "", line: int | None = None) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}", line=line, field=key)


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = []
        for row in rows:
            for k in row:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def _coerce(text):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: _coerce(v) for k, v in row.items()} for row in reader]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def to_json(obj) -> str:
    """Deterministic JSON; non-finite floats become null."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


_PALETTE = ("#1f4e9c", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50")


def svg_lines(series: dict[str, Sequence[tuple[float, float]]], title: str = "",
              xlabel: str = "", ylabel: str = "", logx: bool = False, logy: bool = False,
              hlines: Sequence[tuple[float, str]] = (), width: int = 640, height: int = 420) -> str:
    """Polyline plot; points with missing or non-finite coordinates break the line."""
    def tx(v):
        return math.log10(abs(v)) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    def ok(x, y):
        if x is None or y is None or not (math.isfinite(x) and math.isfinite(y)):
            return False
        return (not logx or x != 0) and (not logy or y > 0)

    pts = [(tx(x), ty(y)) for s in series.values() for x, y in s if ok(x, y)]
    pts += [(p[0], ty(h)) for h, _ in hlines for p in pts[:1] if not logy or h > 0]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(str(title))}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
                   f'font-size="12">{escape(str(xlabel))}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(str(ylabel))}</text>')
    for val in (x0, x1):
        shown = (10 ** val if logx else val)
        out.append(f'<text x="{px(val):.1f}" y="{mt + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{shown:.3g}</text>')
    for val in (y0, y1):
        shown = (10 ** val if logy else val)
        out.append(f'<text x="{ml - 6}" y="{py(val) + 4:.1f}" text-anchor="end" '
                   f'font-size="10">{shown:.3g}</text>')
    for h, lab in hlines:
        if logy and h <= 0:
            continue
        y = py(ty(h))
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{y:.2f}" y2="{y:.2f}" '
                   f'stroke="#888" stroke-dasharray="4 3"/>')
        out.append(f'<text x="{ml + pw + 4}" y="{y + 4:.2f}" font-size="10">{escape(str(lab))}</text>')
    for i, (name, pts_) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        segs, cur = [], []
        for x, y in pts_:
            if ok(x, y):
                cur.append(f"{px(tx(x)):.2f},{py(ty(y)):.2f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        for seg in segs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{" ".join(seg)}"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 8}" x2="{ml + pw + 28}" y1="{ly}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{ly + 4}" font-size="10">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
