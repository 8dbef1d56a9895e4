"""Deterministic rendering of analysis reports.

The report is an indented key/value document (YAML-compatible) built from
plain Python structures; floats are always printed with %.17g so identical
runs produce byte-identical output.
"""

from __future__ import annotations

import math


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "-.inf" if v < 0 else ".inf"
        return f"{v:.17g}"
    if isinstance(v, int):
        return str(v)
    s = str(v)
    if s == "" or any(c in s for c in ":#{}[]\"'\n") or s.strip() != s:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return s


def _inline_list(items) -> str:
    return "[" + ", ".join(_scalar(v) for v in items) + "]"


def render(doc, indent: int = 0) -> str:
    """Render nested dicts/lists; short scalar lists inline, dict items in
    insertion order."""
    pad = "  " * indent
    lines = []
    if isinstance(doc, dict):
        for key, value in doc.items():
            if isinstance(value, dict):
                if not value:
                    lines.append(f"{pad}{key}: {{}}")
                    continue
                lines.append(f"{pad}{key}:")
                lines.append(render(value, indent + 1))
            elif isinstance(value, (list, tuple)):
                if all(not isinstance(v, (dict, list, tuple)) for v in value):
                    lines.append(f"{pad}{key}: {_inline_list(value)}")
                else:
                    lines.append(f"{pad}{key}:")
                    lines.append(render(list(value), indent + 1))
            else:
                lines.append(f"{pad}{key}: {_scalar(value)}")
    elif isinstance(doc, (list, tuple)):
        for value in doc:
            if isinstance(value, dict):
                body = render(value, indent + 1).splitlines()
                if body:
                    first = body[0].strip()
                    lines.append(f"{pad}- {first}")
                    lines.extend(body[1:])
                else:
                    lines.append(f"{pad}- {{}}")
            elif isinstance(value, (list, tuple)):
                lines.append(f"{pad}- {_inline_list(value)}")
            else:
                lines.append(f"{pad}- {_scalar(value)}")
    else:
        lines.append(f"{pad}{_scalar(doc)}")
    return "\n".join(lines)


def render_report(doc: dict) -> str:
    return render({"daestruct_report": doc}) + "\n"
