"""Quiz export writers: canonical JSON and GIFT plain text."""

from __future__ import annotations

import json
from typing import Mapping, Sequence

GIFT_SPECIAL_CHARS = "~=#{}:"


def gift_escape(s: str) -> str:
    """Backslash-escape the GIFT control characters."""
    return "".join("\\" + ch if ch in GIFT_SPECIAL_CHARS else ch for ch in s)


def _distractor_text(d) -> str:
    if isinstance(d, Mapping):
        return str(d["text"])
    return str(d)


def to_gift(items: Sequence[Mapping]) -> str:
    """Render wire-form items as GIFT blocks:
    ``::Qn:: question { =answer ~d1 ~d2 ~d3 }``.
    """
    blocks = []
    for n, item in enumerate(items, 1):
        options = ["=" + gift_escape(str(item["answer"]))]
        options.extend("~" + gift_escape(_distractor_text(d)) for d in item["distractors"])
        blocks.append(f"::Q{n}:: {gift_escape(str(item['question']))} {{ {' '.join(options)} }}")
    return "\n\n".join(blocks) + "\n"


def canonical_json(payload) -> str:
    """Stable serialization: parse + serialize is byte-identical."""
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
