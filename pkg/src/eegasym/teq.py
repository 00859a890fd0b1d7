"""Scoring for the 16-item empathy questionnaire.

Answers are 7-point labels mapped to 0..6. Half of the items are negatively
worded and are reverse-coded (v -> 6 - v) before summing, giving a total in
[0, 96]. The reverse set is always explicit: it ships as a JSON config file
(the instrument's eight negatively worded items by default) and is echoed
into output metadata so scores stay auditable.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

LABEL_VALUES: dict[str, int] = {
    "never": 0,
    "almost never": 1,
    "rarely": 2,
    "sometimes": 3,
    "often": 4,
    "very often": 5,
    "always": 6,
}

VALUE_LABELS: dict[int, str] = {v: k for k, v in LABEL_VALUES.items()}

N_ITEMS = 16
MAX_ITEM_VALUE = 6
MAX_TOTAL = N_ITEMS * MAX_ITEM_VALUE  # 96
EXPECTED_REVERSE_COUNT = 8


def encode_label(label: str) -> int:
    """Map an answer label to its 0..6 value."""
    key = label.strip().lower()
    if key not in LABEL_VALUES:
        raise ValueError(f"unknown label {label!r}")
    return LABEL_VALUES[key]


@dataclass(frozen=True)
class TeqResponse:
    """One respondent's 16 answer labels."""

    participant_id: str
    items: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.items) != N_ITEMS:
            raise ValueError(f"expected {N_ITEMS} items, got {len(self.items)}")
        for label in self.items:
            encode_label(label)
        object.__setattr__(self, "items", tuple(self.items))

    def raw_values(self) -> tuple[int, ...]:
        return tuple(encode_label(label) for label in self.items)


@dataclass(frozen=True)
class TeqScore:
    participant_id: str
    total: int

    def __post_init__(self) -> None:
        if not (0 <= self.total <= MAX_TOTAL):
            raise ValueError(f"total {self.total} outside [0, {MAX_TOTAL}]")


def default_reverse_items() -> frozenset[int]:
    """The instrument's negatively worded items, from the packaged config."""
    text = resources.files("eegasym.data").joinpath("teq_reverse_items.json").read_text()
    return frozenset(json.loads(text))


def load_reverse_items(path: str | Path | None = None) -> frozenset[int]:
    """Read a reverse-item set: a JSON list of 1-based item indices."""
    if path is None:
        return default_reverse_items()
    items = json.loads(Path(path).read_text())
    out = frozenset(int(i) for i in items)
    for i in out:
        if not (1 <= i <= N_ITEMS):
            raise ValueError(f"reverse item index {i} outside 1..{N_ITEMS}")
    return out


def score(
    response: TeqResponse,
    reverse_items: frozenset[int],
    *,
    strict_reverse_count: bool = False,
) -> TeqScore:
    """Sum the 16 item values with the reverse set flipped (v -> 6 - v).

    Indices in reverse_items are 1-based. A reverse set that is not exactly 8
    items warns by default; pass strict_reverse_count=True to make it an error.
    """
    bad = [i for i in reverse_items if not (1 <= i <= N_ITEMS)]
    if bad:
        raise ValueError(f"reverse item indices outside 1..{N_ITEMS}: {sorted(bad)}")
    if len(reverse_items) != EXPECTED_REVERSE_COUNT:
        message = (
            f"reverse set has {len(reverse_items)} items, expected "
            f"{EXPECTED_REVERSE_COUNT}"
        )
        if strict_reverse_count:
            raise ValueError(message)
        warnings.warn(message, stacklevel=2)
    total = 0
    for index, value in enumerate(response.raw_values(), start=1):
        total += (MAX_ITEM_VALUE - value) if index in reverse_items else value
    return TeqScore(response.participant_id, total)


def response_for_total(
    participant_id: str, total: int, reverse_items: frozenset[int]
) -> TeqResponse:
    """Construct a deterministic response whose score equals `total`.

    Effective item contributions are assigned greedily in item order, then
    mapped back through the reverse coding. Used by the synthetic cohort
    generator so questionnaire files round-trip to the planted totals.
    """
    if not (0 <= total <= MAX_TOTAL):
        raise ValueError(f"score outside [0, {MAX_TOTAL}]: {total}")
    remaining = int(total)
    labels: list[str] = []
    for index in range(1, N_ITEMS + 1):
        contribution = min(MAX_ITEM_VALUE, remaining)
        remaining -= contribution
        value = (
            MAX_ITEM_VALUE - contribution if index in reverse_items else contribution
        )
        labels.append(VALUE_LABELS[value])
    return TeqResponse(participant_id, tuple(labels))
