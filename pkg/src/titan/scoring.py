"""Answer extraction, normalization, exact matching, and accuracy reports.

Extraction follows three rules, tried in order:

1. If the execution output contains a complete sentinel block, the payload
   of the last complete block is the answer.
2. Otherwise, the last line containing a parseable number yields its
   rightmost numeric token (currency symbols, thousands commas, percent
   signs, and a trailing sentence period are tolerated).
3. Otherwise, the last non-empty line, trimmed.

The payload is then normalized according to the expected answer kind.
Matching is exact on canonical forms, except numbers, which compare within
a small relative tolerance so formatting noise never counts as wrong.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation, localcontext
from typing import Iterable, Mapping, Optional

RESULT_BEGIN = "<<<TITAN_RESULT>>>"
RESULT_END = "<<</TITAN_RESULT>>>"

KINDS = ("number", "text", "binary", "list")

# Relative tolerance for numeric equality: |a - b| <= TOL * max(1, |b|).
NUMERIC_TOLERANCE = Decimal("1e-6")

# Numeric token, rightmost-match extraction. Order matters: the comma-grouped
# alternative must come first or "1,234" would match as "1".
_NUMBER_TOKEN_RE = re.compile(
    r"""
    [-+]?
    [$€£]?
    (?:
        \d{1,3}(?:,\d{3})+(?:\.\d+)?
      | \d+\.?\d*
      | \.\d+
    )
    (?:[eE][-+]?\d+)?
    %?
    """,
    re.VERBOSE,
)

_CURRENCY_RE = re.compile(r"[$€£]")

# Decimal accepts arbitrarily large exponents; cap what we canonicalize so a
# fuzzed "1e999999" cannot expand to a megabyte of zeros.
_MAX_ADJUSTED_EXPONENT = 50

_BINARY_WORDS = {
    "1": "1",
    "0": "0",
    "yes": "1",
    "true": "1",
    "no": "0",
    "false": "0",
}


@dataclass(frozen=True)
class Answer:
    """A normalized answer: ``canonical`` is a fixed point of normalization."""

    kind: str
    canonical: str


def _parse_decimal(token: str) -> Optional[Decimal]:
    """Parse one numeric token, tolerating currency/comma/percent dressing."""
    cleaned = _CURRENCY_RE.sub("", token.strip())
    cleaned = cleaned.replace(",", "").rstrip("%")
    if cleaned.endswith("."):
        cleaned = cleaned[:-1]
    if not cleaned or cleaned in "+-":
        return None
    try:
        value = Decimal(cleaned)
    except InvalidOperation:
        return None
    if not value.is_finite() or abs(value.adjusted()) > _MAX_ADJUSTED_EXPONENT:
        return None
    return value


def _canonical_decimal(value: Decimal) -> str:
    """Minimal decimal string: no exponent, no trailing zeros, no "-0"."""
    value = value.normalize()
    if value == value.to_integral_value():
        # The default context precision (28) is narrower than the exponent
        # cap, so quantizing a wide integer needs an explicit context.
        with localcontext() as ctx:
            ctx.prec = _MAX_ADJUSTED_EXPONENT + 10
            value = value.quantize(Decimal(1))
    text = format(value, "f")
    if text in ("-0", "0"):
        return "0"
    return text


def _rightmost_number(line: str) -> Optional[Decimal]:
    best = None
    for match in _NUMBER_TOKEN_RE.finditer(line):
        parsed = _parse_decimal(match.group(0))
        if parsed is not None:
            best = parsed
    return best


def _strip_quotes(text: str) -> str:
    text = text.strip()
    while len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'`":
        text = text[1:-1].strip()
    return text


def normalize(value: str, kind: str, case_sensitive: bool = False) -> Optional[str]:
    """Return the canonical form of ``value`` for ``kind``, or None.

    None means the value cannot be read as the expected kind, which callers
    report as a no_answer failure.
    """
    if kind == "number":
        parsed = _parse_decimal(value)
        if parsed is None:
            # The payload may be a sentence; fall back to its last number.
            parsed = _rightmost_number(value)
        if parsed is None:
            return None
        return _canonical_decimal(parsed)

    if kind == "text":
        text = _strip_quotes(value)
        if not case_sensitive:
            text = text.casefold()
        return text

    if kind == "binary":
        word = _strip_quotes(value).casefold()
        if word in _BINARY_WORDS:
            return _BINARY_WORDS[word]
        parsed = _parse_decimal(word)
        if parsed == 0:
            return "0"
        if parsed == 1:
            return "1"
        return None

    if kind == "list":
        text = value.strip()
        if text.startswith("[") and text.endswith("]") and len(text) >= 2:
            text = text[1:-1]
        items = []
        for piece in text.split(","):
            piece = _strip_quotes(piece)
            if not case_sensitive:
                piece = piece.casefold()
            if piece:
                items.append(piece)
        if not items:
            return None
        return ",".join(items)

    raise ValueError(f"unknown answer kind: {kind!r}")


def _last_sentinel_payload(text: str) -> Optional[str]:
    payload = None
    open_index = None
    lines = text.splitlines()
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped == RESULT_BEGIN:
            open_index = i
        elif stripped == RESULT_END and open_index is not None:
            payload = "\n".join(lines[open_index + 1 : i]).strip()
            open_index = None
    return payload


def extract_answer(
    stdout: str, expected_kind: str, case_sensitive: bool = False
) -> Optional[Answer]:
    """Pull the answer out of execution output and normalize it.

    Returns None (a no_answer condition) when the output is empty or the
    extracted payload cannot be normalized to ``expected_kind``.
    """
    if not stdout or not stdout.strip():
        return None

    payload = _last_sentinel_payload(stdout)
    if payload is None:
        for line in reversed(stdout.splitlines()):
            number = _rightmost_number(line)
            if number is not None:
                payload = _canonical_decimal(number)
                break
    if payload is None:
        for line in reversed(stdout.splitlines()):
            if line.strip():
                payload = line.strip()
                break
    if payload is None:
        return None

    canonical = normalize(payload, expected_kind, case_sensitive)
    if canonical is None:
        return None
    return Answer(kind=expected_kind, canonical=canonical)


def _numbers_match(a: str, b: str) -> bool:
    left = _parse_decimal(a)
    right = _parse_decimal(b)
    if left is None or right is None:
        return False
    tolerance = NUMERIC_TOLERANCE * max(Decimal(1), abs(right))
    return abs(left - right) <= tolerance


def is_match(predicted: Optional[Answer], gold, case_sensitive: bool = False) -> bool:
    """Exact-match comparison of a normalized answer against ground truth.

    ``gold`` carries ``kind`` and ``value`` (and optionally ``order_free``
    for list answers where element order is irrelevant).
    """
    if predicted is None or predicted.kind != gold.kind:
        return False

    if gold.kind == "number":
        gold_canonical = normalize(str(gold.value), "number")
        if gold_canonical is None:
            return False
        return _numbers_match(predicted.canonical, gold_canonical)

    if gold.kind == "list":
        if isinstance(gold.value, str):
            gold_items = [v for v in gold.value.split(",") if v]
        else:
            gold_items = list(gold.value)
        norm_gold = []
        for item in gold_items:
            canon = normalize(str(item), "text", case_sensitive)
            if canon:
                norm_gold.append(canon)
        predicted_items = predicted.canonical.split(",")
        if getattr(gold, "order_free", False):
            return set(predicted_items) == set(norm_gold)
        return predicted_items == norm_gold

    gold_canonical = normalize(str(gold.value), gold.kind, case_sensitive)
    return gold_canonical is not None and predicted.canonical == gold_canonical


@dataclass
class DatasetStats:
    n: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float:
        if self.n == 0:
            return 0.0
        return round(100.0 * self.correct / self.n, 1)


@dataclass
class Report:
    """Per-dataset accuracy plus a failure histogram and optional deltas."""

    datasets: "dict[str, DatasetStats]" = field(default_factory=dict)
    failures: "dict[str, int]" = field(default_factory=dict)
    deltas: "Optional[dict[str, float]]" = None

    @property
    def average(self) -> float:
        accuracies = [s.accuracy for s in self.datasets.values() if s.n > 0]
        if not accuracies:
            return 0.0
        return round(sum(accuracies) / len(accuracies), 1)

    def to_json_dict(self) -> dict:
        out = {
            "datasets": {
                name: {"n": s.n, "correct": s.correct, "accuracy": s.accuracy}
                for name, s in self.datasets.items()
            },
            "average": self.average,
            "failures": dict(self.failures),
        }
        if self.deltas is not None:
            out["deltas"] = self.deltas
        return out


def aggregate(
    records: Iterable[Mapping], baseline: Optional[Report] = None
) -> Report:
    """Fold evaluation records into a Report.

    Records are mappings with at least ``dataset``, ``correct``, and
    ``failure_class`` keys, i.e. parsed lines of a records file. Datasets
    appear in first-seen order; the average weights each dataset equally
    regardless of size, and empty buckets never enter the average.
    """
    report = Report()
    for record in records:
        dataset = record.get("dataset") or "external"
        stats = report.datasets.setdefault(dataset, DatasetStats())
        stats.n += 1
        if record.get("correct"):
            stats.correct += 1
        failure = record.get("failure_class", "none")
        report.failures[failure] = report.failures.get(failure, 0) + 1

    if baseline is not None:
        deltas = {}
        for name, stats in report.datasets.items():
            if name in baseline.datasets and stats.n > 0:
                deltas[name] = round(
                    stats.accuracy - baseline.datasets[name].accuracy, 1
                )
        deltas["average"] = round(report.average - baseline.average, 1)
        report.deltas = deltas
    return report


def render_table(report: Report) -> str:
    """Plain-text table: one row per dataset, an Average row, deltas if any."""
    rows = []
    header = ["dataset", "n", "correct", "acc"]
    if report.deltas is not None:
        header.append("delta")
    rows.append(header)
    for name, stats in report.datasets.items():
        row = [name, str(stats.n), str(stats.correct), f"{stats.accuracy:.1f}"]
        if report.deltas is not None:
            delta = report.deltas.get(name)
            row.append(f"{delta:+.1f}" if delta is not None else "-")
        rows.append(row)
    avg_row = ["Average", "", "", f"{report.average:.1f}"]
    if report.deltas is not None:
        avg_row.append(f"{report.deltas.get('average', 0.0):+.1f}")
    rows.append(avg_row)

    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
    real_failures = {k: v for k, v in report.failures.items() if k != "none"}
    if real_failures:
        parts = ", ".join(
            f"{name}={count}" for name, count in sorted(real_failures.items())
        )
        lines.append(f"failures: {parts}")
    return "\n".join(lines)
