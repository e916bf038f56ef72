"""Clothing-insulation dataset tooling: label remapping, splitting, summaries.

Works on manifests (labeled image lists), never on image data. Source labels
are reorganized into four insulation classes:

    0 sleeveless, 1 short-sleeve shirt, 2 long-sleeve shirt, 3 outerwear

Manifest file format: UTF-8, one entry per line,
``image_path<TAB>source_label<TAB>clo_class_id``; lines starting with ``#``
are ignored. Mapping tables are JSON lists of {"pattern", "clo_class"}
rules; patterns are case-insensitive globs, first match wins.
"""

from __future__ import annotations

import fnmatch
import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources

from .errors import ManifestFormatError, ValidationError
from .fileio import atomic_write_text
from .permkey import gen_permutation
from .validation import check_fraction

NUM_CLASSES = 4


@dataclass(frozen=True)
class CloCategory:
    """One insulation class; clo_value is optional user-supplied metadata."""

    id: int
    name: str
    clo_value: float | None = None

    def __post_init__(self) -> None:
        if self.id not in range(NUM_CLASSES):
            raise ValidationError(f"clo class id must be in 0..{NUM_CLASSES - 1}, got {self.id}")
        if self.clo_value is not None and self.clo_value <= 0:
            raise ValidationError(f"clo value must be > 0, got {self.clo_value}")


CLO_CATEGORIES = (
    CloCategory(0, "sleeveless"),
    CloCategory(1, "short-sleeve-shirt"),
    CloCategory(2, "long-sleeve-shirt"),
    CloCategory(3, "outerwear"),
)

# Published per-class image counts for the four-way clo reorganization of
# DeepFashion. Their sum (27,013) disagrees with the published dataset total
# (26,887) by 126 images; the gap is reported as-is, never "fixed".
REFERENCE_CLASS_COUNTS = (11033, 8176, 4218, 3586)
REFERENCE_TOTAL_IMAGES = 26887


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    source_label: str
    clo_class: int

    def __post_init__(self) -> None:
        if not self.image_path:
            raise ValidationError("manifest entry has an empty image path")
        if self.clo_class not in range(NUM_CLASSES):
            raise ValidationError(
                f"clo class must be in 0..{NUM_CLASSES - 1}, got {self.clo_class}"
            )


@dataclass(frozen=True)
class MappingRule:
    pattern: str
    clo_class: int

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValidationError("mapping rule has an empty pattern")
        if self.clo_class not in range(NUM_CLASSES):
            raise ValidationError(f"mapping rule targets invalid class {self.clo_class}")

    def matches(self, label: str) -> bool:
        return fnmatch.fnmatch(label.lower(), self.pattern.lower())


@dataclass(frozen=True)
class MappingTable:
    """Ordered first-match-wins rules plus the unmatched-label policy."""

    rules: tuple[MappingRule, ...]
    unmatched: str = "error"  # or "skip"

    def __post_init__(self) -> None:
        if not self.rules:
            raise ValidationError("mapping table has no rules")
        if self.unmatched not in ("error", "skip"):
            raise ValidationError(f"unmatched policy must be 'error' or 'skip', got {self.unmatched!r}")

    def lookup(self, label: str) -> int | None:
        for rule in self.rules:
            if rule.matches(label):
                return rule.clo_class
        return None

    @classmethod
    def from_json(cls, text: str, unmatched: str = "error") -> "MappingTable":
        try:
            raw = json.loads(text)
            rules = tuple(MappingRule(str(r["pattern"]), int(r["clo_class"])) for r in raw)
        except (ValueError, KeyError, TypeError) as exc:
            raise ManifestFormatError(f"malformed mapping table: {exc}") from exc
        return cls(rules=rules, unmatched=unmatched)

    @classmethod
    def load(cls, path: str, unmatched: str = "error") -> "MappingTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read(), unmatched=unmatched)


def default_mapping(unmatched: str = "error") -> MappingTable:
    """Best-effort DeepFashion rules shipped with the package.

    The exact source-label assignment behind the published class counts is
    not public; this default is a documented assumption, editable by users.
    """
    text = resources.files("cloakvit").joinpath("data/deepfashion_clo_mapping.json").read_text()
    return MappingTable.from_json(text, unmatched=unmatched)


@dataclass(frozen=True)
class RemapReport:
    class_counts: tuple[int, ...]
    unmatched_labels: tuple[str, ...]
    skipped: int

    @property
    def total(self) -> int:
        return sum(self.class_counts)


def remap_labels(
    records: list[tuple[str, str]], table: MappingTable
) -> tuple[list[ManifestEntry], RemapReport]:
    """Map (image_path, source_label) records into manifest entries.

    Unmatched labels either raise (policy ``error``, the message names the
    label) or are dropped and counted (policy ``skip``).
    """
    entries: list[ManifestEntry] = []
    counts = [0] * NUM_CLASSES
    unmatched: Counter[str] = Counter()
    for path, label in records:
        clo_class = table.lookup(label)
        if clo_class is None:
            if table.unmatched == "error":
                raise ValidationError(
                    f"source label {label!r} matches no mapping rule "
                    "(set the unmatched policy to 'skip' to drop such entries)"
                )
            unmatched[label] += 1
            continue
        entries.append(ManifestEntry(path, label, clo_class))
        counts[clo_class] += 1
    report = RemapReport(
        class_counts=tuple(counts),
        unmatched_labels=tuple(sorted(unmatched)),
        skipped=sum(unmatched.values()),
    )
    return entries, report


def split(
    entries: list[ManifestEntry], train_fraction: float, seed: int
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Deterministic shuffled partition: first floor(n*fraction) entries train.

    The shuffle is the same keyed Fisher-Yates used everywhere else, so the
    split depends only on (manifest order, fraction, seed).
    """
    check_fraction(train_fraction, name="train fraction")
    if not entries:
        raise ValidationError("cannot split an empty manifest")
    perm = gen_permutation(seed, len(entries))
    shuffled = perm.apply(list(entries))
    cut = int(len(entries) * train_fraction)
    return shuffled[:cut], shuffled[cut:]


@dataclass(frozen=True)
class ManifestSummary:
    class_counts: tuple[int, ...]
    total: int
    reference_counts: tuple[int, ...] = REFERENCE_CLASS_COUNTS
    reference_total: int = REFERENCE_TOTAL_IMAGES

    @property
    def percentages(self) -> tuple[float, ...]:
        if self.total == 0:
            return tuple(0.0 for _ in self.class_counts)
        return tuple(100.0 * c / self.total for c in self.class_counts)

    @property
    def reference_count_gap(self) -> int:
        """Published per-class counts minus the published total (known: 126)."""
        return sum(self.reference_counts) - self.reference_total

    def to_dict(self) -> dict:
        return {
            "class_counts": {
                cat.name: count for cat, count in zip(CLO_CATEGORIES, self.class_counts)
            },
            "total": self.total,
            "percentages": {
                cat.name: round(pct, 2) for cat, pct in zip(CLO_CATEGORIES, self.percentages)
            },
            "reference": {
                "class_counts": list(self.reference_counts),
                "class_counts_sum": sum(self.reference_counts),
                "published_total": self.reference_total,
                "count_gap": self.reference_count_gap,
            },
        }

    def to_text(self) -> str:
        lines = [f"{'class':<20}{'count':>8}{'share':>9}{'reference':>11}"]
        for cat, count, pct, ref in zip(
            CLO_CATEGORIES, self.class_counts, self.percentages, self.reference_counts
        ):
            lines.append(f"{cat.name:<20}{count:>8}{pct:>8.2f}%{ref:>11}")
        lines.append(f"{'total':<20}{self.total:>8}{'':>9}{sum(self.reference_counts):>11}")
        lines.append(
            f"note: reference per-class counts sum to {sum(self.reference_counts)} but the "
            f"published dataset total is {self.reference_total} "
            f"(unexplained gap of {self.reference_count_gap})"
        )
        return "\n".join(lines)


def summarize(entries: list[ManifestEntry]) -> ManifestSummary:
    counts = [0] * NUM_CLASSES
    for entry in entries:
        counts[entry.clo_class] += 1
    return ManifestSummary(class_counts=tuple(counts), total=len(entries))


def read_manifest(path: str) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ManifestFormatError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            try:
                entries.append(ManifestEntry(parts[0], parts[1], int(parts[2])))
            except (ValueError, ValidationError) as exc:
                raise ManifestFormatError(f"{path}:{lineno}: {exc}") from exc
    return entries


def write_manifest(entries: list[ManifestEntry], path: str) -> None:
    lines = [f"{e.image_path}\t{e.source_label}\t{e.clo_class}" for e in entries]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_label_listing(path: str) -> list[tuple[str, str]]:
    """Raw remap input: ``image_path<TAB>source_label`` per line, # comments."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ManifestFormatError(
                    f"{path}:{lineno}: expected 2 tab-separated fields, got {len(parts)}"
                )
            records.append((parts[0], parts[1]))
    return records
