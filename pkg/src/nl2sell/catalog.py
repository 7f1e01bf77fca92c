"""Tag catalog: the schema of user-profile attributes conditions select on."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union


class ValueType(enum.Enum):
    NUMERIC = "numeric"
    STRING = "string"
    BOOLEAN = "boolean"


@dataclass(frozen=True)
class TagDef:
    """One tag: a named user attribute with a value type.

    `allowed_values` closes the value set of a string tag; `multi_valued`
    marks string tags that hold a set per user (e.g. a preference list).
    `sample_range` bounds the integers drawn when synthesizing conditions
    for a numeric tag.
    """

    name: str
    value_type: ValueType
    allowed_values: Optional[tuple[str, ...]] = None
    multi_valued: bool = False
    description: Optional[str] = None
    sample_range: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("tag name must be non-empty")
        if self.allowed_values is not None and self.value_type is not ValueType.STRING:
            raise ValueError(f"allowed_values only applies to string tags: {self.name}")
        if self.multi_valued and self.value_type is not ValueType.STRING:
            raise ValueError(f"multi_valued only applies to string tags: {self.name}")
        if self.sample_range is not None:
            lo, hi = self.sample_range
            if lo > hi:
                raise ValueError(f"sample_range out of order for {self.name}")


class TagCatalog:
    """Ordered collection of TagDefs with unique, case-insensitively unique names.

    Lookups are case-insensitive: deployed model output drifts in casing
    (e.g. "Days of Listening To Audiobooks" vs "Days of listening to
    audiobooks") and must still hit the same tag.
    """

    def __init__(self, tags: Sequence[TagDef]):
        self.tags = tuple(tags)
        self._by_folded: dict[str, TagDef] = {}
        for tag in self.tags:
            folded = tag.name.casefold()
            if folded in self._by_folded:
                raise ValueError(f"duplicate tag name: {tag.name!r}")
            self._by_folded[folded] = tag

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)

    def get(self, name: str) -> Optional[TagDef]:
        return self._by_folded.get(name.strip().casefold())

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    # -- persistence (JSON array of tag objects) ----------------------------

    @staticmethod
    def from_json_obj(items: list[dict]) -> "TagCatalog":
        tags = []
        for item in items:
            tags.append(
                TagDef(
                    name=item["name"],
                    value_type=ValueType(item["value_type"]),
                    allowed_values=tuple(item["allowed_values"]) if item.get("allowed_values") else None,
                    multi_valued=bool(item.get("multi_valued", False)),
                    description=item.get("description"),
                    sample_range=tuple(item["sample_range"]) if item.get("sample_range") else None,
                )
            )
        return TagCatalog(tags)

    def to_json_obj(self) -> list[dict]:
        out = []
        for tag in self.tags:
            item: dict = {"name": tag.name, "value_type": tag.value_type.value}
            if tag.allowed_values is not None:
                item["allowed_values"] = list(tag.allowed_values)
            if tag.multi_valued:
                item["multi_valued"] = True
            if tag.description is not None:
                item["description"] = tag.description
            if tag.sample_range is not None:
                item["sample_range"] = list(tag.sample_range)
            out.append(item)
        return out


def load_catalog(path: Union[str, Path]) -> TagCatalog:
    with open(path, encoding="utf-8") as fh:
        return TagCatalog.from_json_obj(json.load(fh))


def save_catalog(catalog: TagCatalog, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(catalog.to_json_obj(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
