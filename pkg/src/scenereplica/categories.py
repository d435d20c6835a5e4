"""Open-vocabulary object names merged into a fixed category universe.

The shipped map folds raw scan labels into 60 categories, 25 of which
describe large furniture able to anchor a micro-scene; 8 categories sit
in both groups. Unknown names fall back to "object".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, Union

from .errors import PreconditionError

FALLBACK_CATEGORY = "object"
MERGED_CATEGORY_COUNT = 60
LARGE_CATEGORY_COUNT = 25


@dataclass
class CategoryMap:
    categories: FrozenSet[str]
    large: FrozenSet[str]
    aliases: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "categories", frozenset(self.categories))
        object.__setattr__(self, "large", frozenset(self.large))
        if FALLBACK_CATEGORY not in self.categories:
            raise PreconditionError(f"category universe must include {FALLBACK_CATEGORY!r}")
        extra = self.large - self.categories
        if extra:
            raise PreconditionError(f"large categories outside the universe: {sorted(extra)}")
        bad_targets = {v for v in self.aliases.values() if v not in self.categories}
        if bad_targets:
            raise PreconditionError(f"aliases target unknown categories: {sorted(bad_targets)}")

    @staticmethod
    def _normalize(raw: str) -> str:
        return raw.strip().lower().replace(" ", "_").replace("-", "_")

    def merge(self, raw_name: str) -> str:
        """Merged category for a raw label; unknown names become "object"."""
        name = self._normalize(raw_name)
        if name in self.categories:
            return name
        return self.aliases.get(name, FALLBACK_CATEGORY)

    def is_large(self, category: str) -> bool:
        return self._normalize(category) in self.large

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "categories": sorted(self.categories),
            "large": sorted(self.large),
            "aliases": {k: self.aliases[k] for k in sorted(self.aliases)},
        }

    @staticmethod
    def from_dict(data: dict) -> "CategoryMap":
        return CategoryMap(
            categories=frozenset(data["categories"]),
            large=frozenset(data["large"]),
            aliases=dict(data.get("aliases", {})),
        )

    @staticmethod
    def load(path: Union[str, Path]) -> "CategoryMap":
        return CategoryMap.from_dict(json.loads(Path(path).read_text()))


def default_category_map() -> CategoryMap:
    """The shipped 60-category map (25 large, 43 small, 8 shared)."""
    payload = resources.files("scenereplica").joinpath("data/categories.json").read_text()
    cmap = CategoryMap.from_dict(json.loads(payload))
    if len(cmap.categories) != MERGED_CATEGORY_COUNT:
        raise PreconditionError(
            f"shipped map has {len(cmap.categories)} categories, expected {MERGED_CATEGORY_COUNT}"
        )
    if len(cmap.large) != LARGE_CATEGORY_COUNT:
        raise PreconditionError(
            f"shipped map has {len(cmap.large)} large categories, expected {LARGE_CATEGORY_COUNT}"
        )
    return cmap
