"""File storage for run outputs: JSON, CSV tables, binary artifacts and a content-hash cache."""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from src.operators.value_field import ValueField
from src.sde_sim.simulator import PathBundle
from src.storage import artifacts
from src.utils import logger, settings


def content_key(section: Dict[str, Any], seed: int) -> str:
    """sha256 of the canonical JSON of a config section plus the seed."""
    canonical = json.dumps({"section": section, "seed": seed}, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ArtifactStore:
    """Write everything one run produces under a single directory."""

    def __init__(self, root: Optional[str] = None, cache_dir: Optional[str] = None):
        """Initialize the store."""
        self.root = Path(root or settings.output_dir)
        self.cache_path = Path(cache_dir or settings.cache_dir)
        self.logger = logger

        self.root.mkdir(parents=True, exist_ok=True)
        self.cache_path.mkdir(parents=True, exist_ok=True)

    def _target(self, filename: str, subdirectory: Optional[str]) -> Path:
        path = self.root / subdirectory / filename if subdirectory else self.root / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def save_json(self, data: Dict[str, Any], filename: str, subdirectory: Optional[str] = None) -> Path:
        """Save data as JSON file."""
        save_path = self._target(filename, subdirectory)
        with open(save_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True, default=str)
        self.logger.debug(f"Saved JSON to {save_path}")
        return save_path

    def save_table(self, frame: pd.DataFrame, filename: str, subdirectory: Optional[str] = None) -> Path:
        """CSV with a fixed float format, so repeated runs give identical bytes."""
        save_path = self._target(filename, subdirectory)
        frame.to_csv(save_path, index=False, float_format=settings.csv_float_format, lineterminator="\n")
        self.logger.debug(f"Saved table to {save_path}")
        return save_path

    def load_json(self, filename: str, subdirectory: Optional[str] = None) -> Dict[str, Any]:
        load_path = self.root / subdirectory / filename if subdirectory else self.root / filename
        with open(load_path, "r", encoding="utf-8") as f:
            return json.load(f)

    def save_bundle(self, bundle: PathBundle, filename: str, subdirectory: Optional[str] = None) -> Path:
        return artifacts.save_bundle(self._target(filename, subdirectory), bundle)

    def save_field(self, field: ValueField, filename: str, subdirectory: Optional[str] = None,
                   meta: Optional[Dict[str, Any]] = None) -> Path:
        return artifacts.save_field(self._target(filename, subdirectory), field, meta)

    # content-hash cache

    def cache_file(self, kind: str, key: str) -> Path:
        return self.cache_path / f"{kind}-{key[:32]}.jbsd"

    def cached_bundle(self, section: Dict[str, Any], seed: int) -> Optional[PathBundle]:
        path = self.cache_file("bundle", content_key(section, seed))
        if path.exists():
            self.logger.debug(f"bundle cache hit: {path.name}")
            return artifacts.load_bundle(path)
        return None

    def store_bundle(self, section: Dict[str, Any], seed: int, bundle: PathBundle) -> Path:
        return artifacts.save_bundle(self.cache_file("bundle", content_key(section, seed)), bundle)

    def cached_field(self, section: Dict[str, Any], seed: int) -> Optional[ValueField]:
        path = self.cache_file("field", content_key(section, seed))
        if path.exists():
            self.logger.debug(f"field cache hit: {path.name}")
            return artifacts.load_field(path)
        return None

    def store_field(self, section: Dict[str, Any], seed: int, field: ValueField) -> Path:
        return artifacts.save_field(self.cache_file("field", content_key(section, seed)), field)

