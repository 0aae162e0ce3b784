"""Storage for run artifacts and the run registry."""
from src.storage.artifacts import load_bundle, load_field, read_container, save_bundle, save_field, write_container
from src.storage.file_storage import ArtifactStore, content_key
from src.storage.run_registry import RunRegistry, run_registry

__all__ = [
    "ArtifactStore",
    "content_key",
    "RunRegistry",
    "run_registry",
    "write_container",
    "read_container",
    "save_bundle",
    "load_bundle",
    "save_field",
    "load_field",
]
