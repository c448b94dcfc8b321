"""Access to the operator fixtures bundled with the package."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

from .opspec import OperatorSpec, load_spec


def fixture_dir() -> Path:
    return Path(str(files("vertab") / "fixtures"))


def fixture_names() -> list[str]:
    return sorted(p.stem for p in fixture_dir().glob("*.json"))


def fixture_path(name: str) -> Path:
    path = fixture_dir() / f"{name}.json"
    if not path.exists():
        raise KeyError(f"no bundled fixture named {name!r}")
    return path


def load_fixture(name: str) -> OperatorSpec:
    return load_spec(fixture_path(name).read_text(encoding="utf-8"))


def load_all_fixtures() -> list[OperatorSpec]:
    return [load_fixture(name) for name in fixture_names()]
