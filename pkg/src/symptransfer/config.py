"""Plain-text ``[section]`` / ``key = value`` configuration files.

configparser drops line numbers once a file is parsed, and every
diagnostic here has to name the file, line and field, so this is a small
line-oriented reader instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    def __init__(self, path, line: int | None, field_name: str | None, message: str):
        self.path, self.line, self.field = str(path), line, field_name
        where = self.path if line is None else f"{self.path}:{line}"
        what = f" [{field_name}]" if field_name else ""
        super().__init__(f"{where}:{what} {message}")


@dataclass
class Section:
    kind: str
    title: str
    line: int
    path: str
    entries: dict[str, tuple[str, int]] = field(default_factory=dict)

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str, default=None):
        return self.entries[key][0] if key in self.entries else default

    def error(self, key: str | None, message: str) -> ConfigError:
        line = self.entries[key][1] if key in self.entries else self.line
        return ConfigError(self.path, line, key, message)

    def get(self, key: str, convert=str, default=...):
        if key not in self.entries:
            if default is ...:
                raise self.error(None, f"missing required key '{key}' in [{self.header}]")
            return default
        text, _ = self.entries[key]
        try:
            return convert(text)
        except (ValueError, TypeError) as e:
            raise self.error(key, f"invalid value {text!r}: {e}") from None

    def keys_with_prefix(self, prefix: str) -> list[str]:
        return [k for k in self.entries if k.startswith(prefix)]

    @property
    def header(self) -> str:
        return f"{self.kind} {self.title}".strip()


def parse_config(text: str, path="<config>") -> list[Section]:
    sections: list[Section] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(path, lineno, None, f"unterminated section header {line!r}")
            inner = line[1:-1].strip()
            if not inner:
                raise ConfigError(path, lineno, None, "empty section header")
            kind, _, title = inner.partition(" ")
            current = Section(kind.lower(), title.strip(), lineno, str(path))
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(path, lineno, None, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(path, lineno, None, "key outside of any section")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(path, lineno, None, "empty key")
        if key in current.entries:
            raise ConfigError(path, lineno, key, "duplicate key")
        current.entries[key] = (value.strip(), lineno)
    return sections


def read_config(path) -> list[Section]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(path, None, None, f"cannot read: {e.strerror}") from None
    return parse_config(text, path)


def parse_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_floats(text: str) -> list[float]:
    return [float(t) for t in parse_list(text)]


def parse_ratio(text: str) -> float:
    """``"4:1"`` -> 4.0, ``"2"`` -> 2.0; must be positive."""
    text = text.strip()
    if ":" in text:
        a, _, b = text.partition(":")
        value = float(a) / float(b)
    else:
        value = float(text)
    if not value > 0 or value == float("inf"):
        raise ValueError("ratio must be positive and finite")
    return value


def format_ratio(value: float) -> str:
    return f"{value:g}:1"
