"""Error type shared across the package.

Every failure that callers are expected to handle carries a stable
machine-readable ``code`` (e.g. ``E_BAD_MAPPING_LENGTH``) next to the
human-readable message, so the CLI can map failures to exit codes and
tests can assert on causes without string matching.
"""

from __future__ import annotations


class DseError(Exception):
    """Invalid input or failed operation, tagged with a stable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
