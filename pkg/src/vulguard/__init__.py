"""Mine Git histories into commit-level vulnerability prediction datasets."""

from __future__ import annotations

__version__ = "0.1.0"
