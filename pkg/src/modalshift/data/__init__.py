"""Bundled default input files (survey summary, expert scores, tariffs,
demo scenarios)."""

from importlib import resources


def data_path(name: str):
    """Filesystem path of a bundled data file."""
    return resources.files(__package__) / name
