"""
Version lookup for source trees. Builds replace this file with the version
computed by versioneer from the git tag (prefix "v").
"""

from importlib.metadata import PackageNotFoundError, version


def get_versions() -> dict[str, str | None]:
    try:
        found = version("fieldroad")
    except PackageNotFoundError:
        found = "0+unknown"
    return {"version": found, "full-revisionid": None, "dirty": None, "error": None, "date": None}
