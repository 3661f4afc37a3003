"""Text normalization shared by the diff, pipeline and metric code."""

import re
import unicodedata

_WS = re.compile(r"\s+")
_TOKEN = re.compile(r"[^\W_]+")


def collapse_whitespace(text: str) -> str:
    return _WS.sub(" ", text).strip()


def normalize_text(text: str) -> str:
    """Key used for sentence/unit equality: NFKC, lowercase, collapsed whitespace."""
    return collapse_whitespace(unicodedata.normalize("NFKC", text).lower())


def tokenize(text: str) -> list[str]:
    """NFKC + lowercase, split on runs of non-alphanumeric characters."""
    return _TOKEN.findall(unicodedata.normalize("NFKC", text).lower())


def normalize_title(target: str) -> str:
    """Link target -> page id: underscores to spaces, first letter uppercased."""
    target = collapse_whitespace(target.replace("_", " "))
    if not target:
        return target
    return target[0].upper() + target[1:]
