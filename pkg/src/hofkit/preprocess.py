"""Deterministic tweet normalization.

The pipeline turns a raw tweet into a list of tokens:

    html entities -> placeholders (mentions, retweets, urls) -> junk removal
    -> repeat-character collapse -> tokenization -> Devanagari stemming

Every step is a pure function on strings, so the whole pipeline is safe to
call concurrently and produces byte-identical output for identical input.
"""

from __future__ import annotations

import re
import unicodedata
from importlib import resources

__all__ = [
    "PLACEHOLDERS",
    "deidentify",
    "fix_repeats",
    "remove_invalid",
    "html_unescape",
    "stem_hindi",
    "tokenize",
    "preprocess",
    "load_suffix_table",
    "default_suffix_table",
]

# Placeholder tokens emitted by deidentify. They are ordinary lowercase Latin
# strings so they survive tokenization and lowercasing unchanged.
PLACEHOLDERS = ("xxatp", "xxurl", "xxrtm", "xxrtu", "xxunk", "xxpad")

# Retweet/modified-tweet markers are matched case-sensitively (Twitter uses
# uppercase RT/MT); the pattern swallows trailing whitespace so the
# replacement never glues onto the following word.
_RT_RE = re.compile(r"\bRT\s+@\w+:?\s*")
_MT_RE = re.compile(r"\bMT\s+@\w+:?\s*")
# URL grammar: a scheme followed by a non-space run, or a bare t.co link.
_URL_RE = re.compile(r"https?://\S+|\bt\.co/\S+")
# Mention grammar: @ followed by at least one word character.
_MENTION_RE = re.compile(r"@\w+")

_WS_RE = re.compile(r"\s+")
_REPEAT_RE = re.compile(r"(.)\1{2,}", re.DOTALL)

# Markup-ish junk becomes a space (it separated words in the source markup);
# invisible characters are dropped outright so they never split a word.
_BLOCKLIST_TO_SPACE = ("<br/>", "<br>", "<unk>", "@-@")
_BLOCKLIST_TO_EMPTY = ("​", "‌", "‍", "﻿")

_NAMED_ENTITIES = {
    "amp": "&",
    "lt": "<",
    "gt": ">",
    "quot": '"',
    "apos": "'",
    "nbsp": " ",
}
_ENTITY_RE = re.compile(r"&(#[0-9]+|#[xX][0-9a-fA-F]+|[a-zA-Z]+);")

_DEVANAGARI_LO = 0x0900
_DEVANAGARI_HI = 0x097F


def html_unescape(text: str) -> str:
    """Decode decimal/hex character references and six common named entities.

    Unknown entities are left verbatim. Decoding repeats until the text is
    stable, so double-escaped input like ``&amp;#64;`` fully resolves to
    ``@`` before any placeholder matching runs.
    """

    def _decode(m: re.Match) -> str:
        body = m.group(1)
        if body.startswith("#"):
            try:
                code = int(body[2:], 16) if body[1] in "xX" else int(body[1:])
                return chr(code)
            except (ValueError, OverflowError):
                return m.group(0)
        return _NAMED_ENTITIES.get(body, m.group(0))

    while True:
        decoded = _ENTITY_RE.sub(_decode, text)
        if decoded == text:
            return decoded
        text = decoded


def deidentify(text: str) -> str:
    """Replace retweet markers, mentions, and URLs with placeholder tokens."""
    text = _RT_RE.sub("xxrtu ", text)
    text = _MT_RE.sub("xxrtm ", text)
    text = _URL_RE.sub("xxurl", text)
    text = _MENTION_RE.sub("xxatp", text)
    return text


def remove_invalid(text: str) -> str:
    """Strip blocklisted junk and collapse whitespace runs to single spaces."""
    for junk in _BLOCKLIST_TO_SPACE:
        text = text.replace(junk, " ")
    for junk in _BLOCKLIST_TO_EMPTY:
        text = text.replace(junk, "")
    return _WS_RE.sub(" ", text).strip()


def fix_repeats(text: str) -> str:
    """Collapse every run of 3+ identical scalars to exactly 2 (goooood -> good)."""
    return _REPEAT_RE.sub(r"\1\1", text)


def load_suffix_table(path) -> tuple[str, ...]:
    """Read a suffix table: UTF-8, one suffix per line, ``#`` comment lines.

    The returned table is sorted longest-first regardless of file order.
    """
    suffixes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            suffixes.append(line)
    return tuple(sorted(suffixes, key=lambda s: (-len(s), s)))


def default_suffix_table() -> tuple[str, ...]:
    """Suffix table shipped with the package."""
    ref = resources.files("hofkit").joinpath("data/hindi_suffixes.txt")
    with resources.as_file(ref) as path:
        return load_suffix_table(path)


_DEFAULT_SUFFIXES: tuple[str, ...] | None = None


def _suffixes() -> tuple[str, ...]:
    global _DEFAULT_SUFFIXES
    if _DEFAULT_SUFFIXES is None:
        _DEFAULT_SUFFIXES = default_suffix_table()
    return _DEFAULT_SUFFIXES


def _is_devanagari(token: str) -> bool:
    return bool(token) and all(
        _DEVANAGARI_LO <= ord(c) <= _DEVANAGARI_HI for c in token
    )


def stem_hindi(word: str, suffixes: tuple[str, ...] | None = None) -> str:
    """Suffix-stripping stemmer for Devanagari tokens.

    Repeatedly strips the longest matching table suffix while the remaining
    stem keeps at least one character; iterating to a fixed point makes
    stemming idempotent, which the pipeline relies on. Non-Devanagari tokens
    pass through unchanged.
    """
    if suffixes is None:
        suffixes = _suffixes()
    if not _is_devanagari(word):
        return word
    while True:
        for suf in suffixes:
            if len(word) > len(suf) and word.endswith(suf):
                word = word[: -len(suf)]
                break
        else:
            return word


def _split_punct(token: str) -> list[str]:
    """Detach leading/trailing punctuation runs as separate tokens."""
    n = len(token)
    start = 0
    while start < n and unicodedata.category(token[start]).startswith("P"):
        start += 1
    if start == n:  # all punctuation: keep the run whole
        return [token]
    end = n
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    parts = []
    if start > 0:
        parts.append(token[:start])
    parts.append(token[start:end])
    if end < n:
        parts.append(token[end:])
    return parts


def tokenize(text: str) -> list[str]:
    """Whitespace-split, detach edge punctuation, lowercase (Devanagari has no case)."""
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_punct(chunk.lower()))
    return tokens


# Adversarial inputs (case-mixed repeats, stacked mentions) need a second
# round before the token stream stabilizes; the cap only guards pathology.
_MAX_ROUNDS = 8


def _preprocess_once(text: str, suffixes: tuple[str, ...] | None) -> list[str]:
    text = html_unescape(text)
    text = deidentify(text)
    text = remove_invalid(text)
    text = fix_repeats(text)
    return [stem_hindi(tok, suffixes) for tok in tokenize(text)]


def preprocess(text: str, suffixes: tuple[str, ...] | None = None) -> list[str]:
    """Full normalization pipeline; returns the token stream for one tweet.

    The rule chain is applied in a fixed order and repeated until the token
    stream is a fixed point, so preprocessing its own output is always a
    no-op.
    """
    tokens = _preprocess_once(text, suffixes)
    for _ in range(_MAX_ROUNDS - 1):
        again = _preprocess_once(" ".join(tokens), suffixes)
        if again == tokens:
            break
        tokens = again
    return tokens
