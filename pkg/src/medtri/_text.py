"""Small text and file helpers shared across modules."""

from __future__ import annotations

import hashlib
import os
import re
import tempfile
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

_WS = re.compile(r"\s+")
_WORD = re.compile(r"[a-z0-9]+(?:['\-][a-z0-9]+)*")


def collapse_ws(text: str) -> str:
    """Collapse runs of whitespace to single spaces and trim both ends."""
    return _WS.sub(" ", text).strip()


def source_hash(text: str) -> str:
    """SHA-256 hex digest of ``text`` after whitespace collapsing."""
    return hashlib.sha256(collapse_ws(text).encode("utf-8")).hexdigest()


def words(text: str) -> list[str]:
    """Lowercased word tokens used for whole-word phrase lookup."""
    return _WORD.findall(text.lower())


class PhraseIndex:
    """Whole-word, case-insensitive phrase lookup with longest-match semantics.

    Phrases are keyed by their word sequence, so ``"Pleural  Effusion"`` and
    ``"pleural effusion"`` are the same key, and a phrase never matches inside
    a longer word.
    """

    def __init__(self):
        self._table: dict[str, object] = {}
        # first word -> phrase lengths (in words) starting with it, longest first
        self._starts: dict[str, tuple[int, ...]] = {}
        self.max_words = 0

    @staticmethod
    def key(phrase: str) -> str:
        return " ".join(words(phrase))

    def add(self, phrase: str, value) -> None:
        k = self.key(phrase)
        if not k:
            raise ValueError(f"phrase {phrase!r} has no word characters")
        self._table[k] = value
        parts = k.split(" ")
        lens = set(self._starts.get(parts[0], ())) | {len(parts)}
        self._starts[parts[0]] = tuple(sorted(lens, reverse=True))
        self.max_words = max(self.max_words, len(parts))

    def __contains__(self, phrase: str) -> bool:
        return self.key(phrase) in self._table

    def get(self, phrase: str):
        return self._table.get(self.key(phrase))

    def _scan(self, text: str) -> Iterator[tuple[int, int, object]]:
        """Yield ``(word_index, n_words, value)`` for the longest phrase starting at each word."""
        toks = words(text)
        n = len(toks)
        table, starts = self._table, self._starts
        for i, tok in enumerate(toks):
            for k in starts.get(tok, ()):
                if k > n - i:
                    continue
                hit = table.get(tok if k == 1 else " ".join(toks[i : i + k]))
                if hit is not None:
                    yield i, k, hit
                    break

    def first(self, text: str):
        """Earliest match in ``text``; ties at one position go to the longest phrase."""
        # same walk as _scan, inlined: this sits on the rule backend's hot path
        toks = words(text)
        n = len(toks)
        table, starts = self._table, self._starts
        for i, tok in enumerate(toks):
            ks = starts.get(tok)
            if ks is None:
                continue
            for k in ks:
                if k <= n - i:
                    hit = table.get(tok if k == 1 else " ".join(toks[i : i + k]))
                    if hit is not None:
                        return hit
        return None

    def longest(self, text: str):
        """Longest (most words) match anywhere in ``text``; ties go to the earliest."""
        best = None
        best_len = 0
        for _, k, value in self._scan(text):
            if k > best_len:
                best, best_len = value, k
        return best


def read_phrase_list(path: str | os.PathLike) -> list[str]:
    """Read a one-phrase-per-line file, skipping blanks and ``#`` comments."""
    with open(path, encoding="utf-8") as fh:
        return _parse_phrase_lines(fh)


def _parse_phrase_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def data_path(name: str) -> Path:
    return Path(str(resources.files("medtri") / "data" / name))


def default_phrase_list(name: str) -> list[str]:
    return read_phrase_list(data_path(name))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


class AtomicLineWriter:
    """Stream lines into a temp file; rename onto the target on successful close.

    On an exception inside the ``with`` block the temp file is removed and the
    target is left untouched.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._fh = None
        self._tmp = None
        self.count = 0

    def __enter__(self):
        fd, self._tmp = tempfile.mkstemp(
            dir=self.path.parent or ".", prefix=f".{self.path.name}.", suffix=".tmp"
        )
        self._fh = os.fdopen(fd, "w", encoding="utf-8", newline="\n")
        return self

    def write(self, line: str) -> None:
        self._fh.write(line)
        self._fh.write("\n")
        self.count += 1

    def __exit__(self, exc_type, exc, tb):
        self._fh.close()
        if exc_type is None:
            os.replace(self._tmp, self.path)
        else:
            os.unlink(self._tmp)
        return False
