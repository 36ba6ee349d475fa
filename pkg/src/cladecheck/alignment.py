"""Sequence alignments and site-pattern tables.

Alignments hold one equal-length DNA sequence per labeled leaf, encoded
A=0, C=1, G=2, T=3.  A PatternTable is the alignment compressed to distinct
columns with multiplicities; likelihood evaluation works on patterns so the
cost scales with distinct columns rather than raw sites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jc69 import NUCLEOTIDES

__all__ = [
    "Alignment",
    "AlignmentError",
    "PatternTable",
    "compress",
    "parse_fasta",
    "read_fasta",
    "parse_phylip",
    "read_phylip",
]

_CODE = {c: i for i, c in enumerate(NUCLEOTIDES)}
_CODE.update({c.lower(): i for i, c in enumerate(NUCLEOTIDES)})


class AlignmentError(ValueError):
    pass


@dataclass(eq=False)
class Alignment:
    """labels[i] names row i of codes, an (m, n_sites) uint8 matrix."""

    labels: tuple[str, ...]
    codes: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.codes = np.ascontiguousarray(self.codes, dtype=np.uint8)
        if self.codes.ndim != 2 or self.codes.shape[0] != len(self.labels):
            raise AlignmentError("codes must be one row per label")
        if self.codes.shape[1] < 1:
            raise AlignmentError("alignment needs at least one site")
        if len(set(self.labels)) != len(self.labels):
            raise AlignmentError("duplicate sequence labels")
        if self.codes.size and self.codes.max() > 3:
            raise AlignmentError("sequence codes must be 0..3")

    @property
    def n_sites(self) -> int:
        return int(self.codes.shape[1])

    @classmethod
    def from_sequences(cls, items) -> "Alignment":
        """Build from (label, sequence-string) pairs."""
        labels = []
        rows = []
        length = None
        for label, seq in items:
            if length is None:
                length = len(seq)
            elif len(seq) != length:
                raise AlignmentError(
                    f"sequence {label!r} has length {len(seq)}, expected {length}"
                )
            row = np.empty(len(seq), dtype=np.uint8)
            for k, ch in enumerate(seq):
                code = _CODE.get(ch)
                if code is None:
                    raise AlignmentError(
                        f"sequence {label!r} contains unsupported character {ch!r}"
                    )
                row[k] = code
            labels.append(label)
            rows.append(row)
        if not rows:
            raise AlignmentError("no sequences")
        return cls(tuple(labels), np.vstack(rows))

    def sequence(self, label: str) -> str:
        row = self.codes[self.labels.index(label)]
        return "".join(NUCLEOTIDES[c] for c in row)

    def to_fasta(self, width: int = 60) -> str:
        chunks = []
        for i, label in enumerate(self.labels):
            chunks.append(f">{label}")
            seq = "".join(NUCLEOTIDES[c] for c in self.codes[i])
            for k in range(0, len(seq), width):
                chunks.append(seq[k : k + width])
        return "\n".join(chunks) + "\n"


@dataclass(eq=False)
class PatternTable:
    """Distinct alignment columns with counts; column order of ``patterns``
    follows ``labels``."""

    labels: tuple[str, ...]
    patterns: np.ndarray  # (n_patterns, m) uint8
    counts: np.ndarray  # (n_patterns,) int64

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.patterns = np.ascontiguousarray(self.patterns, dtype=np.uint8)
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if self.patterns.shape[0] != self.counts.shape[0]:
            raise AlignmentError("patterns and counts disagree")
        if (self.counts < 1).any():
            raise AlignmentError("pattern counts must be positive")

    @property
    def n_sites(self) -> int:
        return int(self.counts.sum())

    @property
    def n_patterns(self) -> int:
        return int(self.patterns.shape[0])


def compress(alignment: Alignment) -> PatternTable:
    """Merge identical columns; deterministic (lexicographic) pattern order."""
    cols = np.ascontiguousarray(alignment.codes.T)
    patterns, counts = np.unique(cols, axis=0, return_counts=True)
    return PatternTable(alignment.labels, patterns, counts.astype(np.int64))


def parse_fasta(text: str) -> Alignment:
    items: list[tuple[str, str]] = []
    label = None
    parts: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if label is not None:
                items.append((label, "".join(parts)))
            label = line[1:].strip().split()[0] if line[1:].strip() else ""
            if not label:
                raise AlignmentError("empty FASTA header")
            parts = []
        else:
            if label is None:
                raise AlignmentError("sequence data before first FASTA header")
            parts.append(line)
    if label is not None:
        items.append((label, "".join(parts)))
    if not items:
        raise AlignmentError("no FASTA records found")
    return Alignment.from_sequences(items)


def read_fasta(path) -> Alignment:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_fasta(fh.read())


def parse_phylip(text: str) -> Alignment:
    """Relaxed sequential PHYLIP: a 'm n' header line, then for each taxon a
    whitespace-separated name followed by sequence chunks (wrapping allowed)."""
    tokens = text.split()
    if len(tokens) < 2:
        raise AlignmentError("missing PHYLIP header")
    try:
        m, n = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise AlignmentError("PHYLIP header must be two integers") from exc
    idx = 2
    items: list[tuple[str, str]] = []
    for _ in range(m):
        if idx >= len(tokens):
            raise AlignmentError("unexpected end of PHYLIP data")
        label = tokens[idx]
        idx += 1
        parts: list[str] = []
        have = 0
        while have < n:
            if idx >= len(tokens):
                raise AlignmentError(f"sequence {label!r} shorter than {n}")
            parts.append(tokens[idx])
            have += len(tokens[idx])
            idx += 1
        seq = "".join(parts)
        if len(seq) != n:
            raise AlignmentError(f"sequence {label!r} has length {len(seq)}, expected {n}")
        items.append((label, seq))
    if idx != len(tokens):
        raise AlignmentError("trailing tokens after PHYLIP records")
    return Alignment.from_sequences(items)


def read_phylip(path) -> Alignment:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_phylip(fh.read())
