"""Labelled vector collections: grouping, preprocessing, and file formats.

A dataset is a list of per-speaker session groups over fixed-dimension
float64 vectors.  Preprocessing (global centering, optional length
normalization) returns new immutable datasets; the accumulated subtracted
offset is recorded so models can re-apply it to unseen vectors.

File formats
------------
* binary vectors: magic ``GVB1``, little-endian u32 dim, u64 count, then per
  row a u16 id length, the UTF-8 utterance id, and dim float64 values.
* text vectors:  ``utt_id<TAB>v1,v2,...,vd`` per line.
* labels:        TSV ``utt_id<TAB>speaker_id``.
* trials:        TSV ``enroll_id<TAB>test_id<TAB>{target|nontarget|-}``.
"""

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import (
    DimensionMismatch,
    ParseError,
    UnknownUtteranceId,
    ZeroVector,
)

GVB_MAGIC = b"GVB1"

TARGET = "target"
NONTARGET = "nontarget"


def _freeze(a):
    # copy before marking read-only so caller-owned arrays are never touched
    a = np.array(a, dtype=float, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpeakerGroup:
    """All sessions of one speaker, in insertion order."""

    speaker_id: str
    utt_ids: tuple
    vectors: np.ndarray  # (num_sessions, dim), read-only

    def __post_init__(self):
        object.__setattr__(self, "vectors", _freeze(np.atleast_2d(self.vectors)))
        object.__setattr__(self, "utt_ids", tuple(self.utt_ids))
        if self.vectors.shape[0] < 1:
            raise DimensionMismatch(f"speaker {self.speaker_id!r} has no vectors")
        if len(self.utt_ids) != self.vectors.shape[0]:
            raise DimensionMismatch(
                f"speaker {self.speaker_id!r}: {len(self.utt_ids)} utterance ids "
                f"for {self.vectors.shape[0]} vectors"
            )

    @property
    def num_sessions(self):
        return self.vectors.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of speaker groups sharing one dimension."""

    dim: int
    speakers: tuple
    global_mean: np.ndarray  # total offset subtracted from the raw vectors

    def __post_init__(self):
        object.__setattr__(self, "speakers", tuple(self.speakers))
        object.__setattr__(self, "global_mean", _freeze(np.ravel(self.global_mean)))
        if self.global_mean.shape != (self.dim,):
            raise DimensionMismatch("global_mean length does not match dim")
        seen = set()
        for g in self.speakers:
            if g.vectors.shape[1] != self.dim:
                raise DimensionMismatch(
                    f"speaker {g.speaker_id!r} has dim {g.vectors.shape[1]}, expected {self.dim}"
                )
            if g.speaker_id in seen:
                raise DimensionMismatch(f"duplicate speaker id {g.speaker_id!r}")
            seen.add(g.speaker_id)

    @property
    def n_speakers(self):
        return len(self.speakers)

    @property
    def n_vectors(self):
        return sum(g.num_sessions for g in self.speakers)

    def session_counts(self):
        return np.array([g.num_sessions for g in self.speakers], dtype=int)

    def stacked(self):
        """All vectors as one (n_vectors, dim) array, in group order."""
        if not self.speakers:
            return np.zeros((0, self.dim))
        return np.vstack([g.vectors for g in self.speakers])

    @cached_property
    def _by_speaker(self):
        return {g.speaker_id: g for g in self.speakers}

    @cached_property
    def _by_utterance(self):
        out = {}
        for g in self.speakers:
            for j, utt in enumerate(g.utt_ids):
                out[utt] = (g, j)
        return out

    def speaker(self, speaker_id):
        return self._by_speaker.get(speaker_id)

    def utterance(self, utt_id):
        hit = self._by_utterance.get(utt_id)
        if hit is None:
            return None
        g, j = hit
        return g.vectors[j]


@dataclass(frozen=True)
class Trial:
    """One enrollment-vs-test pairing; label None means unlabeled."""

    enroll_id: str
    test_id: str
    label: str | None = None


@dataclass(frozen=True)
class TrialList:
    trials: tuple

    def __post_init__(self):
        object.__setattr__(self, "trials", tuple(self.trials))

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)


def center(dataset, mean=None):
    """Subtract a global mean from every vector.

    With ``mean=None`` the mean over all vectors is computed and removed, so
    the result has zero column means.  The dataset's ``global_mean`` field
    accumulates everything subtracted so far, which makes centering
    idempotent and lets models record the offset for scoring.
    """
    if mean is None:
        stacked = dataset.stacked()
        if stacked.shape[0] == 0:
            return dataset
        mean = stacked.mean(axis=0)
    mean = np.asarray(mean, dtype=float).ravel()
    if mean.shape != (dataset.dim,):
        raise DimensionMismatch("mean length does not match dataset dim")
    groups = tuple(
        SpeakerGroup(g.speaker_id, g.utt_ids, g.vectors - mean) for g in dataset.speakers
    )
    return Dataset(dataset.dim, groups, dataset.global_mean + mean)


def length_normalize(dataset):
    """Scale every vector to unit Euclidean norm."""
    groups = []
    for g in dataset.speakers:
        norms = np.linalg.norm(g.vectors, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ZeroVector(f"speaker {g.speaker_id!r} contains a zero vector")
        groups.append(SpeakerGroup(g.speaker_id, g.utt_ids, g.vectors / norms))
    return Dataset(dataset.dim, tuple(groups), dataset.global_mean)


# ---------------------------------------------------------------------------
# vector files


def save_vectors_binary(path, utt_ids, vectors):
    vectors = np.ascontiguousarray(vectors, dtype="<f8")
    n, d = vectors.shape
    if len(utt_ids) != n:
        raise DimensionMismatch("utterance id count does not match vector count")
    with open(path, "wb") as f:
        f.write(GVB_MAGIC)
        f.write(struct.pack("<IQ", d, n))
        for utt, row in zip(utt_ids, vectors):
            raw = utt.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ParseError(f"utterance id too long: {utt!r}", path=path)
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(row.tobytes())


def load_vectors_binary(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != GVB_MAGIC:
        raise ParseError("bad magic, not a GVB1 vector file", path=path, offset=0)
    if len(data) < 16:
        raise ParseError("truncated header", path=path, offset=len(data))
    d, n = struct.unpack_from("<IQ", data, 4)
    pos = 16
    ids = []
    rows = np.empty((n, d), dtype=float)
    row_bytes = 8 * d
    for i in range(n):
        if pos + 2 > len(data):
            raise ParseError(f"truncated at row {i}", path=path, offset=pos)
        (idlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + idlen + row_bytes > len(data):
            raise ParseError(f"truncated at row {i}", path=path, offset=pos)
        try:
            ids.append(data[pos : pos + idlen].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ParseError(f"bad utterance id at row {i}: {exc}", path=path, offset=pos)
        pos += idlen
        rows[i] = np.frombuffer(data, dtype="<f8", count=d, offset=pos)
        pos += row_bytes
    if pos != len(data):
        raise ParseError("trailing bytes after last row", path=path, offset=pos)
    return ids, rows


def save_vectors_text(path, utt_ids, vectors):
    vectors = np.asarray(vectors, dtype=float)
    if len(utt_ids) != vectors.shape[0]:
        raise DimensionMismatch("utterance id count does not match vector count")
    with open(path, "w", encoding="utf-8") as f:
        for utt, row in zip(utt_ids, vectors):
            f.write(utt)
            f.write("\t")
            f.write(",".join("%.17g" % v for v in row))
            f.write("\n")


def load_vectors_text(path):
    ids = []
    rows = []
    dim = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'utt_id<TAB>values'", path=path, line=lineno)
            try:
                row = np.array([float(v) for v in parts[1].split(",")], dtype=float)
            except ValueError as exc:
                raise ParseError(f"bad float: {exc}", path=path, line=lineno)
            if dim is None:
                dim = row.shape[0]
            elif row.shape[0] != dim:
                raise ParseError(
                    f"row has {row.shape[0]} values, expected {dim}", path=path, line=lineno
                )
            ids.append(parts[0])
            rows.append(row)
    if dim is None:
        return [], np.zeros((0, 0))
    return ids, np.vstack(rows)


def load_vectors(path):
    """Load a vector file, sniffing binary (GVB1) versus text."""
    with open(path, "rb") as f:
        head = f.read(4)
    if head == GVB_MAGIC:
        return load_vectors_binary(path)
    return load_vectors_text(path)


# ---------------------------------------------------------------------------
# label and trial files


def save_labels(path, pairs):
    with open(path, "w", encoding="utf-8") as f:
        for utt, spk in pairs:
            f.write(f"{utt}\t{spk}\n")


def load_labels(path):
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'utt_id<TAB>speaker_id'", path=path, line=lineno)
            pairs.append((parts[0], parts[1]))
    return pairs


def save_trials(path, trials):
    with open(path, "w", encoding="utf-8") as f:
        for t in trials:
            label = t.label if t.label is not None else "-"
            f.write(f"{t.enroll_id}\t{t.test_id}\t{label}\n")


def load_trials(path):
    trials = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    "expected 'enroll_id<TAB>test_id<TAB>label'", path=path, line=lineno
                )
            token = parts[2]
            if token == "-":
                label = None
            elif token in (TARGET, NONTARGET):
                label = token
            else:
                raise ParseError(f"bad trial label {token!r}", path=path, line=lineno)
            trials.append(Trial(parts[0], parts[1], label))
    return TrialList(tuple(trials))


# ---------------------------------------------------------------------------
# dataset assembly


def build_dataset(utt_ids, vectors, label_pairs):
    """Group vectors by the label pairs' speaker column.

    Insertion order of the label pairs is preserved within each group and
    for first appearance of each speaker.  Vectors never referenced by a
    label pair are ignored; a label referencing a missing utterance id is an
    error.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    index = {}
    for i, utt in enumerate(utt_ids):
        if utt in index:
            raise ParseError(f"duplicate utterance id {utt!r} in vector file")
        index[utt] = i
    by_speaker = {}
    seen_utts = set()
    for utt, spk in label_pairs:
        if utt not in index:
            raise UnknownUtteranceId(f"label references unknown utterance id {utt!r}")
        if utt in seen_utts:
            raise ParseError(f"utterance id {utt!r} labelled twice")
        seen_utts.add(utt)
        by_speaker.setdefault(spk, []).append(utt)
    dim = vectors.shape[1]
    groups = tuple(
        SpeakerGroup(spk, tuple(utts), vectors[[index[u] for u in utts]])
        for spk, utts in by_speaker.items()
    )
    return Dataset(dim, groups, np.zeros(dim))


def load_dataset(vectors_path, labels_path):
    utt_ids, vectors = load_vectors(vectors_path)
    pairs = load_labels(labels_path)
    return build_dataset(utt_ids, vectors, pairs)


def save_dataset(dataset, vectors_path, labels_path, binary=True):
    ids = []
    pairs = []
    for g in dataset.speakers:
        for utt in g.utt_ids:
            ids.append(utt)
            pairs.append((utt, g.speaker_id))
    stacked = dataset.stacked()
    if binary:
        save_vectors_binary(vectors_path, ids, stacked)
    else:
        save_vectors_text(vectors_path, ids, stacked)
    save_labels(labels_path, pairs)
