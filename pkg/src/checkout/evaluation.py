"""Submission and ground-truth files, event-interval matching, and the
challenge F1 score.

A submitted record (video_id, class_id, timestamp_s) is a true positive
when a not-yet-matched ground-truth interval of the same video and class
contains the timestamp within its closed integer window
[floor(t_enter), ceil(t_exit)]. Matching is greedy and one-to-one:
records processed in (video, timestamp, file-order) order, each taking
the candidate interval with the earliest t_enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .counting import CountEvent


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class SubmissionRecord:
    video_id: int
    class_id: int
    timestamp_s: int

    def __post_init__(self):
        if self.video_id < 1 or self.class_id < 1:
            raise EvaluationError(f"video_id and class_id must be >= 1: {self}")
        if self.timestamp_s < 0:
            raise EvaluationError(f"timestamp must be >= 0: {self}")


@dataclass(frozen=True)
class GroundTruthInterval:
    video_id: int
    class_id: int
    t_enter: float
    t_exit: float
    instance_id: int

    def __post_init__(self):
        if not 0 <= self.t_enter <= self.t_exit:
            raise EvaluationError(f"need 0 <= t_enter <= t_exit: {self}")

    def window(self) -> tuple[int, int]:
        """Closed integer window of acceptable timestamps."""
        return math.floor(self.t_enter), math.ceil(self.t_exit)


@dataclass(frozen=True)
class MatchTally:
    tp: int
    fp: int
    fn: int

    def __add__(self, other: "MatchTally") -> "MatchTally":
        return MatchTally(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def _split_fields(line: str) -> list[str]:
    # writer emits single spaces; parser is lenient about tabs and commas
    return line.replace(",", " ").split()


def parse_submission(text: str) -> list[SubmissionRecord]:
    records: list[SubmissionRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = _split_fields(line)
        if len(parts) != 3:
            raise EvaluationError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            video_id, class_id, timestamp = (int(p) for p in parts)
        except ValueError as exc:
            raise EvaluationError(f"line {lineno}: non-integer field: {exc}") from exc
        try:
            records.append(SubmissionRecord(video_id, class_id, timestamp))
        except EvaluationError as exc:
            raise EvaluationError(f"line {lineno}: {exc}") from exc
    return records


def read_submission(path) -> list[SubmissionRecord]:
    return parse_submission(Path(path).read_text(encoding="utf-8"))


def write_submission(events: Iterable[CountEvent | SubmissionRecord]) -> str:
    """One `video_id class_id timestamp` line per event, sorted by
    (video_id, timestamp, class_id). parse(write(events)) preserves the
    triples."""
    triples = []
    for e in events:
        ts = e.timestamp_s
        triples.append((e.video_id, ts, e.class_id))
    triples.sort()
    return "".join(f"{v} {c} {t}\n" for v, t, c in triples)


def parse_truth(text: str) -> list[GroundTruthInterval]:
    """Ground-truth lines: `video_id class_id t_enter t_exit` (seconds)."""
    intervals: list[GroundTruthInterval] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = _split_fields(line)
        if len(parts) != 4:
            raise EvaluationError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            video_id, class_id = int(parts[0]), int(parts[1])
            t_enter, t_exit = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise EvaluationError(f"line {lineno}: malformed field: {exc}") from exc
        try:
            intervals.append(
                GroundTruthInterval(video_id, class_id, t_enter, t_exit, len(intervals))
            )
        except EvaluationError as exc:
            raise EvaluationError(f"line {lineno}: {exc}") from exc
    return intervals


def read_truth(path) -> list[GroundTruthInterval]:
    return parse_truth(Path(path).read_text(encoding="utf-8"))


def matched_pairs(
    records: Sequence[SubmissionRecord], intervals: Sequence[GroundTruthInterval]
) -> list[tuple[int, int]]:
    """The greedy walk, returning matched (record index, interval index)
    pairs; a record takes the candidate interval with the earliest t_enter,
    file order breaking ties."""
    order = sorted(
        range(len(records)), key=lambda i: (records[i].video_id, records[i].timestamp_s, i)
    )
    taken = [False] * len(intervals)
    pairs: list[tuple[int, int]] = []
    for i in order:
        rec = records[i]
        best: int | None = None
        for j, interval in enumerate(intervals):
            if taken[j]:
                continue
            if interval.video_id != rec.video_id or interval.class_id != rec.class_id:
                continue
            lo, hi = interval.window()
            if not lo <= rec.timestamp_s <= hi:
                continue
            if best is None or interval.t_enter < intervals[best].t_enter:
                best = j
        if best is not None:
            taken[best] = True
            pairs.append((i, best))
    return sorted(pairs)


def match(
    records: Sequence[SubmissionRecord], intervals: Sequence[GroundTruthInterval]
) -> MatchTally:
    """Greedy one-to-one matching of records against presence intervals."""
    tp = len(matched_pairs(records, intervals))
    return MatchTally(tp=tp, fp=len(records) - tp, fn=len(intervals) - tp)


def f1(tally: MatchTally) -> float:
    """TP / (TP + (FP + FN) / 2); 0.0 when every count is zero."""
    denom = tally.tp + (tally.fp + tally.fn) / 2.0
    if denom == 0:
        return 0.0
    return tally.tp / denom


def score_text(submission_text: str, truth_text: str) -> tuple[MatchTally, float]:
    tally = match(parse_submission(submission_text), parse_truth(truth_text))
    return tally, f1(tally)
