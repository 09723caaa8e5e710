"""Submission scoring: file formats, greedy matching, F1."""

from __future__ import annotations

import pytest

from checkout import evaluation
from checkout.counting import CountEvent
from checkout.evaluation import (
    GroundTruthInterval,
    MatchTally,
    SubmissionRecord,
    f1,
    match,
    matched_pairs,
    parse_submission,
    parse_truth,
    write_submission,
)


def rec(video=1, cls=1, ts=5):
    return SubmissionRecord(video_id=video, class_id=cls, timestamp_s=ts)


def iv(video=1, cls=1, enter=4.0, exit=8.0, iid=0):
    return GroundTruthInterval(
        video_id=video, class_id=cls, t_enter=enter, t_exit=exit, instance_id=iid
    )


class TestFormats:
    def test_submission_round_trip(self):
        records = [rec(2, 3, 7), rec(1, 5, 0), rec(1, 2, 9)]
        text = write_submission(records)
        assert parse_submission(text) == sorted(
            records, key=lambda r: (r.video_id, r.timestamp_s, r.class_id)
        )

    def test_submission_sorted_and_single_spaced(self):
        text = write_submission([rec(2, 1, 0), rec(1, 9, 3), rec(1, 1, 1)])
        assert text == "1 1 1\n1 9 3\n2 1 0\n"

    def test_count_events_accepted(self):
        events = [CountEvent(video_id=4, class_id=2, timestamp_s=11, track_id=9, first_frame=330)]
        assert write_submission(events) == "4 2 11\n"

    def test_submission_parse_errors(self):
        with pytest.raises(evaluation.EvaluationError, match="line 1"):
            parse_submission("1 2\n")
        with pytest.raises(evaluation.EvaluationError, match="line 2"):
            parse_submission("1 2 3\n1 2 x\n")
        with pytest.raises(evaluation.EvaluationError, match="line 1"):
            parse_submission("0 2 3\n")

    def test_submission_tolerates_commas_and_comments(self):
        records = parse_submission("# header\n1, 2, 3\n\n4\t5\t6\n")
        assert records == [rec(1, 2, 3), rec(4, 5, 6)]

    def test_truth_parse(self):
        intervals = parse_truth("1 2 3.5 9.25\n1 2 10.0 12.0\n")
        assert intervals[0] == iv(1, 2, 3.5, 9.25, iid=0)
        assert intervals[1].instance_id == 1

    def test_truth_validation(self):
        with pytest.raises(evaluation.EvaluationError, match="line 1"):
            parse_truth("1 2 5.0 3.0\n")
        with pytest.raises(evaluation.EvaluationError, match="expected 4"):
            parse_truth("1 2 3.0\n")

    def test_window_floor_ceil(self):
        assert iv(enter=3.2, exit=7.8).window() == (3, 8)
        assert iv(enter=4.0, exit=8.0).window() == (4, 8)


class TestMatching:
    def test_inside_window_is_tp(self):
        tally = match([rec(ts=5)], [iv(enter=4.9, exit=5.1)])
        assert tally == MatchTally(tp=1, fp=0, fn=0)

    def test_window_edges_inclusive(self):
        assert match([rec(ts=3)], [iv(enter=3.2, exit=7.8)]).tp == 1  # floor edge
        assert match([rec(ts=8)], [iv(enter=3.2, exit=7.8)]).tp == 1  # ceil edge
        assert match([rec(ts=2)], [iv(enter=3.2, exit=7.8)]).tp == 0
        assert match([rec(ts=9)], [iv(enter=3.2, exit=7.8)]).tp == 0

    def test_video_and_class_must_agree(self):
        assert match([rec(video=2, ts=5)], [iv()]).tp == 0
        assert match([rec(cls=2, ts=5)], [iv()]).tp == 0

    def test_one_to_one(self):
        tally = match([rec(ts=5), rec(ts=5)], [iv()])
        assert tally == MatchTally(tp=1, fp=1, fn=0)

    def test_prefers_earliest_enter(self):
        a = iv(enter=2.0, exit=9.0, iid=0)
        b = iv(enter=4.5, exit=9.0, iid=1)
        pairs = matched_pairs([rec(ts=5)], [b, a])
        assert pairs == [(0, 1)]  # interval a, listed second, wins on t_enter

    def test_file_order_breaks_enter_ties(self):
        a = iv(enter=4.0, exit=9.0, iid=0)
        b = iv(enter=4.0, exit=9.0, iid=1)
        assert matched_pairs([rec(ts=5)], [a, b]) == [(0, 0)]

    def test_records_walked_by_video_then_timestamp(self):
        # the later-listed but earlier-timestamped record claims the
        # earliest interval
        records = [rec(ts=7), rec(ts=5)]
        intervals = [iv(enter=4.0, exit=9.0, iid=0), iv(enter=6.0, exit=9.0, iid=1)]
        assert matched_pairs(records, intervals) == [(0, 1), (1, 0)]

    def test_greedy_can_lose_to_optimal(self):
        # greedy gives the ts=5 record the early interval, starving ts=3;
        # an optimal matcher would pair both. The contract is greedy.
        records = [rec(ts=3), rec(ts=5)]
        intervals = [iv(enter=2.0, exit=8.0, iid=0), iv(enter=4.9, exit=5.1, iid=1)]
        tally = match(records, intervals)
        assert tally.tp == 2  # ts=3 goes first (timestamp order), so both land
        records = [rec(ts=5), rec(ts=6)]
        intervals = [iv(enter=2.0, exit=8.0, iid=0), iv(enter=4.9, exit=5.0, iid=1)]
        # ts=5 takes the early wide interval; ts=6 misses the narrow [4,5]
        # window even though swapping would have matched both
        assert match(records, intervals).tp == 1

    def test_counts_add_up(self):
        records = [rec(ts=5), rec(ts=50)]
        intervals = [iv(), iv(enter=70.0, exit=80.0, iid=1)]
        tally = match(records, intervals)
        assert tally == MatchTally(tp=1, fp=1, fn=1)


class TestF1:
    def test_perfect(self):
        assert f1(MatchTally(10, 0, 0)) == 1.0

    def test_all_zero_defined_as_zero(self):
        assert f1(MatchTally(0, 0, 0)) == 0.0

    def test_halved_error_terms(self):
        assert f1(MatchTally(tp=11, fp=14, fn=14)) == pytest.approx(11 / 25)

    def test_no_tp(self):
        assert f1(MatchTally(0, 5, 3)) == 0.0

    def test_score_text_end_to_end(self):
        tally, score = evaluation.score_text("1 1 5\n1 1 30\n", "1 1 4.0 8.0\n1 2 1.0 9.0\n")
        assert tally == MatchTally(tp=1, fp=1, fn=1)
        assert score == pytest.approx(0.5)

    def test_tally_addition(self):
        total = MatchTally(1, 2, 3) + MatchTally(4, 5, 6)
        assert total == MatchTally(5, 7, 9)
