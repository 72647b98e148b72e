from dataclasses import replace
from datetime import date, datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relipost.corpus import PostRecord
from relipost.preprocess import (
    DAY_ZERO_EPOCH,
    DedupError,
    FitScope,
    MetadataVector,
    ScalerError,
    ScalerState,
    apply_scaler,
    build_metadata,
    day_in_year,
    dedup_training,
    detect_title,
    fit_scaler,
    lower_titles,
)

# All-caps run long enough to be a title; from a corpus message about virus
# safety advice.
SHOUTED_MESSAGE = "NẾU LỠ VƯỚNG VIRUSCORONA, BẠN NÊN LÀM GÌ ĐỂ THOÁT HIỂM?..."


def rec(rid="r", like=None, comment=None, share=None, ts=None, msg="m", images=(), label=None, user="u"):
    return PostRecord(
        id=rid,
        user_name=user,
        post_message=msg,
        timestamp_post=ts,
        num_like_post=like,
        num_comment_post=comment,
        num_share_post=share,
        images=tuple(images),
        label=label,
    )


def corpus_with_likes(values):
    return [rec(f"r{i}", like=v, comment=1.0, share=1.0, ts=DAY_ZERO_EPOCH) for i, v in enumerate(values)]


class TestFitScaler:
    def test_mean_over_valid_only(self):
        state = fit_scaler([corpus_with_likes([1.0, None, 3.0])])
        sc = state.attributes["num_like"]
        assert (sc.mean, sc.min, sc.max) == (2.0, 1.0, 3.0)

    def test_constant_column_degenerate(self):
        state = fit_scaler([corpus_with_likes([5.0, 5.0, 5.0])])
        sc = state.attributes["num_like"]
        assert sc.min == sc.max == 5.0
        assert sc.degenerate

    def test_range(self):
        state = fit_scaler([corpus_with_likes([0.0, 5.0, 10.0])])
        sc = state.attributes["num_like"]
        assert (sc.min, sc.max) == (0.0, 10.0)

    def test_imputation_never_extends_range(self):
        # mean of the valid values lies inside [min, max] by construction
        state = fit_scaler([corpus_with_likes([1.0, None, None, 9.0])])
        sc = state.attributes["num_like"]
        assert sc.min <= sc.mean <= sc.max

    def test_no_valid_values_rejected(self):
        with pytest.raises(ScalerError, match="num_like"):
            fit_scaler([corpus_with_likes([None, None])])

    def test_train_only_scope_ignores_other_splits(self):
        train = corpus_with_likes([0.0, 10.0])
        test = corpus_with_likes([100.0])
        all_scope = fit_scaler([train, test], FitScope.ALL_SPLITS)
        train_scope = fit_scaler([train, test], FitScope.TRAIN_ONLY)
        assert all_scope.attributes["num_like"].max == 100.0
        assert train_scope.attributes["num_like"].max == 10.0

    def test_fit_is_order_insensitive(self):
        a = corpus_with_likes([3.0, None, 7.0, 1.0])
        b = list(reversed(a))
        assert fit_scaler([a]) == fit_scaler([b])


class TestApplyScaler:
    def test_midpoint(self):
        state = fit_scaler([corpus_with_likes([0.0, 5.0, 10.0])])
        assert apply_scaler(rec(like=5.0, ts=DAY_ZERO_EPOCH), state)["num_like"] == 0.5

    def test_missing_imputed_then_scaled(self):
        state = fit_scaler([corpus_with_likes([1.0, 3.0])])
        # mean 2 in range [1, 3] -> 0.5
        assert apply_scaler(rec(like=None, ts=DAY_ZERO_EPOCH), state)["num_like"] == 0.5

    def test_degenerate_maps_to_zero(self):
        state = fit_scaler([corpus_with_likes([5.0, 5.0])])
        for x in (None, 0.0, 5.0, 123.0):
            assert apply_scaler(rec(like=x, ts=DAY_ZERO_EPOCH), state)["num_like"] == 0.0

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30), st.floats(0, 1e6), st.floats(0, 1e6))
    def test_monotone_per_attribute(self, values, x, y):
        state = fit_scaler([corpus_with_likes(values)])
        lo, hi = min(x, y), max(x, y)
        assert (
            apply_scaler(rec(like=lo, ts=DAY_ZERO_EPOCH), state)["num_like"]
            <= apply_scaler(rec(like=hi, ts=DAY_ZERO_EPOCH), state)["num_like"]
        )

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30))
    def test_imputed_value_lands_in_unit_interval(self, values):
        state = fit_scaler([corpus_with_likes(values)])
        scaled = apply_scaler(rec(like=None, ts=DAY_ZERO_EPOCH), state)["num_like"]
        assert 0.0 <= scaled <= 1.0

    def test_in_range_input_lands_in_unit_interval(self):
        state = fit_scaler([corpus_with_likes([2.0, 8.0])])
        for x in (2.0, 3.5, 8.0):
            assert 0.0 <= apply_scaler(rec(like=x, ts=DAY_ZERO_EPOCH), state)["num_like"] <= 1.0


class TestScalerStateText:
    def test_round_trip_is_exact(self):
        state = fit_scaler([corpus_with_likes([0.1, 0.3, 1e-17, 12345.6789])])
        assert ScalerState.from_text(state.to_text()) == state

    def test_missing_key_rejected(self):
        with pytest.raises(ScalerError, match="missing"):
            ScalerState.from_text("num_like.mean=1\n")

    def test_bad_line_rejected(self):
        with pytest.raises(ScalerError, match="key=value"):
            ScalerState.from_text("what even is this\n")


class TestDetectTitle:
    def test_shouted_vietnamese_message_is_title(self):
        scan = detect_title(SHOUTED_MESSAGE)
        assert scan.has_title
        assert scan.spans == ((0, len(SHOUTED_MESSAGE)),)
        assert scan.lowered_message == SHOUTED_MESSAGE.lower()

    def test_plain_message_untouched(self):
        scan = detect_title("hello world")
        assert not scan.has_title
        assert scan.spans == ()
        assert scan.lowered_message == "hello world"

    def test_short_acronym_run_is_not_a_title(self):
        scan = detect_title("USA is great")
        assert not scan.has_title
        assert scan.lowered_message == "USA is great"

    def test_three_caps_tokens_below_threshold(self):
        assert not detect_title("AAA BBB CCC").has_title

    def test_exactly_four_tokens_fires(self):
        scan = detect_title("AAA BBB CCC DDD")
        assert scan.has_title
        assert scan.lowered_message == "aaa bbb ccc ddd"

    def test_title_followed_by_body_lowers_only_title(self):
        msg = "TIN NÓNG CẬP NHẬT GẤP: mọi người chú ý nhé"
        scan = detect_title(msg)
        assert scan.has_title
        assert scan.lowered_message == "tin nóng cập nhật gấp: mọi người chú ý nhé"

    def test_digits_and_punctuation_ignored_in_case_test(self):
        scan = detect_title("COVID-19 LÀ GÌ? CẦN BIẾT!")
        assert scan.has_title
        assert scan.lowered_message == "covid-19 là gì? cần biết!"

    def test_all_digit_token_breaks_run(self):
        # "2020" has no letters, so it cannot join a run
        assert not detect_title("AAA BBB 2020 CCC DDD").has_title

    def test_two_separate_spans(self):
        msg = "ONE TWO THREE FOUR lower text FIVE SIX SEVEN EIGHT"
        scan = detect_title(msg)
        assert len(scan.spans) == 2
        assert scan.lowered_message == "one two three four lower text five six seven eight"

    def test_mixed_case_token_breaks_run(self):
        assert not detect_title("AAA BbB CCC DDD").has_title

    def test_min_tokens_parameter(self):
        assert detect_title("AA BB", min_tokens=2).has_title
        assert not detect_title("AA BB", min_tokens=3).has_title

    def test_idempotent_on_example(self):
        lowered = detect_title(SHOUTED_MESSAGE).lowered_message
        again = detect_title(lowered)
        assert not again.has_title
        assert again.lowered_message == lowered

    @settings(max_examples=300)
    @given(st.text(max_size=120))
    def test_idempotent_on_arbitrary_text(self, message):
        lowered = detect_title(message).lowered_message
        assert not detect_title(lowered).has_title

    @given(st.text(max_size=120))
    def test_untouched_outside_spans(self, message):
        scan = detect_title(message)
        if not scan.has_title:
            assert scan.lowered_message == message

    def test_uppercase_codepoint_without_lowercase_form_cannot_span(self):
        # mathematical bold capitals are uppercase letters with no lowercase
        # mapping; treating them as shouted would break idempotence
        msg = "\U0001d400\U0001d400 \U0001d400 \U0001d400 \U0001d400"
        assert not detect_title(msg).has_title


class TestDayInYear:
    def test_day_zero(self):
        assert day_in_year(DAY_ZERO_EPOCH) == 0

    def test_day_one(self):
        assert day_in_year(DAY_ZERO_EPOCH + 86400) == 1

    def test_partial_day_floors(self):
        assert day_in_year(DAY_ZERO_EPOCH + 86399) == 0

    def test_civil_calendar_oracle_mid_february(self):
        # independent oracle: calendar difference in days (31 Jan days + 9)
        ts = int(datetime(2020, 2, 10, 12, 0, 0, tzinfo=timezone.utc).timestamp())
        expected = (date(2020, 2, 10) - date(2020, 1, 1)).days
        assert expected == 40
        assert day_in_year(ts) == expected

    def test_negative_for_earlier_posts(self):
        ts = int(datetime(2019, 12, 31, 23, 59, 59, tzinfo=timezone.utc).timestamp())
        assert day_in_year(ts) == -1

    @given(st.integers(min_value=-(10**10), max_value=10**10))
    def test_matches_datetime_oracle(self, ts):
        moment = datetime.fromtimestamp(ts, tz=timezone.utc)
        expected = (moment.date() - date(2020, 1, 1)).days
        assert day_in_year(ts) == expected


class TestDedupTraining:
    def test_identical_records_deduped(self):
        a = rec("a", like=1.0, msg="same", label=1)
        b = rec("b", like=1.0, msg="same", label=1)
        kept, removed = dedup_training([a, b])
        assert kept == [a]
        assert removed == 1

    def test_different_likes_both_kept(self):
        a = rec("a", like=1.0, msg="same", label=1)
        b = rec("b", like=2.0, msg="same", label=1)
        kept, removed = dedup_training([a, b])
        assert kept == [a, b]
        assert removed == 0

    def test_different_label_both_kept(self):
        a = rec("a", msg="same", label=1)
        b = rec("b", msg="same", label=0)
        kept, _ = dedup_training([a, b])
        assert kept == [a, b]

    def test_missing_matches_only_missing(self):
        a = rec("a", like=None, msg="same", label=1)
        b = rec("b", like=0.0, msg="same", label=1)
        c = rec("c", like=None, msg="same", label=1)
        kept, removed = dedup_training([a, b, c])
        assert kept == [a, b]
        assert removed == 1

    def test_all_distinct_none_removed(self):
        records = [rec(f"r{i}", msg=f"m{i}", label=0) for i in range(5)]
        kept, removed = dedup_training(records)
        assert kept == records
        assert removed == 0

    def test_unlabeled_record_rejected(self):
        with pytest.raises(DedupError, match="'a'"):
            dedup_training([rec("a", label=None)])

    def test_idempotent_and_keeps_first(self):
        records = [
            rec("a", like=1.0, msg="x", label=1),
            rec("b", like=1.0, msg="x", label=1),
            rec("c", like=2.0, msg="x", label=1),
            rec("d", like=1.0, msg="x", label=1),
        ]
        kept, removed = dedup_training(records)
        assert [r.id for r in kept] == ["a", "c"]
        assert removed == 2
        again, removed_again = dedup_training(kept)
        assert again == kept
        assert removed_again == 0

    @given(
        st.lists(
            st.tuples(st.sampled_from(["m1", "m2"]), st.sampled_from([None, 1.0]), st.sampled_from([0, 1])),
            max_size=20,
        )
    )
    def test_idempotence_property(self, raw):
        records = [rec(f"r{i}", like=like, msg=msg, label=label) for i, (msg, like, label) in enumerate(raw)]
        kept, _ = dedup_training(records)
        assert dedup_training(kept) == (kept, 0)


class TestBuildMetadata:
    def make_state(self):
        base = [
            rec("a", like=0.0, comment=0.0, share=0.0, ts=DAY_ZERO_EPOCH),
            rec("b", like=10.0, comment=20.0, share=40.0, ts=DAY_ZERO_EPOCH + 4 * 86400),
            rec("c", like=5.0, comment=5.0, share=10.0, ts=DAY_ZERO_EPOCH + 2 * 86400),
        ]
        return fit_scaler([base])

    def test_has_images_flag(self):
        state = self.make_state()
        assert build_metadata(rec(images=()), state).values[3] == 0.0
        assert build_metadata(rec(images=("u.png",)), state).values[3] == 1.0

    def test_title_flag(self):
        state = self.make_state()
        assert build_metadata(rec(msg=SHOUTED_MESSAGE), state).values[4] == 1.0
        assert build_metadata(rec(msg="quiet message"), state).values[4] == 0.0

    def test_all_missing_numerics_scale_to_means(self):
        # hand-derived from the fit corpus above:
        #   likes   mean 5,       range [0, 10]  -> 0.5
        #   comment mean 25/3,    range [0, 20]  -> 25/60
        #   share   mean 50/3,    range [0, 40]  -> 50/120
        #   day     mean 2,       range [0, 4]   -> 0.5
        state = self.make_state()
        vec = build_metadata(rec(), state)
        assert vec.values[0] == pytest.approx(0.5, abs=1e-15)
        assert vec.values[1] == pytest.approx(25.0 / 60.0, abs=1e-15)
        assert vec.values[2] == pytest.approx(50.0 / 120.0, abs=1e-15)
        assert vec.values[5] == pytest.approx(0.5, abs=1e-15)

    def test_elements_in_unit_interval_under_covering_fit(self):
        base = [
            rec("a", like=1.0, comment=2.0, share=3.0, ts=DAY_ZERO_EPOCH, msg="AAA BBB CCC DDD"),
            rec("b", like=9.0, comment=7.0, share=5.0, ts=DAY_ZERO_EPOCH + 86400 * 30, images=("i",)),
            rec("c", like=None, comment=None, share=None, ts=None),
        ]
        state = fit_scaler([base])
        for r in base:
            vec = build_metadata(r, state)
            assert all(0.0 <= v <= 1.0 for v in vec.values)

    def test_deterministic_under_corpus_permutation(self):
        base = [
            rec("a", like=1.0, comment=2.0, share=3.0, ts=DAY_ZERO_EPOCH),
            rec("b", like=9.0, comment=7.0, share=5.0, ts=DAY_ZERO_EPOCH + 86400),
            rec("c", like=4.0, comment=1.0, share=0.0, ts=DAY_ZERO_EPOCH + 2 * 86400),
        ]
        state_fwd = fit_scaler([base])
        state_rev = fit_scaler([list(reversed(base))])
        for r in base:
            assert build_metadata(r, state_fwd) == build_metadata(r, state_rev)

    def test_vector_length_enforced(self):
        with pytest.raises(ValueError):
            MetadataVector((1.0, 2.0))


class TestLowerTitles:
    def test_replaces_message(self):
        record = rec(msg=SHOUTED_MESSAGE)
        lowered = lower_titles(record)
        assert lowered.post_message == SHOUTED_MESSAGE.lower()
        assert lowered.id == record.id

    def test_no_title_returns_record_unchanged(self):
        record = rec(msg="calm text here")
        assert lower_titles(record) is record

    def test_original_record_not_mutated(self):
        record = rec(msg=SHOUTED_MESSAGE)
        lower_titles(record)
        assert record.post_message == SHOUTED_MESSAGE
