import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from jammin.notes import (
    FOUR_FOUR,
    ClipNotes,
    NoteEvent,
    TimeSig,
    TrackContext,
    beats_to_ticks,
    clip_from_notes,
    normalize_clip,
    quantize,
    ticks_to_beats,
)


class TestBeatsToTicks:
    def test_zero(self):
        assert beats_to_ticks(0.0) == 0

    def test_unit(self):
        assert beats_to_ticks(1.0) == 480

    def test_third_rounds_to_nearest(self):
        # oracle: 0.333333 * 480 = Fraction arithmetic -> 159.99984 -> 160
        exact = Fraction(333333, 1000000) * 480
        assert math.floor(exact + Fraction(1, 2)) == 160
        assert beats_to_ticks(0.333333) == 160

    def test_ties_round_away_from_zero(self):
        assert beats_to_ticks(0.5 / 480) == 1
        assert beats_to_ticks(1.5 / 480) == 2

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            beats_to_ticks(-0.25)

    def test_ticks_to_beats_exact_points(self):
        assert ticks_to_beats(480) == 1.0
        assert ticks_to_beats(0) == 0.0
        assert ticks_to_beats(240) == 0.5

    @given(st.integers(min_value=0, max_value=2**40))
    def test_round_trip_identity(self, ticks):
        assert beats_to_ticks(ticks_to_beats(ticks)) == ticks


class TestTimeSig:
    @pytest.mark.parametrize(
        "num,den,bar",
        [(4, 4, 1920), (3, 4, 1440), (6, 8, 1440), (2, 2, 1920), (7, 8, 1680), (5, 4, 2400)],
    )
    def test_bar_ticks(self, num, den, bar):
        assert TimeSig(num, den).bar_ticks == bar

    def test_bad_denominator(self):
        with pytest.raises(ValueError):
            TimeSig(4, 3)

    def test_bad_numerator(self):
        with pytest.raises(ValueError):
            TimeSig(0, 4)


class TestTrackContext:
    @pytest.mark.parametrize(
        "name,expected",
        [
            ("Drum Rack", True),
            ("drums 2", True),
            ("My Kit", True),
            ("Percussion", True),
            ("808 bus", True),
            ("Beats", True),
            ("Bass", False),
            ("Lead Synth", False),
        ],
    )
    def test_is_drum_derivation(self, name, expected):
        assert TrackContext(name, 120.0).is_drum is expected

    def test_tempo_must_be_positive(self):
        with pytest.raises(ValueError):
            TrackContext("Bass", 0.0)


class TestNormalizeClip:
    def test_single_note_one_bar(self):
        clip = normalize_clip([NoteEvent(60, 0, 480, 96)], FOUR_FOUR)
        assert clip.length == 1920

    def test_note_past_bar_rounds_up(self):
        clip = normalize_clip([NoteEvent(60, 1920, 1, 96)], FOUR_FOUR)
        assert clip.length == 3840  # ends at 1921, ceil to 2 bars

    def test_empty_list_gives_one_silent_bar(self):
        clip = normalize_clip([], FOUR_FOUR)
        assert clip.notes == () and clip.length == 1920

    def test_sorts_and_clamps(self):
        clip = normalize_clip(
            [NoteEvent(200, 480, 10, 0), NoteEvent(-5, 0, 10, 300)], FOUR_FOUR
        )
        assert [(n.pitch, n.velocity) for n in clip.notes] == [(0, 127), (127, 1)]
        assert clip.notes[0].start == 0

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(ValueError):
            normalize_clip([NoteEvent(60, 0, 0, 96)], FOUR_FOUR)

    @given(
        st.lists(
            st.tuples(
                st.integers(-10, 140),
                st.integers(0, 4000),
                st.integers(1, 2000),
                st.integers(-3, 200),
            ),
            max_size=40,
        )
    )
    def test_invariants_and_idempotence(self, raw):
        notes = [NoteEvent(p, s, d, v) for p, s, d, v in raw]
        clip = normalize_clip(notes, FOUR_FOUR)
        # ClipNotes' constructor enforces the full invariant set; idempotence:
        again = normalize_clip(list(clip.notes), clip.time_sig)
        assert again == clip


class TestClipNotesInvariants:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            ClipNotes(
                notes=(NoteEvent(62, 480, 10, 90), NoteEvent(60, 0, 10, 90)),
                length=1920,
            )

    def test_rejects_start_at_length(self):
        with pytest.raises(ValueError):
            ClipNotes(notes=(NoteEvent(60, 1920, 10, 90),), length=1920)

    def test_rejects_partial_bar_length(self):
        with pytest.raises(ValueError):
            ClipNotes(notes=(), length=1000)


class TestQuantize:
    def test_spec_example_snap(self):
        clip = clip_from_notes([NoteEvent(60, 7, 475, 96)], FOUR_FOUR)
        snapped = quantize(clip, 30)
        assert snapped.notes[0] == NoteEvent(60, 0, 480, 96)

    def test_on_grid_is_fixpoint(self):
        clip = clip_from_notes(
            [NoteEvent(60, 0, 480, 96), NoteEvent(64, 480, 240, 80)], FOUR_FOUR
        )
        assert quantize(clip, 30) == clip

    def test_minimum_duration_is_one_grid(self):
        clip = clip_from_notes([NoteEvent(60, 14, 10, 96)], FOUR_FOUR)
        snapped = quantize(clip, 30)
        assert snapped.notes[0] == NoteEvent(60, 0, 30, 96)

    def test_never_shrinks_clip(self):
        clip = ClipNotes(notes=(NoteEvent(60, 0, 240, 96),), length=3840)
        assert quantize(clip, 30).length == 3840

    def test_grid_validation(self):
        clip = normalize_clip([], FOUR_FOUR)
        with pytest.raises(ValueError):
            quantize(clip, 7)

    @given(
        st.lists(
            st.tuples(st.integers(0, 127), st.integers(0, 3000), st.integers(1, 1000)),
            max_size=30,
        ),
        st.sampled_from([30, 60, 120, 240, 480]),
    )
    def test_output_is_on_grid(self, raw, grid):
        clip = clip_from_notes([NoteEvent(p, s, d, 96) for p, s, d in raw], FOUR_FOUR)
        snapped = quantize(clip, grid)
        for note in snapped.notes:
            assert note.start % grid == 0
            assert note.duration % grid == 0 and note.duration >= grid
