import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS_DIR, make_random_clip
from oracles.abc_oracle import convert as oracle_convert

from jammin.notes import FOUR_FOUR, NoteEvent, TimeSig, clip_from_notes
from jammin.textmusic import (
    AbcParseError,
    QuantizeRequiredError,
    parse_abc,
    render_abc,
)


def note_tuples(clip):
    return [(n.pitch, n.start, n.duration, n.velocity) for n in clip.notes]


class TestParseAbcExamples:
    def test_quarter_scale(self):
        clip, header = parse_abc("X:1\nL:1/4\nK:C\nC D E F|")
        assert note_tuples(clip) == [
            (60, 0, 480, 96),
            (62, 480, 480, 96),
            (64, 960, 480, 96),
            (65, 1440, 480, 96),
        ]
        assert header.meter == FOUR_FOUR

    def test_key_of_g_sharpens_f(self):
        clip, _ = parse_abc("X:1\nL:1/8\nK:G\nF F|")
        assert [n.pitch for n in clip.notes] == [66, 66]

    def test_rest_only_body_is_one_bar(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:C\nz4")
        assert clip.notes == () and clip.length == 1920

    def test_broken_rhythm(self):
        clip, _ = parse_abc("X:1\nL:1/8\nK:C\nC>D")
        assert note_tuples(clip) == [(60, 0, 360, 96), (62, 360, 120, 96)]

    def test_trailing_rests_extend_length(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:C\nC z3|z4|")
        assert clip.length == 3840

    def test_accidental_persists_to_end_of_measure(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:C\n^FF|F2")
        assert [n.pitch for n in clip.notes] == [66, 66, 65]

    def test_explicit_natural_cancels_key(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:G\n=FF|")
        assert [n.pitch for n in clip.notes] == [65, 65]

    def test_chord_duration_from_first_inner_note(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:C\n[C2EG]")
        assert {(n.pitch, n.start, n.duration) for n in clip.notes} == {
            (60, 0, 960),
            (64, 0, 960),
            (67, 0, 960),
        }

    def test_tie_merges_equal_pitches(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:C\nC2-|C2")
        assert note_tuples(clip) == [(60, 0, 1920, 96)]

    def test_triplet(self):
        clip, _ = parse_abc("X:1\nL:1/8\nK:C\n(3CDE")
        assert [(n.start, n.duration) for n in clip.notes] == [(0, 160), (160, 160), (320, 160)]

    def test_skips_decorations_annotations_graces_slurs(self):
        clip, _ = parse_abc('X:1\nL:1/4\nK:C\n~.!trill!"Am"{ga}(C D) E F|')
        assert [n.pitch for n in clip.notes] == [60, 62, 64, 65]

    def test_header_fields(self):
        _, header = parse_abc("X:1\nT:Title\nM:3/4\nL:1/16\nQ:1/4=90\nK:Am\nA")
        assert header.meter == TimeSig(3, 4)
        assert header.unit_len.denominator == 16
        assert header.tempo_bpm == 90
        assert header.key.mode == "minor" and header.key.tonic_pc == 9

    def test_meter_c_and_cut(self):
        _, h1 = parse_abc("M:C\nK:C\nC")
        _, h2 = parse_abc("M:C|\nK:C\nC")
        assert h1.meter == TimeSig(4, 4) and h2.meter == TimeSig(2, 2)


class TestParseAbcErrors:
    def test_missing_key_header(self):
        with pytest.raises(AbcParseError, match="K:"):
            parse_abc("X:1\nL:1/4\nCDEF")

    def test_unknown_token(self):
        with pytest.raises(AbcParseError, match="unexpected character"):
            parse_abc("X:1\nK:C\nC*D")

    def test_unsupported_tuplet(self):
        with pytest.raises(AbcParseError, match="tuplet"):
            parse_abc("X:1\nK:C\n(5CDEFG")

    def test_tie_between_different_pitches(self):
        with pytest.raises(AbcParseError, match="tie"):
            parse_abc("X:1\nK:C\nC-D")

    def test_variant_ending_rejected(self):
        with pytest.raises(AbcParseError):
            parse_abc("X:1\nK:C\nC|[1 D|")

    def test_no_bar_length_validation(self):
        clip, _ = parse_abc("X:1\nL:1/4\nK:C\nC8 C8|")  # wildly overflowing measure
        assert len(clip.notes) == 2


class TestCorpusAgainstOracle:
    """Every corpus file: package parser == independent oracle == frozen values."""

    EXPECTED = json.loads((CORPUS_DIR / "abc_expected.json").read_text())

    @pytest.mark.parametrize("name", sorted(EXPECTED))
    def test_matches_oracle_and_frozen(self, name):
        text = (CORPUS_DIR / "abc" / name).read_text()
        clip, _ = parse_abc(text)
        ours = sorted((n.pitch, n.start, n.duration) for n in clip.notes)
        oracle = oracle_convert(text)
        frozen = [tuple(n) for n in self.EXPECTED[name]]
        assert ours == oracle == frozen


class TestRenderAbc:
    def test_single_note_uses_sixteenth_units(self):
        clip = clip_from_notes([NoteEvent(60, 0, 480, 96)], FOUR_FOUR)
        text = render_abc(clip, 120)
        assert "C4" in text
        assert "L:1/16" in text
        assert "Q:1/4=120" in text and "K:C" in text

    def test_empty_clip_is_a_bar_of_rest(self):
        clip = clip_from_notes([], FOUR_FOUR)
        assert "z16|" in render_abc(clip, 120)

    def test_off_grid_raises(self):
        clip = clip_from_notes([NoteEvent(60, 7, 475, 96)], FOUR_FOUR)
        with pytest.raises(QuantizeRequiredError):
            render_abc(clip, 120)

    def test_explicit_accidentals_and_naturals(self):
        clip = clip_from_notes(
            [NoteEvent(61, 0, 480, 96), NoteEvent(60, 480, 480, 96)], FOUR_FOUR
        )
        text = render_abc(clip, 120)
        body = text.split("K:C\n", 1)[1]
        assert "^C" in body and "=C" in body

    def test_equal_start_and_duration_becomes_chord(self):
        clip = clip_from_notes(
            [NoteEvent(60, 0, 480, 96), NoteEvent(64, 0, 480, 96)], FOUR_FOUR
        )
        body = render_abc(clip, 120).split("K:C\n", 1)[1]
        assert body.startswith("[")

    def test_round_trip_multiset(self):
        clip = clip_from_notes(
            [
                NoteEvent(36, 0, 240, 96),
                NoteEvent(48, 240, 120, 96),
                NoteEvent(61, 360, 600, 96),
                NoteEvent(75, 960, 960, 96),
            ],
            FOUR_FOUR,
        )
        back, _ = parse_abc(render_abc(clip, 100))
        assert back.pitch_start_duration() == clip.pitch_start_duration()


@st.composite
def representable_clips(draw):
    events = draw(
        st.lists(
            st.tuples(
                st.integers(0, 8),
                st.integers(1, 16),
                st.lists(st.integers(24, 96), min_size=1, max_size=4, unique=True),
            ),
            max_size=20,
        )
    )
    time_sig = draw(st.sampled_from([FOUR_FOUR, TimeSig(3, 4), TimeSig(6, 8), TimeSig(2, 2)]))
    notes, pos = [], 0
    for gap, dur, pitches in events:
        pos += gap * 30
        for pitch in pitches:
            notes.append(NoteEvent(pitch, pos, dur * 30, 96))
        pos += dur * 30
    return clip_from_notes(notes, time_sig, min_end=pos)


class TestRoundTripProperty:
    @settings(max_examples=150, deadline=None)
    @given(representable_clips())
    def test_parse_render_round_trip(self, clip):
        back, header = parse_abc(render_abc(clip, 117.5))
        assert back.pitch_start_duration() == clip.pitch_start_duration()
        assert header.meter == clip.time_sig

    def test_seeded_bulk_round_trip(self):
        rng = random.Random(99)
        for _ in range(100):
            clip = make_random_clip(rng)
            back, _ = parse_abc(render_abc(clip, 120))
            assert back.pitch_start_duration() == clip.pitch_start_duration()
