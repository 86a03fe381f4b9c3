"""Senone-based Goodness of Pronunciation scoring.

For a phone segment spanning frames t_1..t_T with aligned senones s_t:

    GoP = (1/T) * | sum_t [ log P(s_t | o_t) + log P(s_t | s_{t-1}) ]
                   + log N_senones |

The t_1 transition term is the uniform cross-phone entry probability
(1 / number of phones) unless `skip_entry` is set.  The score is a
magnitude, so lower means closer to the model's idea of native speech.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySegment, LengthMismatch, SenoneOutOfRange
from .lexicon import SIL_PHONE, SPN_PHONE

SILENCE_PHONES = frozenset({SIL_PHONE, SPN_PHONE})


@dataclass(frozen=True)
class GopRecord:
    phone: str
    word: str | None
    start: float     # seconds
    duration: float  # seconds
    score: float
    num_frames: int
    is_silence: bool


@dataclass(frozen=True)
class GopReport:
    utt_id: str
    records: tuple
    word_boundaries: tuple  # (word, start sec, end sec)

    @property
    def scores(self):
        return tuple(r.score for r in self.records)

    def serialize(self):
        """One `utt-id phone word start dur gop` line per phone record."""
        lines = []
        for r in self.records:
            word = r.word if r.word is not None else "-"
            lines.append(
                f"{self.utt_id} {r.phone} {word} "
                f"{r.start:.2f} {r.duration:.2f} {r.score:.4f}"
            )
        return "".join(ln + "\n" for ln in lines)

    def vector_line(self):
        return self.utt_id + " " + " ".join(f"{s:.4f}" for s in self.scores)


def score_phone(frame_range, frame_senones, post, am, skip_entry=False):
    """GoP score for one phone segment.

    `frame_range` is (start, end) into the utterance; `frame_senones` gives
    the aligned senone per frame of the whole utterance; `post` is the
    utterance posterior matrix.
    """
    start, end = frame_range
    if end <= start:
        raise EmptySegment(f"empty segment [{start}, {end})")
    if end > post.shape[0] or end > len(frame_senones):
        raise LengthMismatch("segment extends past the utterance")
    total = 0.0
    for t in range(start, end):
        s = frame_senones[t]
        if not 0 <= s < am.senone_count:
            raise SenoneOutOfRange(f"senone {s} at frame {t}")
        total += math.log(max(post[t, s], 1e-300))
        if t == start:
            if not skip_entry:
                total += am.entry_logprob()
        else:
            total += am.transition_logprob_raw(frame_senones[t - 1], s)
    total += math.log(am.senone_count)
    return abs(total) / (end - start)


def score_utterance(alignment, post, am, skip_entry=False):
    """One GoP record per aligned phone segment, in order."""
    if post.shape[0] != alignment.num_frames:
        raise LengthMismatch(
            f"{post.shape[0]} posterior rows vs {alignment.num_frames} aligned frames"
        )
    shift = alignment.frame_shift
    records = []
    for seg in alignment.phone_segments:
        score = score_phone((seg.start, seg.end), alignment.frame_senones,
                            post, am, skip_entry=skip_entry)
        word = (alignment.words[seg.word_index]
                if seg.word_index is not None else None)
        records.append(GopRecord(
            phone=seg.phone,
            word=word,
            start=seg.start * shift,
            duration=seg.num_frames * shift,
            score=score,
            num_frames=seg.num_frames,
            is_silence=seg.phone in SILENCE_PHONES,
        ))
    boundaries = tuple(
        (w.word, w.start * shift, w.end * shift) for w in alignment.word_segments
    )
    return GopReport(alignment.utt_id, tuple(records), boundaries)


def export_posterior_map(alignment, post):
    """Per-segment posterior blocks keyed `uttid#segidx#phone`, in order."""
    if post.shape[0] != alignment.num_frames:
        raise LengthMismatch("posterior rows do not match aligned frames")
    blocks = []
    for i, seg in enumerate(alignment.phone_segments):
        key = f"{alignment.utt_id}#{i}#{seg.phone}"
        blocks.append((key, np.array(post[seg.start:seg.end])))
    return blocks


def posterior_map_text(blocks):
    """Feature-archive style text rendering of exported posterior blocks."""
    lines = []
    for key, mat in blocks:
        rows = " ; ".join(" ".join(repr(float(v)) for v in row) for row in mat)
        lines.append(f"{key} [ {rows} ]")
    return "".join(ln + "\n" for ln in lines)
