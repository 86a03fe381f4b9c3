"""Forced alignment against a compiled graph, with CTM output.

The utterance graph is the decoding graph (HCL) composed with a linear
acceptor over the transcript words, so it accepts exactly the senone
sequences that realize the transcript (with optional silence).  Alignment
runs a beam Viterbi over per-frame senone posterior costs; word boundaries
are then recovered by matching the aligned phone segments against the
lexicon pronunciations of the transcript.
"""

from dataclasses import dataclass

import numpy as np

from . import wfst
from .acoustic import posteriors as compute_posteriors
from .errors import OovWord, TooFewFrames
from .lexicon import SIL_PHONE

POSTERIOR_FLOOR = 1e-20


@dataclass(frozen=True)
class PhoneSegment:
    phone: str
    start: int  # frame, inclusive
    end: int    # frame, exclusive
    word_index: int | None  # None for silence

    @property
    def num_frames(self):
        return self.end - self.start


@dataclass(frozen=True)
class WordSegment:
    word: str
    start: int
    end: int


@dataclass(frozen=True)
class Alignment:
    utt_id: str
    frame_senones: tuple
    phone_segments: tuple
    word_segments: tuple
    words: tuple
    frame_shift: float

    @property
    def num_frames(self):
        return len(self.frame_senones)


@dataclass(frozen=True)
class CtmRow:
    utt_id: str
    channel: str
    start: float
    duration: float
    token: str

    def line(self):
        return f"{self.utt_id} {self.channel} {self.start:.2f} {self.duration:.2f} {self.token}"


def make_word_acceptor(words, osyms):
    """Linear acceptor for a word sequence over the given symbol table."""
    fst = wfst.Wfst(osyms, osyms)
    prev = fst.add_state()
    fst.start = prev
    for w in words:
        if w not in osyms:
            raise OovWord(w)
        cur = fst.add_state()
        fst.add_arc(prev, osyms.index(w), osyms.index(w), wfst.ONE, cur)
        prev = cur
    fst.set_final(prev, wfst.ONE)
    return fst


def build_decoding_graph(lexicon, inventory, am, sil_prob=0.5):
    """Compile HCL = min(det(H o min(det(C o L)))) for a lexicon."""
    l_fst = wfst.build_L(lexicon, inventory, with_disambig=True, sil_prob=sil_prob)
    ndisambig = wfst.num_disambig(lexicon)
    c_fst = wfst.build_C(inventory, ndisambig=ndisambig)
    h_fst = wfst.build_H(am, inventory, ndisambig=ndisambig)
    return wfst.compile_hcl(h_fst, c_fst, l_fst)


def compile_utterance_graph(transcript, lexicon, inventory, am, hcl=None):
    """Restrict the decoding graph to one transcript.

    Raises OovWord when a transcript word has no lexicon entry; the
    pipeline is supposed to have resolved OOV before this point.
    """
    if isinstance(transcript, str):
        words = transcript.upper().split()
    else:
        words = [w.upper() for w in transcript]
    if not words:
        raise OovWord("<empty transcript>")
    for w in words:
        if w not in lexicon:
            raise OovWord(w)
    if hcl is None:
        hcl = build_decoding_graph(lexicon, inventory, am)
    acceptor = make_word_acceptor(words, hcl.osyms)
    graph = wfst.compose(hcl, acceptor)
    if not graph.finals:
        raise OovWord(" ".join(words))
    return graph


def _match_words(segments, words, lexicon):
    """Assign each non-silence phone segment to a transcript word.

    Backtracking over the pronunciation alternatives of each word; silence
    segments may separate words but never split one.  Returns a word index
    per segment (None for silence).  SPN is not skipped: it realizes the
    unknown-word entry and must attach to that word.
    """
    silence = {SIL_PHONE}
    n = len(segments)

    def is_sil(i):
        return segments[i].phone in silence

    def rec(i_seg, i_word, acc):
        while i_seg < n and is_sil(i_seg) :
            acc.append(None)
            i_seg += 1
        if i_word == len(words):
            return acc if i_seg == n else None
        for pron in lexicon.pronunciations(words[i_word]):
            k = len(pron)
            if i_seg + k > n:
                continue
            if any(is_sil(i_seg + j) for j in range(k)):
                continue
            if tuple(s.phone for s in segments[i_seg:i_seg + k]) != tuple(pron):
                continue
            result = rec(i_seg + k, i_word + 1, acc + [i_word] * k)
            if result is not None:
                return result
        return None

    return rec(0, 0, [])


def force_align(graph, features, am, utt_id="utt", transcript=None,
                lexicon=None, beam=200):
    """Beam Viterbi alignment of `features` against a compiled graph.

    Frame scores are negated log posteriors; transition costs live on the
    graph arcs.  Returns an Alignment whose phone segments tile [0, T).
    """
    T = features.num_frames
    if T < 1:
        raise TooFewFrames("empty feature matrix")
    post = compute_posteriors(am, features)
    frame_scores = -np.log(np.maximum(post, POSTERIOR_FLOOR))
    path = wfst.shortest_path_beam(graph, frame_scores, beam)
    if len(path.frame_senones) != T:
        raise TooFewFrames(
            f"{T} frames but best path consumed {len(path.frame_senones)}"
        )
    frame_senones = tuple(path.frame_senones)
    frame_phones = [am.phones[am.phone_of_senone(s)] for s in frame_senones]

    # group consecutive frames into phone segments; a segment break happens
    # on a phone change or when the state index moves backward (phone repeat)
    segments = []
    start = 0
    for t in range(1, T + 1):
        if t == T:
            segments.append((frame_phones[start], start, t))
        elif frame_phones[t] != frame_phones[start]:
            segments.append((frame_phones[start], start, t))
            start = t
        elif am.state_of_senone(frame_senones[t]) < am.state_of_senone(frame_senones[t - 1]):
            segments.append((frame_phones[start], start, t))
            start = t
        elif (am.state_of_senone(frame_senones[t]) == 0
              and am.state_of_senone(frame_senones[t - 1]) == am.states_per_phone - 1
              and am.states_per_phone > 1):
            segments.append((frame_phones[start], start, t))
            start = t

    if transcript is None:
        words = tuple(graph.osyms.symbol(o) for o in path.olabels)
    elif isinstance(transcript, str):
        words = tuple(transcript.upper().split())
    else:
        words = tuple(w.upper() for w in transcript)

    plain = [PhoneSegment(p, s, e, None) for p, s, e in segments]
    if lexicon is not None and words:
        indices = _match_words(plain, list(words), lexicon)
        if indices is not None:
            plain = [
                PhoneSegment(seg.phone, seg.start, seg.end, idx)
                for seg, idx in zip(plain, indices)
            ]
    word_segments = []
    for i, w in enumerate(words):
        covered = [s for s in plain if s.word_index == i]
        if covered:
            word_segments.append(WordSegment(w, covered[0].start, covered[-1].end))
    return Alignment(
        utt_id=utt_id,
        frame_senones=frame_senones,
        phone_segments=tuple(plain),
        word_segments=tuple(word_segments),
        words=words,
        frame_shift=features.frame_shift,
    )


def emit_ctm(alignment, frame_shift=None, level="phone"):
    """CTM rows for an alignment; silence is kept at phone level only."""
    shift = frame_shift if frame_shift is not None else alignment.frame_shift
    rows = []
    if level == "phone":
        for seg in alignment.phone_segments:
            rows.append(CtmRow(alignment.utt_id, "1", seg.start * shift,
                               seg.num_frames * shift, seg.phone))
    elif level == "word":
        for seg in alignment.word_segments:
            rows.append(CtmRow(alignment.utt_id, "1", seg.start * shift,
                               (seg.end - seg.start) * shift, seg.word))
    else:
        raise ValueError(f"unknown ctm level {level!r}")
    return rows


def ctm_text(rows):
    return "".join(r.line() + "\n" for r in rows)


def alignment_dump_line(alignment):
    """`utt-id senone senone ...` research dump format."""
    return alignment.utt_id + " " + " ".join(str(s) for s in alignment.frame_senones)
