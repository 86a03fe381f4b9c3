"""Tiny synthetic speech corpus shared by the demo scripts.

Each phone is a fixed two-tone chord, so a small monophone GMM-HMM can
learn the classes from a couple of minutes of audio and the whole demo
chain runs in seconds on a laptop.
"""

import os

import numpy as np

from gop_forge import acoustic, lexicon

RATE = 16000
PHONE_SECONDS = 0.12
SIL_SECONDS = 0.20

PHONE_FREQS = {
    "AA": (310, 2500),
    "IY": (520, 3100),
    "M": (840, 1650),
    "S": (1320, 4200),
    "T": (2150, 3350),
    "K": (1700, 2750),
}

LEXICON_TEXT = """\
MA M AA
MI M IY
SA S AA
SI S IY
TA T AA
TI T IY
KA K AA
KI K IY
MAS M AA S
MIT M IY T
TAM T AA M
TIK T IY K
KAT K AA T
SIT S IY T
KIS K IY S
SAT S AA T
MAK M AA K
TIS T IY S
KAM K AA M
SIK S IY K
"""

#: words absent from LEXICON_TEXT but spelled with the same letters
OOV_WORDS = ("KIT", "SAM", "TAS", "MIK")


def base_lexicon():
    return lexicon.parse_lexicon(LEXICON_TEXT)


def phone_wave(phone, rng, seconds=PHONE_SECONDS):
    n = int(seconds * RATE)
    noise = rng.standard_normal(n)
    if phone not in PHONE_FREQS:
        return 0.004 * noise  # SIL / SPN: near-silence
    t = np.arange(n) / RATE
    f1, f2 = PHONE_FREQS[phone]
    sig = 0.45 * np.sin(2 * np.pi * f1 * t) + 0.3 * np.sin(2 * np.pi * f2 * t)
    return sig + 0.02 * noise


def utterance_for_words(words, lex, rng):
    """(samples, phone transcript incl. edge silence) for a word sequence."""
    phones = []
    for w in words:
        prons = lex.pronunciations(w)
        phones.extend(prons[0] if prons else [c if c in "MSTK" else
                                              {"A": "AA", "I": "IY"}[c]
                                              for c in w])
    chunks = [phone_wave(lexicon.SIL_PHONE, rng, SIL_SECONDS)]
    chunks.extend(phone_wave(p, rng) for p in phones)
    chunks.append(phone_wave(lexicon.SIL_PHONE, rng, SIL_SECONDS))
    transcript = [lexicon.SIL_PHONE] + phones + [lexicon.SIL_PHONE]
    return np.concatenate(chunks), transcript


def training_corpus(seed=0):
    """Feature matrices and phone transcripts covering every lexicon word."""
    rng = np.random.default_rng(seed)
    lex = base_lexicon()
    words = sorted(lex.words())
    features = []
    transcripts = []
    for i in range(0, len(words), 2):
        wave, transcript = utterance_for_words(words[i:i + 2], lex, rng)
        features.append(acoustic.extract_features(wave, RATE))
        transcripts.append(transcript)
    return features, transcripts


def write_corpus(directory, words_per_utt, seed=0):
    """WAV files plus a pipeline manifest; returns the manifest path."""
    rng = np.random.default_rng(seed)
    lex = base_lexicon()
    os.makedirs(directory, exist_ok=True)
    rows = []
    for i, words in enumerate(words_per_utt):
        wave, _ = utterance_for_words(words, lex, rng)
        path = os.path.join(directory, f"utt{i:03d}.wav")
        acoustic.write_wav(path, wave, RATE)
        rows.append(f"utt{i:03d}\t{path}\t{' '.join(words)}")
    manifest = os.path.join(directory, "manifest.tsv")
    with open(manifest, "w", newline="\n") as f:
        f.write("".join(r + "\n" for r in rows))
    return manifest
