"""Pronunciation lexicons, vocabularies and phone inventories.

A lexicon is an ordered list of (word, pronunciation) entries.  The first
three entries of a finalized lexicon are the silence word, the spoken-noise
word and the unknown word, mapping to the SIL and SPN phones.  Everything
here is immutable; "mutation" returns a new value.
"""

from dataclasses import dataclass, field

from .errors import (
    EmptyPronunciation,
    MalformedLine,
    PhoneInventoryMismatch,
    UnknownPhone,
)

SIL_PHONE = "SIL"
SPN_PHONE = "SPN"

SILENCE_WORD = "<SIL>"
NOISE_WORD = "<SPOKEN_NOISE>"
UNKNOWN_WORD = "<UNK>"

#: (word, pronunciation) pairs every finalized lexicon must contain.
SPECIAL_ENTRIES = (
    (SILENCE_WORD, (SIL_PHONE,)),
    (NOISE_WORD, (SPN_PHONE,)),
    (UNKNOWN_WORD, (SPN_PHONE,)),
)

SPECIAL_WORDS = frozenset(w for w, _ in SPECIAL_ENTRIES)

SOURCE_BASE = "base"
SOURCE_G2P = "g2p-generated"


@dataclass(frozen=True, order=True)
class LexiconEntry:
    word: str
    phones: tuple
    source: str = field(default=SOURCE_BASE, compare=False)

    def line(self):
        return self.word + " " + " ".join(self.phones)


@dataclass(frozen=True)
class PhoneInventory:
    silence_phones: frozenset
    nonsilence_phones: frozenset

    def __post_init__(self):
        overlap = self.silence_phones & self.nonsilence_phones
        if overlap:
            raise PhoneInventoryMismatch(
                f"phones both silence and nonsilence: {sorted(overlap)}"
            )

    @property
    def phones(self):
        return self.silence_phones | self.nonsilence_phones

    def ordered(self):
        """Deterministic phone order: silence phones first, then the rest."""
        return sorted(self.silence_phones) + sorted(self.nonsilence_phones)


@dataclass(frozen=True)
class Vocabulary:
    words: tuple

    def __post_init__(self):
        if any(not w for w in self.words):
            raise ValueError("vocabulary contains an empty word")
        object.__setattr__(self, "words", tuple(sorted(set(self.words))))

    def __contains__(self, word):
        return word in set(self.words)

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)


@dataclass(frozen=True)
class Lexicon:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", _sort_dedup(self.entries))

    def words(self):
        return {e.word for e in self.entries}

    def pronunciations(self, word):
        return [e.phones for e in self.entries if e.word == word]

    def __contains__(self, word):
        return word in self.words()

    def __len__(self):
        return len(self.entries)

    def has_specials(self):
        pairs = {(e.word, e.phones) for e in self.entries}
        return all(s in pairs for s in SPECIAL_ENTRIES)

    def with_specials(self):
        """Return a copy guaranteed to contain the three special entries."""
        extra = [LexiconEntry(w, p) for w, p in SPECIAL_ENTRIES]
        return Lexicon(self.entries + tuple(extra))

    def serialize(self):
        return "".join(e.line() + "\n" for e in self.entries)


def _sort_dedup(entries):
    seen = {}
    for e in entries:
        key = (e.word, e.phones)
        # keep the first source tag seen for a duplicate pair
        if key not in seen:
            seen[key] = e
    return tuple(sorted(seen.values()))


def parse_lexicon(text, inventory=None, source=SOURCE_BASE):
    """Parse lexicon text, one `WORD PHONE PHONE ...` entry per line.

    Words are uppercased; tabs and runs of spaces both separate fields.
    When `inventory` is given every phone is validated against it.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) == 1:
            raise EmptyPronunciation(lineno, fields[0])
        word = fields[0].upper()
        phones = tuple(fields[1:])
        if not word:
            raise MalformedLine(lineno, raw)
        if inventory is not None:
            for p in phones:
                if p not in inventory.phones:
                    raise UnknownPhone(word, p)
        entries.append(LexiconEntry(word, phones, source))
    return Lexicon(tuple(entries))


def load_lexicon(path, inventory=None, source=SOURCE_BASE):
    with open(path, encoding="utf-8") as f:
        return parse_lexicon(f.read(), inventory=inventory, source=source)


def save_lexicon(lexicon, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(lexicon.serialize())


def find_oov(transcript, lexicons):
    """Words of `transcript` absent from every lexicon in `lexicons`.

    `transcript` may be a whitespace-joined string or a token sequence.
    """
    if isinstance(transcript, str):
        tokens = transcript.split()
    else:
        tokens = list(transcript)
    known = set()
    for lex in lexicons:
        known |= lex.words()
    missing = {t.upper() for t in tokens} - known
    return Vocabulary(tuple(sorted(missing)))


def merge_lexicons(base, addition, inventory=None):
    """Union of two lexicons, sorted and deduplicated.

    When `inventory` is given, both sides must validate against it.
    """
    if inventory is not None:
        for lex in (base, addition):
            for e in lex.entries:
                for p in e.phones:
                    if p not in inventory.phones:
                        raise PhoneInventoryMismatch(
                            f"entry {e.word!r} uses phone {p!r} outside the inventory"
                        )
    return Lexicon(base.entries + addition.entries)


def derive_inventory(lexicon):
    """Split the phones used by `lexicon` into silence and nonsilence sets.

    A phone is silence when it is only ever used by the special entries.
    SIL and SPN are silence phones even if the lexicon lacks the specials.
    """
    special_phones = set()
    normal_phones = set()
    for e in lexicon.entries:
        target = special_phones if e.word in SPECIAL_WORDS else normal_phones
        target.update(e.phones)
    silence = (special_phones - normal_phones) | {SIL_PHONE, SPN_PHONE}
    silence -= normal_phones
    return PhoneInventory(frozenset(silence), frozenset(normal_phones))


def save_inventory(inventory, directory):
    """Write silence_phones.txt / nonsilence_phones.txt under `directory`."""
    import os

    for name, phones in (
        ("silence_phones.txt", inventory.silence_phones),
        ("nonsilence_phones.txt", inventory.nonsilence_phones),
    ):
        with open(os.path.join(directory, name), "w", newline="\n") as f:
            for p in sorted(phones):
                f.write(p + "\n")


def save_vocabulary(vocab, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for w in vocab:
            f.write(w + "\n")


def load_vocabulary(path):
    with open(path, encoding="utf-8") as f:
        return Vocabulary(tuple(w.strip().upper() for w in f if w.strip()))
