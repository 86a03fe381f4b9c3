"""Exception hierarchy shared across the package."""


class GopForgeError(Exception):
    """Base class for all domain errors raised by this package."""


# --- lexicon ---

class MalformedLine(GopForgeError):
    def __init__(self, lineno, line):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: malformed lexicon entry: {line!r}")


class EmptyPronunciation(GopForgeError):
    def __init__(self, lineno, word):
        self.lineno = lineno
        self.word = word
        super().__init__(f"line {lineno}: empty pronunciation for {word!r}")


class UnknownPhone(GopForgeError):
    def __init__(self, word, phone):
        self.word = word
        self.phone = phone
        super().__init__(f"entry {word!r} uses phone {phone!r} not in inventory")


class PhoneInventoryMismatch(GopForgeError):
    pass


class EmptyLexicon(GopForgeError):
    pass


# --- g2p ---

class EmptyTrainingSet(GopForgeError):
    pass


class NoValidSegmentation(GopForgeError):
    def __init__(self, word, phones):
        self.word = word
        self.phones = phones
        super().__init__(
            f"({word!r}, {' '.join(phones)!r}) has no segmentation under the "
            "configured graphone size bounds"
        )


class UnknownGrapheme(GopForgeError):
    def __init__(self, word, grapheme):
        self.word = word
        self.grapheme = grapheme
        super().__init__(f"word {word!r} contains unknown grapheme {grapheme!r}")


class NoHypothesis(GopForgeError):
    pass


class G2pFailure(GopForgeError):
    """One or more words could not be converted; carries the full list."""

    def __init__(self, failures):
        self.failures = list(failures)
        words = ", ".join(w for w, _ in self.failures)
        super().__init__(f"grapheme-to-phoneme conversion failed for: {words}")


# --- wfst ---

class AlphabetMismatch(GopForgeError):
    pass


class NonFunctional(GopForgeError):
    """Determinization exceeded its expansion bound.

    Usually means the input transducer has homophones without
    disambiguation symbols.
    """


class NotDeterministic(GopForgeError):
    pass


class BeamCollapse(GopForgeError):
    def __init__(self, frame):
        self.frame = frame
        super().__init__(f"no surviving hypothesis at frame {frame}; widen the beam")


# --- acoustic ---

class TooShort(GopForgeError):
    pass


class UnsupportedFormat(GopForgeError):
    pass


class InsufficientData(GopForgeError):
    pass


class DimensionMismatch(GopForgeError):
    pass


class UnknownSenone(GopForgeError):
    pass


# --- align ---

class OovWord(GopForgeError):
    def __init__(self, word):
        self.word = word
        super().__init__(f"word {word!r} has no lexicon entry")


class TooFewFrames(GopForgeError):
    pass


# --- gop ---

class EmptySegment(GopForgeError):
    pass


class SenoneOutOfRange(GopForgeError):
    pass


class LengthMismatch(GopForgeError):
    pass


# --- pipeline ---

class OovAtRuntime(GopForgeError):
    def __init__(self, words):
        self.words = sorted(words)
        super().__init__(
            "offline mode hit out-of-vocabulary word(s) at scoring time: "
            + ", ".join(self.words)
        )


class LexiconOverflow(GopForgeError):
    pass


class ConfigError(GopForgeError):
    pass
