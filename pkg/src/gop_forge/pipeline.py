"""End-to-end scoring with the three OOV strategies.

Offline pre-expands the lexicon from the whole corpus and never touches it
again; Online expands per utterance and discards the additions; Hybrid
expands per utterance and keeps the additions, so each unique OOV word
costs exactly one graph compilation.

Missing transcript words are resolved in two steps: entries copied from
secondary lookup dictionaries when available, otherwise one-best
grapheme-to-phoneme generation.  A word that no source can resolve aborts
the utterance; silently mapping it to SPN is exactly the failure this
package exists to prevent.
"""

import hashlib
import os
from dataclasses import dataclass, replace

from . import align as align_mod
from . import g2p as g2p_mod
from . import gop as gop_mod
from .acoustic import extract_features, posteriors as compute_posteriors, read_wav
from .errors import (
    ConfigError,
    G2pFailure,
    GopForgeError,
    LexiconOverflow,
    OovAtRuntime,
)
from .lexicon import (
    SIL_PHONE,
    SOURCE_G2P,
    SPN_PHONE,
    UNKNOWN_WORD,
    Lexicon,
    LexiconEntry,
    PhoneInventory,
    Vocabulary,
    derive_inventory,
    find_oov,
    merge_lexicons,
    save_lexicon,
)

MODES = ("offline", "online", "hybrid")
MODEL_VERSION = "1"


@dataclass
class PipelineConfig:
    mode: str = "hybrid"
    lexicon: str = ""
    extra_lexicons: tuple = ()
    g2p_model: str = ""
    acoustic_model: str = ""
    cache_dir: str = ""
    output_dir: str = "out"
    beam: int = 200
    sil_prob: float = 0.5
    resolve_oov: bool = True
    strict: bool = False
    online_variant: str = "lexicon"  # or "vocab"
    growth_limit: float = 10.0
    skip_entry_transition: bool = False
    seed: int = 0


def load_config(path):
    """Parse a `key = value` config file into a PipelineConfig."""
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    cfg = PipelineConfig()
    for key, value in values.items():
        if key == "extra_lexicons":
            cfg.extra_lexicons = tuple(v for v in value.split(",") if v)
        elif key in ("beam", "seed"):
            setattr(cfg, key, int(value))
        elif key in ("sil_prob", "growth_limit"):
            setattr(cfg, key, float(value))
        elif key in ("resolve_oov", "strict", "skip_entry_transition"):
            setattr(cfg, key, value.lower() in ("1", "true", "yes"))
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    return cfg


@dataclass(frozen=True)
class LexiconState:
    lexicon: Lexicon
    base_entries: int
    persisted_g2p: int = 0
    transient_g2p: int = 0

    @property
    def cache_key(self):
        return lexicon_hash(self.lexicon)


def lexicon_hash(lexicon):
    digest = hashlib.sha256(
        (lexicon.serialize() + "\n" + MODEL_VERSION).encode()
    ).hexdigest()
    return digest[:16]


def generate_oov_lexicon(oov, g2p_model, nbest_beam=100):
    """One-best pronunciation per OOV word, tagged g2p-generated.

    All failures are collected and raised together; no word is silently
    mapped to SPN.
    """
    entries = []
    failures = []
    for word in oov:
        try:
            results = g2p_mod.decode(g2p_model, word, beam=nbest_beam, nbest=1)
            entries.append(LexiconEntry(word, results[0][0], SOURCE_G2P))
        except GopForgeError as e:
            failures.append((word, str(e)))
    if failures:
        raise G2pFailure(failures)
    return Lexicon(tuple(entries))


@dataclass
class UtteranceResult:
    utt_id: str
    report: object
    alignment: object
    posterior_blocks: list
    oov_words: tuple
    recompiled: bool


class ScoringEngine:
    """Holds the models, lexicon state and graph cache for one run."""

    def __init__(self, base_lexicon, extra_lexicons, g2p_model, am, mode,
                 config=None, lexicon_out=None):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        self.mode = mode
        self.config = config or PipelineConfig(mode=mode)
        self.extra_lexicons = list(extra_lexicons)
        self.g2p_model = g2p_model
        self.am = am
        self.lexicon_out = lexicon_out
        base = base_lexicon.with_specials()
        self.state = LexiconState(base, base_entries=len(base))
        # graph alphabets cover every model phone, so lexicon growth never
        # changes the symbol tables
        silence = frozenset({SIL_PHONE, SPN_PHONE} & set(am.phones))
        self.inventory = PhoneInventory(silence, frozenset(am.phones) - silence)
        self._inventory_for(base)
        self._cache = {}
        self._base_key = None
        self.initial_compilations = 0
        self.recompilations = 0
        self.oov_seen = []
        self._prepared = mode != "offline"

    def _inventory_for(self, lexicon):
        """Validate lexicon phones against the fixed model inventory."""
        used = derive_inventory(lexicon).phones
        unknown = used - set(self.am.phones)
        if unknown:
            raise ConfigError(
                f"lexicon phones missing from acoustic model: {sorted(unknown)}"
            )
        return self.inventory

    # -- graph cache --

    def _compile(self, lexicon, runtime):
        key = lexicon_hash(lexicon)
        if key in self._cache:
            return self._cache[key], False
        graph = align_mod.build_decoding_graph(
            lexicon, self._inventory_for(lexicon), self.am,
            sil_prob=self.config.sil_prob,
        )
        self._cache[key] = graph
        if runtime:
            self.recompilations += 1
        else:
            self.initial_compilations += 1
        if self.config.cache_dir:
            os.makedirs(self.config.cache_dir, exist_ok=True)
            with open(os.path.join(self.config.cache_dir, key + ".fst"),
                      "w", newline="\n") as f:
                f.write(graph.serialize())
        return graph, True

    # -- OOV resolution --

    def _resolve_words(self, words):
        """Lexicon entries for words missing from the current lexicon.

        Secondary dictionaries are consulted first; remaining words go to
        the G2P model.  Returns (addition lexicon, true-OOV vocabulary).
        """
        missing = [w for w in sorted(set(words)) if w not in self.state.lexicon]
        looked_up = []
        rest = []
        for w in missing:
            prons = [p for lex in self.extra_lexicons for p in lex.pronunciations(w)]
            if prons:
                looked_up.extend(LexiconEntry(w, p) for p in sorted(set(prons)))
            else:
                rest.append(w)
        oov = find_oov(rest, [self.state.lexicon] + self.extra_lexicons)
        generated = generate_oov_lexicon(oov, self.g2p_model)
        addition = Lexicon(tuple(looked_up) + generated.entries)
        return addition, oov

    def _check_growth(self, lexicon):
        limit = self.config.growth_limit * self.state.base_entries
        if len(lexicon) > limit:
            raise LexiconOverflow(
                f"lexicon grew to {len(lexicon)} entries, over the "
                f"{self.config.growth_limit}x limit of the base size"
            )

    def _expand_online(self, transcript_words):
        """Transient expansion per the selected Online variant.

        Expanding the vocabulary first and regenerating the missing
        entries is equivalent to expanding the lexicon directly; both
        variants are implemented and must yield identical lexicons.
        """
        addition, oov = self._resolve_words(transcript_words)
        if self.config.online_variant == "vocab":
            vocab = Vocabulary(tuple(self.state.lexicon.words())
                               + tuple(transcript_words))
            wanted = [w for w in vocab if w not in self.state.lexicon]
            regen, _ = self._resolve_words(wanted)
            merged = merge_lexicons(self.state.lexicon, regen)
        else:
            merged = merge_lexicons(self.state.lexicon, addition)
        return merged, addition, oov

    # -- pipeline operations --

    def run_offline_prepare(self, all_transcripts):
        """Resolve every corpus word once and compile the graph once."""
        if self.mode != "offline":
            raise ConfigError("offline preparation requires offline mode")
        words = []
        for t in all_transcripts:
            words.extend(t.upper().split() if isinstance(t, str)
                         else [w.upper() for w in t])
        addition, oov = self._resolve_words(words)
        merged = merge_lexicons(self.state.lexicon, addition)
        self._check_growth(merged)
        self.state = LexiconState(
            merged, self.state.base_entries,
            persisted_g2p=sum(1 for e in addition.entries if e.source == SOURCE_G2P),
        )
        if self.lexicon_out:
            save_lexicon(self.state.lexicon, self.lexicon_out)
        self._compile(self.state.lexicon, runtime=False)
        self.oov_seen.extend(oov)
        self._prepared = True
        return self.state

    def _features(self, audio):
        if hasattr(audio, "frames"):
            return audio
        if isinstance(audio, (str, os.PathLike)):
            samples, rate = read_wav(audio)
            return extract_features(samples, rate)
        samples, rate = audio
        return extract_features(samples, rate)

    def run_utterance(self, utt_id, audio, transcript):
        """Score one utterance under the engine's mode."""
        if not self._prepared:
            raise ConfigError("offline mode requires run_offline_prepare first")
        words = (transcript.upper().split() if isinstance(transcript, str)
                 else [w.upper() for w in transcript])
        oov = Vocabulary(())
        recompiled = False
        if self.mode == "offline":
            missing = [w for w in words if w not in self.state.lexicon]
            if missing and self.config.resolve_oov:
                raise OovAtRuntime(missing)
            work_lexicon = self.state.lexicon
            graph, _ = self._compile(work_lexicon, runtime=False)
        elif not self.config.resolve_oov:
            work_lexicon = self.state.lexicon
            graph, _ = self._compile(work_lexicon, runtime=False)
        else:
            merged, addition, oov = self._expand_online(words)
            if addition.entries:
                self._check_growth(merged)
                if self.mode == "hybrid":
                    n_g2p = sum(1 for e in addition.entries
                                if e.source == SOURCE_G2P)
                    self.state = replace(
                        self.state, lexicon=merged,
                        persisted_g2p=self.state.persisted_g2p + n_g2p,
                    )
                    # write-ahead: persist resolved entries before scoring
                    if self.lexicon_out:
                        save_lexicon(self.state.lexicon, self.lexicon_out)
                    work_lexicon = self.state.lexicon
                    graph, recompiled = self._compile(work_lexicon, runtime=True)
                else:
                    work_lexicon = merged
                    key = lexicon_hash(work_lexicon)
                    self._cache.pop(key, None)  # online never reuses expansions
                    graph, recompiled = self._compile(work_lexicon, runtime=True)
                    self._cache.pop(key, None)
            else:
                work_lexicon = self.state.lexicon
                graph, _ = self._compile(work_lexicon, runtime=False)
        self.oov_seen.extend(oov)

        align_words = words
        if not self.config.resolve_oov:
            align_words = [w if w in work_lexicon else UNKNOWN_WORD for w in words]
        features = self._features(audio)
        inventory = self._inventory_for(work_lexicon)
        graph_utt = align_mod.compile_utterance_graph(
            align_words, work_lexicon, inventory, self.am, hcl=graph
        )
        alignment = align_mod.force_align(
            graph_utt, features, self.am, utt_id=utt_id,
            transcript=align_words, lexicon=work_lexicon,
            beam=self.config.beam,
        )
        post = compute_posteriors(self.am, features)
        report = gop_mod.score_utterance(
            alignment, post, self.am,
            skip_entry=self.config.skip_entry_transition,
        )
        blocks = gop_mod.export_posterior_map(alignment, post)
        return UtteranceResult(utt_id, report, alignment, blocks,
                               tuple(oov), recompiled)


def parse_manifest(path):
    """`utt-id<TAB>audio-path<TAB>transcript` lines."""
    rows = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 3 tab-separated fields")
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def run_batch(engine, manifest, output_dir=None, strict=None):
    """Score a manifest of (utt_id, audio, transcript) rows.

    Per-utterance failures are recorded and the batch continues unless
    `strict` is set.  Offline mode resolves the whole corpus up front.
    Returns a summary dict.
    """
    if strict is None:
        strict = engine.config.strict
    if engine.mode == "offline" and not engine._prepared:
        engine.run_offline_prepare([t for _, _, t in manifest])
    results = []
    failures = []
    for utt_id, audio, transcript in manifest:
        try:
            results.append(engine.run_utterance(utt_id, audio, transcript))
        except GopForgeError as e:
            failures.append((utt_id, f"{type(e).__name__}: {e}"))
            if strict:
                raise
    if output_dir:
        _write_outputs(results, failures, engine, output_dir)
    unique_oov = sorted(set(engine.oov_seen))
    summary = {
        "mode": engine.mode,
        "utterances": len(manifest),
        "succeeded": len(results),
        "failed": len(failures),
        "oov_encountered": len(engine.oov_seen),
        "unique_oov": len(unique_oov),
        "graph_recompilations": engine.recompilations,
        "lexicon_entries": len(engine.state.lexicon),
        "persisted_g2p_entries": engine.state.persisted_g2p,
    }
    return summary


def summary_text(summary):
    return "".join(f"{k} = {summary[k]}\n" for k in sorted(summary))


def _write_outputs(results, failures, engine, output_dir):
    os.makedirs(output_dir, exist_ok=True)
    gop_dir = os.path.join(output_dir, "gop")
    os.makedirs(gop_dir, exist_ok=True)

    def _open(name):
        return open(os.path.join(output_dir, name), "w", newline="\n")

    with _open("phone.ctm") as pf, _open("word.ctm") as wf, \
            _open("gop_vectors.txt") as vf, _open("alignments.txt") as af, \
            _open("posteriors.txt") as postf:
        for res in results:
            with open(os.path.join(gop_dir, res.utt_id + ".gop"),
                      "w", newline="\n") as f:
                f.write(res.report.serialize())
            pf.write(align_mod.ctm_text(
                align_mod.emit_ctm(res.alignment, level="phone")))
            wf.write(align_mod.ctm_text(
                align_mod.emit_ctm(res.alignment, level="word")))
            vf.write(res.report.vector_line() + "\n")
            af.write(align_mod.alignment_dump_line(res.alignment) + "\n")
            postf.write(gop_mod.posterior_map_text(res.posterior_blocks))
    with _open("failures.txt") as f:
        for utt_id, msg in failures:
            f.write(f"{utt_id}\t{msg}\n")
