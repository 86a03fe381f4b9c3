"""Joint-sequence grapheme-to-phoneme conversion.

Words and pronunciations are segmented into graphones: short pairs of a
grapheme chunk (0..Lg letters) and a phone chunk (0..Lp phones), at least
one side nonempty.  An M-gram model over graphone sequences is trained by
EM over the latent segmentations, smoothed with absolute discounting and
backoff, and decoded with a beam search over the segmentation graph.
"""

import math
from collections import defaultdict
from dataclasses import dataclass

from .errors import (
    EmptyTrainingSet,
    NoHypothesis,
    NoValidSegmentation,
    UnknownGrapheme,
)
from .lexicon import SPECIAL_WORDS

#: sentinel bracketing every graphone sequence
BOS = ("<s>", ())
EOS = ("</s>", ())


@dataclass
class G2pConfig:
    order: int = 3
    max_graphemes: int = 2  # Lg
    max_phones: int = 2     # Lp
    max_iterations: int = 25
    tolerance: float = 1e-6
    heldout_fraction: float = 0.1
    max_eps_run: int = 1    # consecutive graphones with empty grapheme part


def segmentations(word, phones, lg, lp, max_eps_run=1):
    """All graphone segmentations of (word, phones); may be empty.

    A graphone consumes 0..lg letters and 0..lp phones, not both zero; at
    most `max_eps_run` consecutive graphones may have an empty grapheme
    part (bounds insertions).
    """
    phones = tuple(phones)
    results = []

    def rec(i, j, eps_run, acc):
        if i == len(word) and j == len(phones):
            results.append(tuple(acc))
            return
        for a in range(0, lg + 1):
            if i + a > len(word):
                break
            for b in range(0, lp + 1):
                if a == 0 and b == 0:
                    continue
                if j + b > len(phones):
                    break
                if a == 0:
                    if eps_run >= max_eps_run:
                        continue
                    run = eps_run + 1
                else:
                    run = 0
                acc.append((word[i:i + a], phones[j:j + b]))
                rec(i + a, j + b, run, acc)
                acc.pop()

    rec(0, 0, 0, [])
    return results


class GraphoneModel:
    """M-gram counts over graphones with absolute discounting and backoff."""

    def __init__(self, order, lg, lp, inventory, counts, discounts):
        self.order = order
        self.lg = lg
        self.lp = lp
        #: all graphones ever seen in training (excluding sentinels)
        self.inventory = tuple(sorted(inventory))
        #: counts[m] maps history (tuple of m-1 graphones) -> {graphone: count}
        self.counts = counts
        #: one discount per order, index m-1
        self.discounts = list(discounts)
        self.graphemes = frozenset(
            ch for g, _ in self.inventory for ch in g
        )
        self._by_grapheme = defaultdict(list)
        for g in self.inventory:
            self._by_grapheme[g[0]].append(g)
        # memoization; valid while counts and discounts stay fixed
        self._prob_cache = {}
        self._mass_cache = {}

    @property
    def vocab_size(self):
        # +1 for the end-of-sequence event
        return len(self.inventory) + 1

    def candidates(self, grapheme_part):
        return self._by_grapheme.get(grapheme_part, ())

    def prob(self, history, g):
        """Absolute-discounting probability p(g | history).

        history is a tuple of graphones (most recent last); it is truncated
        to order-1.  The base case is uniform over inventory + EOS.
        """
        history = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        return self._prob(len(history) + 1, history, g)

    def _prob(self, m, history, g):
        if m == 0:
            return 1.0 / self.vocab_size
        key = (m, history, g)
        cached = self._prob_cache.get(key)
        if cached is not None:
            return cached
        table = self.counts[m].get(history)
        shorter = history[1:] if history else ()
        if not table:
            p = self._prob(m - 1, shorter, g)
        else:
            mass = self._mass_cache.get((m, history))
            if mass is None:
                total = sum(table.values())
                d = self.discounts[m - 1]
                mass = (total, sum(min(c, d) for c in table.values()) / total)
                self._mass_cache[(m, history)] = mass
            total, backoff_mass = mass
            d = self.discounts[m - 1]
            discounted = max(table.get(g, 0.0) - d, 0.0) / total
            p = discounted + backoff_mass * self._prob(m - 1, shorter, g)
        self._prob_cache[key] = p
        return p

    def logprob_sequence(self, graphones):
        """Log probability of a complete graphone sequence including EOS."""
        lp = 0.0
        history = (BOS,) * (self.order - 1)
        for g in graphones:
            lp += math.log(self.prob(history, g))
            history = (history + (g,))[-(self.order - 1):] if self.order > 1 else ()
        lp += math.log(self.prob(history, EOS))
        return lp

    def check_normalization(self):
        """Max |1 - sum_g p(g|h)| over all seen histories (diagnostic)."""
        worst = 0.0
        events = list(self.inventory) + [EOS]
        for m in range(1, self.order + 1):
            for history in self.counts[m]:
                total = sum(self.prob(history, g) for g in events)
                worst = max(worst, abs(total - 1.0))
        return worst


def _expected_counts(entries, seg_cache, order, probs_fn):
    """E-step: expected M-gram counts over each entry's segmentations.

    Enumerates segmentations explicitly (lattices are tiny at desk scale)
    and weights each by its posterior under the current model.
    Returns (counts, total log-likelihood).
    """
    counts = {m: defaultdict(lambda: defaultdict(float)) for m in range(1, order + 1)}
    total_ll = 0.0
    for key in entries:
        segs = seg_cache[key]
        logps = []
        for seg in segs:
            lp = 0.0
            history = (BOS,) * (order - 1)
            for g in seg:
                lp += math.log(probs_fn(history, g))
                history = (history + (g,))[-(order - 1):] if order > 1 else ()
            lp += math.log(probs_fn(history, EOS))
            logps.append(lp)
        m0 = max(logps)
        ws = [math.exp(lp - m0) for lp in logps]
        z = sum(ws)
        total_ll += m0 + math.log(z)
        for seg, w in zip(segs, ws):
            post = w / z
            history = (BOS,) * (order - 1)
            for g in list(seg) + [EOS]:
                for m in range(1, order + 1):
                    h = history[-(m - 1):] if m > 1 else ()
                    counts[m][h][g] += post
                if order > 1:
                    history = (history + (g,))[-(order - 1):]
    frozen = {}
    for m in counts:
        frozen[m] = {}
        for h, t in counts[m].items():
            kept = {g: c for g, c in t.items() if c > 0.0}
            if kept:
                frozen[m][h] = kept
    return frozen, total_ll


def _em(entries, seg_cache, order, max_iterations, tolerance):
    """EM over latent segmentations with ML M-gram re-estimation.

    Returns (counts, iteration log-likelihoods).  The first E-step uses a
    uniform segmentation model.
    """
    inventory = sorted({g for segs in seg_cache.values() for seg in segs for g in seg})
    vocab = len(inventory) + 1

    def uniform(history, g):
        return 1.0 / vocab

    counts, _ = _expected_counts(entries, seg_cache, order, uniform)
    lls = []
    prev = -math.inf
    for _ in range(max_iterations):
        def ml(history, g, counts=counts):
            # exact top-order conditional; events outside the current
            # support get a floor so EM stays monotone
            h = history[-(order - 1):] if order > 1 else ()
            table = counts[order].get(h)
            if table:
                c = table.get(g, 0.0)
                if c > 0.0:
                    return c / sum(table.values())
            return 1e-300

        counts, ll = _expected_counts(entries, seg_cache, order, ml)
        lls.append(ll)
        if ll - prev < tolerance and len(lls) > 1:
            break
        prev = ll
    return counts, inventory, lls


def _heldout_loglik(model, entries, seg_cache):
    total = 0.0
    for key in entries:
        logps = [model.logprob_sequence(seg) for seg in seg_cache[key]]
        m0 = max(logps)
        total += m0 + math.log(sum(math.exp(lp - m0) for lp in logps))
    return total


def _golden_section(f, lo, hi, iters=24):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def train(lexicon, config=None):
    """Train a graphone M-gram model from a lexicon.

    Special entries are excluded.  EM runs over the segmentation lattices;
    discounts are then tuned per order by golden-section search on a
    deterministic 90/10 held-out split, and final counts come from EM over
    the full data.
    """
    config = config or G2pConfig()
    pairs = [
        (e.word, e.phones)
        for e in lexicon.entries
        if e.word not in SPECIAL_WORDS
    ]
    if not pairs:
        raise EmptyTrainingSet("no usable (word, pronunciation) pairs")
    seg_cache = {}
    for word, phones in pairs:
        segs = segmentations(word, phones, config.max_graphemes,
                             config.max_phones, config.max_eps_run)
        if not segs:
            raise NoValidSegmentation(word, phones)
        seg_cache[(word, phones)] = segs

    # deterministic 90/10 split by sorted entry index
    keys = sorted(seg_cache)
    heldout_size = max(1, round(len(keys) * config.heldout_fraction))
    heldout = [k for i, k in enumerate(keys) if i % 10 == 9][:heldout_size]
    trainset = [k for k in keys if k not in set(heldout)] or keys

    counts_tr, inv_tr, _ = _em(trainset, seg_cache, config.order,
                               config.max_iterations, config.tolerance)
    # a zero discount leaves no backoff mass, so unseen events under a seen
    # history would get probability zero; start every order strictly inside
    # (0, 1) and keep the search interval away from the boundary
    discounts = [0.3] * config.order
    if heldout:
        for m in range(1, config.order + 1):
            def objective(d, m=m):
                trial = discounts.copy()
                trial[m - 1] = d
                model = GraphoneModel(config.order, config.max_graphemes,
                                      config.max_phones, inv_tr, counts_tr, trial)
                return _heldout_loglik(model, heldout, seg_cache)

            max_count = max(
                (c for t in counts_tr[m].values() for c in t.values()),
                default=1.0,
            )
            discounts[m - 1] = _golden_section(objective, 1e-4, min(1.0, max_count))

    counts, inventory, lls = _em(keys, seg_cache, config.order,
                                 config.max_iterations, config.tolerance)
    model = GraphoneModel(config.order, config.max_graphemes, config.max_phones,
                          inventory, counts, discounts)
    model.training_loglikelihoods = lls
    return model


# ---------------------------------------------------------------------------
# decoding


def decode(model, word, beam=100, nbest=1):
    """N-best pronunciations for `word`, sorted by descending log prob.

    Beam search is synchronous in the number of graphones consumed; each
    surviving hypothesis carries its exact accumulated model score, so the
    final ranking is an exact rescoring of the survivors.
    """
    word = word.upper()
    if not word:
        raise UnknownGrapheme(word, "")
    for ch in word:
        if ch not in model.graphemes:
            raise UnknownGrapheme(word, ch)
    # hypotheses: (pos, history, logprob, phones, eps_run)
    start_hist = (BOS,) * (model.order - 1)
    hyps = {(0, start_hist, (), 0): 0.0}
    complete = {}
    max_steps = len(word) + len(word) + 2  # eps insertions are bounded
    for _ in range(max_steps):
        if not hyps:
            break
        nxt = {}
        for (pos, hist, phones, eps_run), lp in hyps.items():
            if pos == len(word):
                final = lp + math.log(model.prob(hist, EOS))
                if final > complete.get(phones, -math.inf):
                    complete[phones] = final
            for a in range(0, model.lg + 1):
                chunk = word[pos:pos + a]
                if len(chunk) < a:
                    continue
                if a == 0 and eps_run >= 1:
                    continue
                for g in model.candidates(chunk):
                    nlp = lp + math.log(model.prob(hist, g))
                    nhist = ((hist + (g,))[-(model.order - 1):]
                             if model.order > 1 else ())
                    key = (pos + a, nhist, phones + g[1], 0 if a else eps_run + 1)
                    if nlp > nxt.get(key, -math.inf):
                        nxt[key] = nlp
        pruned = sorted(nxt.items(), key=lambda kv: -kv[1])[:beam]
        hyps = dict(pruned)
    if not complete:
        raise NoHypothesis(f"no pronunciation found for {word!r}; widen the beam")
    ranked = sorted(complete.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(phones, lp) for phones, lp in ranked[:nbest]]


# ---------------------------------------------------------------------------
# persistence

MODEL_MAGIC = "gop-forge-g2p v1"


def _graphone_str(g):
    graphemes, phones = g
    return f"{graphemes}:{'.'.join(phones)}"


def _graphone_parse(s):
    graphemes, _, rest = s.partition(":")
    phones = tuple(p for p in rest.split(".") if p)
    return (graphemes, phones)


def save_model(model, path):
    with open(path, "w", newline="\n") as f:
        f.write(MODEL_MAGIC + "\n")
        f.write(f"order {model.order}\n")
        f.write(f"max_graphemes {model.lg}\n")
        f.write(f"max_phones {model.lp}\n")
        f.write("discounts " + " ".join(repr(d) for d in model.discounts) + "\n")
        for m in sorted(model.counts):
            for history in sorted(model.counts[m], key=lambda h: [_graphone_str(g) for g in h]):
                hstr = " ".join(_graphone_str(g) for g in history) or "-"
                table = model.counts[m][history]
                for g in sorted(table, key=_graphone_str):
                    f.write(f"{m}\t{hstr}\t{_graphone_str(g)}\t{table[g]!r}\n")


def load_model(path):
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a {MODEL_MAGIC!r} file")
    order = int(lines[1].split()[1])
    lg = int(lines[2].split()[1])
    lp = int(lines[3].split()[1])
    discounts = [float(v) for v in lines[4].split()[1:]]
    counts = {m: {} for m in range(1, order + 1)}
    inventory = set()
    for line in lines[5:]:
        if not line.strip():
            continue
        m, hstr, gstr, c = line.split("\t")
        history = tuple(
            _graphone_parse(s) for s in (hstr.split(" ") if hstr != "-" else ())
        )
        g = _graphone_parse(gstr)
        counts[int(m)].setdefault(history, {})[g] = float(c)
        if g != EOS:
            inventory.add(g)
    return GraphoneModel(order, lg, lp, inventory, counts, discounts)
