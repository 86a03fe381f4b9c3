"""Weighted finite-state transducers over the tropical semiring.

Provides the generic operations (composition, determinization,
minimization, beam search) and the graph builders for alignment:
L (phones -> words), C (context labels -> phones, identity under the
monophone simplification) and H (HMM states -> phones), combined as
min(det(H o min(det(C o L)))).

Weights are costs: plus is min, times is +, zero is +inf, one is 0.0.
Label id 0 is reserved for epsilon in every symbol table.
"""

import heapq
import math
from collections import defaultdict, namedtuple

from .errors import (
    AlphabetMismatch,
    BeamCollapse,
    EmptyLexicon,
    NonFunctional,
    NotDeterministic,
)
from .lexicon import SIL_PHONE

EPS = 0
EPS_SYM = "<eps>"

ZERO = math.inf  # tropical zero (never reached)
ONE = 0.0

Arc = namedtuple("Arc", ["ilabel", "olabel", "weight", "nextstate"])


class SymbolTable:
    """Bidirectional label <-> integer-id table; id 0 is <eps>."""

    def __init__(self, symbols=()):
        self._id = {EPS_SYM: EPS}
        self._sym = [EPS_SYM]
        for s in symbols:
            self.add(s)

    def add(self, sym):
        if sym not in self._id:
            self._id[sym] = len(self._sym)
            self._sym.append(sym)
        return self._id[sym]

    def index(self, sym):
        return self._id[sym]

    def get(self, sym, default=None):
        return self._id.get(sym, default)

    def symbol(self, idx):
        return self._sym[idx]

    def __contains__(self, sym):
        return sym in self._id

    def __len__(self):
        return len(self._sym)

    def __iter__(self):
        return iter(self._sym)

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self._sym == other._sym

    def save(self, path):
        with open(path, "w", newline="\n") as f:
            for i, s in enumerate(self._sym):
                f.write(f"{s}\t{i}\n")

    @classmethod
    def load(cls, path):
        table = cls()
        with open(path) as f:
            for line in f:
                if not line.strip():
                    continue
                sym, idx = line.rstrip("\n").split("\t")
                assigned = table.add(sym)
                if assigned != int(idx):
                    raise ValueError(f"non-contiguous symbol table at {sym!r}")
        return table


class Wfst:
    def __init__(self, isyms=None, osyms=None):
        self.isyms = isyms if isyms is not None else SymbolTable()
        self.osyms = osyms if osyms is not None else SymbolTable()
        self.arcs = []  # per-state list of Arc
        self.finals = {}  # state -> final weight
        self.start = None

    # -- construction --

    def add_state(self):
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_arc(self, state, ilabel, olabel, weight, nextstate):
        if math.isnan(weight):
            raise ValueError("NaN arc weight")
        self.arcs[state].append(Arc(ilabel, olabel, weight, nextstate))

    def set_final(self, state, weight=ONE):
        self.finals[state] = weight

    @property
    def num_states(self):
        return len(self.arcs)

    @property
    def num_arcs(self):
        return sum(len(a) for a in self.arcs)

    def is_deterministic(self):
        for arcs in self.arcs:
            seen = set()
            for a in arcs:
                if a.ilabel in seen:
                    return False
                seen.add(a.ilabel)
        return True

    def trim(self):
        """Remove states not on a start-to-final path; renumbers states."""
        if self.start is None or not self.finals:
            return _empty_like(self)
        reach = {self.start}
        stack = [self.start]
        while stack:
            for a in self.arcs[stack.pop()]:
                if a.nextstate not in reach:
                    reach.add(a.nextstate)
                    stack.append(a.nextstate)
        rev = defaultdict(list)
        for s in reach:
            for a in self.arcs[s]:
                if a.nextstate in reach:
                    rev[a.nextstate].append(s)
        coreach = {s for s in self.finals if s in reach}
        stack = list(coreach)
        while stack:
            for p in rev[stack.pop()]:
                if p not in coreach:
                    coreach.add(p)
                    stack.append(p)
        keep = reach & coreach
        if self.start not in keep:
            return _empty_like(self)
        remap = {}
        out = Wfst(self.isyms, self.osyms)
        order = [self.start] + sorted(keep - {self.start})
        for s in order:
            remap[s] = out.add_state()
        out.start = remap[self.start]
        for s in order:
            for a in self.arcs[s]:
                if a.nextstate in keep:
                    out.add_arc(remap[s], a.ilabel, a.olabel, a.weight, remap[a.nextstate])
        for s, w in self.finals.items():
            if s in keep:
                out.set_final(remap[s], w)
        return out

    def relabel_input(self, mapping):
        """Return a copy with input labels rewritten through `mapping` (id -> id)."""
        out = Wfst(self.isyms, self.osyms)
        for _ in range(self.num_states):
            out.add_state()
        out.start = self.start
        for s, arcs in enumerate(self.arcs):
            for a in arcs:
                out.add_arc(s, mapping.get(a.ilabel, a.ilabel), a.olabel, a.weight, a.nextstate)
        out.finals = dict(self.finals)
        return out

    def relabel_output(self, mapping):
        out = Wfst(self.isyms, self.osyms)
        for _ in range(self.num_states):
            out.add_state()
        out.start = self.start
        for s, arcs in enumerate(self.arcs):
            for a in arcs:
                out.add_arc(s, a.ilabel, mapping.get(a.olabel, a.olabel), a.weight, a.nextstate)
        out.finals = dict(self.finals)
        return out

    # -- text format --

    def serialize(self):
        """`src dst ilabel olabel weight` arc lines plus `state weight` final lines."""
        lines = [f"start\t{self.start}"]
        for s, arcs in enumerate(self.arcs):
            for a in arcs:
                lines.append(f"{s}\t{a.nextstate}\t{a.ilabel}\t{a.olabel}\t{a.weight!r}")
        for s in sorted(self.finals):
            lines.append(f"{s}\t{self.finals[s]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text, isyms=None, osyms=None):
        fst = cls(isyms, osyms)

        def ensure(n):
            while fst.num_states <= n:
                fst.add_state()

        pending = []
        for line in text.splitlines():
            if not line.strip():
                continue
            fields = line.split("\t")
            if fields[0] == "start":
                fst.start = int(fields[1])
                ensure(fst.start)
            elif len(fields) == 5:
                src, dst, il, ol, w = fields
                ensure(max(int(src), int(dst)))
                pending.append((int(src), int(il), int(ol), float(w), int(dst)))
            elif len(fields) == 2:
                ensure(int(fields[0]))
                fst.set_final(int(fields[0]), float(fields[1]))
            else:
                raise ValueError(f"bad fst line: {line!r}")
        for src, il, ol, w, dst in pending:
            fst.add_arc(src, il, ol, w, dst)
        return fst


def _empty_like(t):
    out = Wfst(t.isyms, t.osyms)
    out.start = out.add_state()
    return out


# ---------------------------------------------------------------------------
# composition


def compose(a, b):
    """Compose two transducers; a's output alphabet must equal b's input alphabet.

    Epsilon transitions are handled with the standard three-way filter so
    every matched path is generated (duplicates are harmless in a min-plus
    semiring).
    """
    if a.osyms != b.isyms:
        raise AlphabetMismatch("output alphabet of a != input alphabet of b")
    out = Wfst(a.isyms, b.osyms)
    if a.start is None or b.start is None:
        return _empty_like(out)

    b_by_ilabel = []
    for arcs in b.arcs:
        d = defaultdict(list)
        for arc in arcs:
            d[arc.ilabel].append(arc)
        b_by_ilabel.append(d)

    state_id = {}
    queue = []

    def get_state(key):
        if key not in state_id:
            state_id[key] = out.add_state()
            queue.append(key)
        return state_id[key]

    start_key = (a.start, b.start, 0)
    out.start = get_state(start_key)
    while queue:
        key = queue.pop()
        qa, qb, f = key
        s = state_id[key]
        wa = a.finals.get(qa)
        wb = b.finals.get(qb)
        if wa is not None and wb is not None:
            prev = out.finals.get(s, ZERO)
            out.finals[s] = min(prev, wa + wb)
        for arc_a in a.arcs[qa]:
            if arc_a.olabel == EPS:
                # a moves alone; blocked after a b-alone move
                if f != 2:
                    ns = get_state((arc_a.nextstate, qb, 1))
                    out.add_arc(s, arc_a.ilabel, EPS, arc_a.weight, ns)
            else:
                for arc_b in b_by_ilabel[qb].get(arc_a.olabel, ()):
                    ns = get_state((arc_a.nextstate, arc_b.nextstate, 0))
                    out.add_arc(s, arc_a.ilabel, arc_b.olabel,
                                arc_a.weight + arc_b.weight, ns)
        if f != 1:
            for arc_b in b_by_ilabel[qb].get(EPS, ()):
                ns = get_state((qa, arc_b.nextstate, 2))
                out.add_arc(s, EPS, arc_b.olabel, arc_b.weight, ns)
    return out.trim()


# ---------------------------------------------------------------------------
# determinization


def determinize(t, state_cap=100_000):
    """Weighted subset construction with output-string residuals.

    Epsilon is treated as an ordinary label (the Kaldi convention), so the
    result has at most one arc per (state, input label) including epsilon.
    Output residuals that survive to a final subset are flushed through a
    chain of epsilon-input tail arcs.  Exceeding `state_cap` subsets raises
    NonFunctional, which in practice means missing disambiguation symbols.
    """
    t = t.trim()
    out = Wfst(t.isyms, t.osyms)
    if not t.finals:
        return _empty_like(out)

    def canon(elems):
        # normalize: merge duplicates, shift weights so the best is 0
        best = {}
        for q, w, r in elems:
            key = (q, r)
            if key not in best or w < best[key]:
                best[key] = w
        base = min(best.values())
        return tuple(sorted((q, round(w - base, 12), r) for (q, r), w in best.items())), base

    state_id = {}
    queue = []

    def get_state(subset):
        if subset not in state_id:
            if len(state_id) >= state_cap:
                raise NonFunctional(
                    f"determinization exceeded {state_cap} states; "
                    "input is likely not functional (missing disambiguation symbols?)"
                )
            state_id[subset] = out.add_state()
            queue.append(subset)
        return state_id[subset]

    start_subset, _ = canon([(t.start, 0.0, ())])
    out.start = get_state(start_subset)

    while queue:
        subset = queue.pop()
        s = state_id[subset]
        # finality: flush residual outputs through tail chains
        final_groups = defaultdict(lambda: ZERO)
        for q, w, r in subset:
            if q in t.finals:
                final_groups[r] = min(final_groups[r], w + t.finals[q])
        for r, w in sorted(final_groups.items()):
            if not r:
                out.set_final(s, min(out.finals.get(s, ZERO), w))
            else:
                cur = s
                for k, sym in enumerate(r):
                    nxt = out.add_state()
                    out.add_arc(cur, EPS, sym, w if k == 0 else 0.0, nxt)
                    cur = nxt
                out.set_final(cur, 0.0)
        # transitions
        by_label = defaultdict(list)
        for q, w, r in subset:
            for a in t.arcs[q]:
                nr = r if a.olabel == EPS else r + (a.olabel,)
                by_label[a.ilabel].append((a.nextstate, w + a.weight, nr))
        for ilabel in sorted(by_label):
            elems = by_label[ilabel]
            # emit the longest common output prefix, one symbol per arc
            common = elems[0][2]
            for _, _, r in elems[1:]:
                n = 0
                for x, y in zip(common, r):
                    if x != y:
                        break
                    n += 1
                common = common[:n]
            olabel = common[0] if common else EPS
            ncut = 1 if common else 0
            shifted = [(q, w, r[ncut:]) for q, w, r in elems]
            nsubset, base = canon(shifted)
            ns = get_state(nsubset)
            out.add_arc(s, ilabel, olabel, base, ns)
    return out


# ---------------------------------------------------------------------------
# minimization


def _distance_to_final(t):
    """Tropical shortest distance from each state to a final state."""
    rev = defaultdict(list)
    for s, arcs in enumerate(t.arcs):
        for a in arcs:
            rev[a.nextstate].append((s, a.weight))
    dist = dict(t.finals)
    heap = [(w, s) for s, w in dist.items()]
    heapq.heapify(heap)
    done = set()
    while heap:
        w, s = heapq.heappop(heap)
        if s in done:
            continue
        done.add(s)
        for p, aw in rev[s]:
            nw = w + aw
            if nw < dist.get(p, ZERO):
                dist[p] = nw
                heapq.heappush(heap, (nw, p))
    return dist


def push_weights(t):
    """Push weights toward the initial state (canonical residual weights).

    The shortest-distance constant of the whole machine has to be re-added
    at the start; when the start state sits on a cycle it gets duplicated
    so the constant is charged exactly once per path.
    """
    t = t.trim()
    if not t.finals:
        return t
    dist = _distance_to_final(t)
    out = Wfst(t.isyms, t.osyms)
    for _ in range(t.num_states):
        out.add_state()
    d0 = dist[t.start]
    for s, arcs in enumerate(t.arcs):
        for a in arcs:
            out.add_arc(s, a.ilabel, a.olabel,
                        a.weight + dist[a.nextstate] - dist[s], a.nextstate)
    for s, w in t.finals.items():
        out.set_final(s, w - dist[s])
    reentrant = any(a.nextstate == t.start
                    for arcs in t.arcs for a in arcs)
    if d0 == 0.0:
        out.start = t.start
    elif not reentrant:
        out.start = t.start
        out.arcs[t.start] = [Arc(a.ilabel, a.olabel, a.weight + d0, a.nextstate)
                             for a in out.arcs[t.start]]
        if t.start in out.finals:
            out.finals[t.start] += d0
    else:
        start = out.add_state()
        out.start = start
        for a in out.arcs[t.start]:
            out.add_arc(start, a.ilabel, a.olabel, a.weight + d0, a.nextstate)
        if t.start in out.finals:
            out.set_final(start, out.finals[t.start] + d0)
    return out.trim()


def minimize(t):
    """Merge behaviorally equivalent states of a deterministic machine.

    Signatures compare residual weights (arc weight plus the change in
    shortest distance to a final state), so states whose futures agree up
    to a constant land in the same class.  The output keeps one
    representative per class; redirected arcs absorb the residual offset
    between the old target and its representative, which preserves every
    path weight exactly.
    """
    if not t.is_deterministic():
        raise NotDeterministic("minimize requires a deterministic input")
    t = t.trim()
    if not t.finals:
        return _empty_like(t)
    dist = _distance_to_final(t)
    n = t.num_states

    def wkey(w):
        return round(w, 9)

    cls = [0] * n
    initial = {}
    for s in range(n):
        key = (s in t.finals, wkey(t.finals.get(s, 0.0) - dist[s]))
        cls[s] = initial.setdefault(key, len(initial))
    while True:
        sig_map = {}
        new_cls = [0] * n
        for s in range(n):
            sig = (cls[s], tuple(sorted(
                (a.ilabel, a.olabel,
                 wkey(a.weight + dist[a.nextstate] - dist[s]),
                 cls[a.nextstate])
                for a in t.arcs[s])))
            new_cls[s] = sig_map.setdefault(sig, len(sig_map))
        if len(sig_map) == len(set(cls)):
            cls = new_cls
            break
        cls = new_cls

    rep_state = {cls[t.start]: t.start}
    for s in range(n):
        rep_state.setdefault(cls[s], s)

    out = Wfst(t.isyms, t.osyms)
    rep = {}
    order = [cls[t.start]] + [c for c in range(len(set(cls))) if c != cls[t.start]]
    for c in order:
        rep[c] = out.add_state()
    out.start = rep[cls[t.start]]
    for c, s in rep_state.items():
        for a in t.arcs[s]:
            r = rep_state[cls[a.nextstate]]
            out.add_arc(rep[c], a.ilabel, a.olabel,
                        a.weight + dist[a.nextstate] - dist[r],
                        rep[cls[a.nextstate]])
        if s in t.finals:
            out.set_final(rep[c], t.finals[s])
    return out.trim()


# ---------------------------------------------------------------------------
# graph builders


def disambig_for(lexicon):
    """Assign a disambiguation symbol index to each entry that needs one.

    An entry needs one when its pronunciation is shared with another entry
    or is a proper prefix of another entry's pronunciation.  Returns
    (mapping entry-index -> k or None, max k used).
    """
    prons = [e.phones for e in lexicon.entries]
    counts = defaultdict(int)
    for p in prons:
        counts[p] += 1
    prefixes = set()
    for p in prons:
        for i in range(1, len(p)):
            prefixes.add(p[:i])
    assignment = {}
    next_k = defaultdict(int)
    max_k = 0
    for i, p in enumerate(prons):
        if counts[p] > 1 or p in prefixes:
            next_k[p] += 1
            assignment[i] = next_k[p]
            max_k = max(max_k, next_k[p])
        else:
            assignment[i] = None
    return assignment, max_k


def num_disambig(lexicon):
    """Highest #k used by build_L: entry symbols plus the silence loop's."""
    _, max_k = disambig_for(lexicon)
    return max_k + 1


def phone_symbols(inventory, ndisambig=0):
    """Input symbol table for L: phones, then #0..#ndisambig."""
    syms = SymbolTable(inventory.ordered())
    for k in range(ndisambig + 1):
        syms.add(f"#{k}")
    return syms


def word_symbols(lexicon, with_disambig=False):
    syms = SymbolTable(sorted(lexicon.words()))
    if with_disambig:
        syms.add("#0")
    return syms


def build_L(lexicon, inventory, with_disambig=False, sil_prob=0.5):
    """Lexicon transducer: phone sequences in, words out.

    One path per (word, pronunciation), the word emitted on the first phone
    arc.  An optional-silence loop (SIL in, epsilon out, cost
    -log(sil_prob)) sits at the loop state so silences may separate words.
    With `with_disambig`, homophone/prefix entries get #k appended, the
    optional-silence loop gets its own #k (it shares the SIL phone with the
    silence word entry, which would otherwise make L non-functional), and
    the #0:#0 self-loop is added for later grammar composition.
    """
    if not lexicon.entries:
        raise EmptyLexicon("cannot build L from an empty lexicon")
    assignment, max_k = disambig_for(lexicon)
    ndisambig = num_disambig(lexicon) if with_disambig else 0
    isyms = phone_symbols(inventory, ndisambig)
    osyms = word_symbols(lexicon, with_disambig)

    fst = Wfst(isyms, osyms)
    loop = fst.add_state()
    fst.start = loop
    fst.set_final(loop, ONE)
    if SIL_PHONE in isyms:
        sil_cost = -math.log(sil_prob)
        if with_disambig:
            aux = fst.add_state()
            fst.add_arc(loop, isyms.index(SIL_PHONE), EPS, sil_cost, aux)
            fst.add_arc(aux, isyms.index(f"#{max_k + 1}"), EPS, ONE, loop)
        else:
            fst.add_arc(loop, isyms.index(SIL_PHONE), EPS, sil_cost, loop)
    if with_disambig:
        fst.add_arc(loop, isyms.index("#0"), osyms.index("#0"), ONE, loop)
    for i, entry in enumerate(lexicon.entries):
        labels = [isyms.index(p) for p in entry.phones]
        if with_disambig and assignment[i] is not None:
            labels.append(isyms.index(f"#{assignment[i]}"))
        prev = loop
        for j, il in enumerate(labels):
            dest = loop if j == len(labels) - 1 else fst.add_state()
            ol = osyms.index(entry.word) if j == 0 else EPS
            fst.add_arc(prev, il, ol, ONE, dest)
            prev = dest
    return fst


def build_C(inventory, ndisambig=0):
    """Context transducer; identity over the phone alphabet for monophones."""
    syms = phone_symbols(inventory, ndisambig)
    fst = Wfst(syms, syms)
    s = fst.add_state()
    fst.start = s
    fst.set_final(s, ONE)
    for sym in syms:
        if sym != EPS_SYM:
            fst.add_arc(s, syms.index(sym), syms.index(sym), ONE, s)
    return fst


def senone_symbols(am, ndisambig=0):
    syms = SymbolTable(f"s{i}" for i in range(am.senone_count))
    for k in range(ndisambig + 1):
        syms.add(f"#{k}")
    return syms


def build_H(am, inventory, ndisambig=0):
    """HMM transducer: senone labels in, phones out.

    Each phone gets a left-to-right chain; the phone label is emitted on the
    arc entering its first state, and every frame spent in a state consumes
    that state's senone label once (entry arc or self-loop).  Disambiguation
    symbols pass through via self-loops at the start state.
    """
    isyms = senone_symbols(am, ndisambig)
    osyms = phone_symbols(inventory, ndisambig)
    fst = Wfst(isyms, osyms)
    start = fst.add_state()
    fst.start = start
    fst.set_final(start, ONE)
    for k in range(ndisambig + 1):
        fst.add_arc(start, isyms.index(f"#{k}"), osyms.index(f"#{k}"), ONE, start)
    for p, phone in enumerate(am.phones):
        prev = start
        for j in range(am.states_per_phone):
            senone = am.senone_index(p, j)
            il = isyms.index(f"s{senone}")
            cur = fst.add_state()
            ol = osyms.index(phone) if j == 0 else EPS
            enter_w = ONE if j == 0 else -am.transition_logprob_raw(senone - 1, senone)
            fst.add_arc(prev, il, ol, enter_w, cur)
            fst.add_arc(cur, il, EPS, -am.transition_logprob_raw(senone, senone), cur)
            prev = cur
        last = am.senone_index(p, am.states_per_phone - 1)
        exit_w = -am.exit_logprob(last)
        fst.add_arc(prev, EPS, EPS, exit_w, start)
    return fst


def strip_disambig(t):
    """Replace disambiguation labels (#k) by epsilon on both tapes."""
    imap = {t.isyms.index(s): EPS for s in t.isyms if s.startswith("#")}
    omap = {t.osyms.index(s): EPS for s in t.osyms if s.startswith("#")}
    return t.relabel_input(imap).relabel_output(omap)


def compile_hcl(h, c, l):
    """HCL = min(det(H o min(det(C o L)))), disambiguation symbols stripped."""
    cl = minimize(determinize(compose(c, l)))
    hcl = minimize(determinize(compose(h, cl)))
    return strip_disambig(hcl).trim()


# ---------------------------------------------------------------------------
# beam search

BestPath = namedtuple("BestPath", ["cost", "arcs", "frame_senones", "olabels"])


class _Node(namedtuple("_Node", ["state", "arc", "parent"])):
    __slots__ = ()


def _senone_of(isyms, ilabel):
    sym = isyms.symbol(ilabel)
    if not sym.startswith("s"):
        raise ValueError(f"emitting arc with non-senone label {sym!r}")
    return int(sym[1:])


def shortest_path_beam(graph, frame_scores, beam):
    """Time-synchronous Viterbi beam search over a senone-labelled graph.

    `frame_scores` is a T x N cost matrix (senone index = integer after the
    "s" in the input label).  At each frame at most `beam` states survive.
    With beam >= number of states the result is exact Viterbi.  Raises
    BeamCollapse when no hypothesis survives a frame.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    T = len(frame_scores)
    isyms = graph.isyms

    def eps_closure(tokens):
        # Dijkstra over epsilon arcs starting from current tokens
        heap = [(cost, s) for s, (cost, _) in tokens.items()]
        heapq.heapify(heap)
        while heap:
            cost, s = heapq.heappop(heap)
            if cost > tokens[s][0]:
                continue
            node = tokens[s][1]
            for a in graph.arcs[s]:
                if a.ilabel == EPS:
                    nc = cost + a.weight
                    if nc < tokens.get(a.nextstate, (ZERO, None))[0]:
                        tokens[a.nextstate] = (nc, _Node(a.nextstate, a, node))
                        heapq.heappush(heap, (nc, a.nextstate))
        return tokens

    tokens = {graph.start: (0.0, _Node(graph.start, None, None))}
    tokens = eps_closure(tokens)
    for t in range(T):
        if len(tokens) > beam:
            kept = sorted(tokens.items(), key=lambda kv: kv[1][0])[:beam]
            tokens = dict(kept)
        nxt = {}
        for s, (cost, node) in tokens.items():
            for a in graph.arcs[s]:
                if a.ilabel == EPS:
                    continue
                senone = _senone_of(isyms, a.ilabel)
                nc = cost + a.weight + frame_scores[t][senone]
                if nc < nxt.get(a.nextstate, (ZERO, None))[0]:
                    nxt[a.nextstate] = (nc, _Node(a.nextstate, a, node))
        if not nxt:
            raise BeamCollapse(t)
        tokens = eps_closure(nxt)
    best_cost = ZERO
    best_node = None
    for s, (cost, node) in tokens.items():
        if s in graph.finals:
            total = cost + graph.finals[s]
            if total < best_cost:
                best_cost = total
                best_node = node
    if best_node is None:
        raise BeamCollapse(T)
    arcs = []
    node = best_node
    while node is not None and node.arc is not None:
        arcs.append(node.arc)
        node = node.parent
    arcs.reverse()
    frame_senones = [_senone_of(isyms, a.ilabel) for a in arcs if a.ilabel != EPS]
    olabels = [a.olabel for a in arcs if a.olabel != EPS]
    return BestPath(best_cost, arcs, frame_senones, olabels)
