"""Brute-force oracles for the graph machinery, shared by tests and selftest.

Everything here is deliberately naive: path enumeration, exhaustive state
sequences.  The point is independence from the algorithms being checked.
"""

import math
import random

from . import wfst


def random_machine(rng, max_states=6, num_labels=3, arc_density=0.3,
                   acceptor=True, max_weight=5.0):
    """Random trim-able epsilon-free machine with nonnegative weights."""
    n = rng.randint(2, max_states)
    isyms = wfst.SymbolTable(f"a{i}" for i in range(num_labels))
    osyms = isyms if acceptor else wfst.SymbolTable(f"b{i}" for i in range(num_labels))
    fst = wfst.Wfst(isyms, osyms)
    for _ in range(n):
        fst.add_state()
    fst.start = 0
    for s in range(n):
        for il in range(1, num_labels + 1):
            for _ in range(2):
                if rng.random() < arc_density:
                    ol = il if acceptor else rng.randint(1, num_labels)
                    fst.add_arc(s, il, ol, round(rng.uniform(0, max_weight), 3),
                                rng.randint(0, n - 1))
    for s in range(n):
        if rng.random() < 0.4 or s == n - 1:
            fst.set_final(s, round(rng.uniform(0, max_weight), 3))
    return fst.trim()


def random_deterministic_machine(rng, **kwargs):
    m = random_machine(rng, **kwargs)
    out = wfst.Wfst(m.isyms, m.osyms)
    for _ in range(m.num_states):
        out.add_state()
    out.start = m.start
    for s, arcs in enumerate(m.arcs):
        seen = set()
        for a in arcs:
            if a.ilabel not in seen:
                seen.add(a.ilabel)
                out.add_arc(s, *a)
    out.finals = dict(m.finals)
    return out.trim()


def enumerate_relation(fst, max_symbols=6, max_arcs=20, tol_merge=True):
    """Map (input string, output string) -> min path weight, by DFS.

    Bounded by `max_symbols` non-epsilon input labels per path and
    `max_arcs` total arcs (guards epsilon tails from determinization).
    Only complete (final-state) paths count.
    """
    relation = {}
    if fst.start is None:
        return relation

    def dfs(state, istr, ostr, weight, arcs_used):
        if state in fst.finals:
            key = (istr, ostr)
            total = weight + fst.finals[state]
            if total < relation.get(key, math.inf):
                relation[key] = total
        if arcs_used == max_arcs:
            return
        for a in fst.arcs[state]:
            ni = istr + (a.ilabel,) if a.ilabel != wfst.EPS else istr
            if len(ni) > max_symbols:
                continue
            no = ostr + (a.olabel,) if a.olabel != wfst.EPS else ostr
            if len(no) > max_symbols + 4:
                continue
            dfs(a.nextstate, ni, no, weight + a.weight, arcs_used + 1)

    dfs(fst.start, (), (), 0.0, 0)
    return relation


def relations_equal(a, b, tol=1e-9):
    if set(a) != set(b):
        return False
    return all(abs(a[k] - b[k]) <= tol for k in a)


def compose_oracle(a, b, max_symbols=6, max_arcs=12):
    """Join the enumerated path sets of two machines on the shared tape."""
    ra = enumerate_relation(a, max_symbols, max_arcs)
    rb = enumerate_relation(b, max_symbols, max_arcs)
    out = {}
    for (x, y), wa in ra.items():
        for (y2, z), wb in rb.items():
            if y == y2:
                key = (x, z)
                w = wa + wb
                if w < out.get(key, math.inf):
                    out[key] = w
    return out


def brute_force_best_path(graph, frame_scores):
    """Exhaustive best complete path consuming one senone label per frame.

    Returns (cost, senone sequence) or (inf, None).  Only usable on tiny
    graphs; epsilon arcs are followed with a small depth bound.
    """
    T = len(frame_scores)
    best = [math.inf, None]

    def emit_cost(ilabel, t):
        sym = graph.isyms.symbol(ilabel)
        return frame_scores[t][int(sym[1:])]

    def dfs(state, t, cost, senones, eps_run):
        if cost >= best[0]:
            return
        if t == T and state in graph.finals:
            total = cost + graph.finals[state]
            if total < best[0]:
                best[0] = total
                best[1] = tuple(senones)
        for a in graph.arcs[state]:
            if a.ilabel == wfst.EPS:
                if eps_run < graph.num_states:
                    dfs(a.nextstate, t, cost + a.weight, senones, eps_run + 1)
            elif t < T:
                sym = graph.isyms.symbol(a.ilabel)
                senones.append(int(sym[1:]))
                dfs(a.nextstate, t + 1,
                    cost + a.weight + frame_scores[t][int(sym[1:])],
                    senones, 0)
                senones.pop()

    dfs(graph.start, 0, 0.0, [], 0)
    return best[0], best[1]


def g2p_exhaustive_best(model, word, max_eps_run=1):
    """1-best pronunciation by exact search over every segmentation.

    The best completion from a point depends only on (position, history,
    eps run), so those states are memoized; within a state every graphone
    continuation is scored with model.prob.  Ties break like decode: the
    lexicographically smallest pronunciation wins.
    """
    from functools import lru_cache

    from .g2p import BOS, EOS

    @lru_cache(maxsize=None)
    def best_from(pos, hist, eps_run):
        """(-logprob, phones) of the best completion, or None."""
        results = []
        if pos == len(word):
            results.append((-math.log(model.prob(hist, EOS)), ()))
        for a in range(0, model.lg + 1):
            chunk = word[pos:pos + a]
            if len(chunk) < a:
                continue
            if a == 0 and eps_run >= max_eps_run:
                continue
            for g in model.candidates(chunk):
                nh = (hist + (g,))[-(model.order - 1):] if model.order > 1 else ()
                sub = best_from(pos + a, nh, 0 if a else eps_run + 1)
                if sub is None:
                    continue
                cost = -math.log(model.prob(hist, g)) + sub[0]
                results.append((cost, g[1] + sub[1]))
        return min(results) if results else None

    best = best_from(0, (BOS,) * (model.order - 1), 0)
    if best is None:
        return None
    return best[1], -best[0]


# ---------------------------------------------------------------------------
# selftest


def run_selftest(seed=0, trials=8, log=print):
    """Quick oracle suite; returns True when every check passes."""
    rng = random.Random(seed)
    results = []

    def check(name, ok, detail=""):
        results.append(ok)
        log(f"{'PASS' if ok else 'FAIL'}  {name}{('  ' + detail) if detail else ''}")

    ok = True
    for _ in range(trials):
        a = random_machine(rng, acceptor=False)
        b = random_machine(rng, acceptor=False)
        b = wfst.Wfst.parse(b.serialize(), a.osyms, a.osyms)  # align alphabets
        got = enumerate_relation(wfst.compose(a, b), 6, 12)
        want = compose_oracle(a, b)
        ok = ok and relations_equal(got, want)
    check("compose matches path-join oracle", ok)

    ok = True
    for _ in range(trials):
        m = random_machine(rng, acceptor=True)
        try:
            d = wfst.determinize(m, state_cap=5000)
        except wfst.NonFunctional:
            continue
        ok = ok and d.is_deterministic()
        ok = ok and relations_equal(enumerate_relation(m), enumerate_relation(d))
    check("determinize preserves the weighted relation", ok)

    ok = True
    for _ in range(trials):
        m = random_deterministic_machine(rng)
        mm = wfst.minimize(m)
        ok = ok and mm.num_states <= max(m.trim().num_states, 1)
        ok = ok and relations_equal(enumerate_relation(m), enumerate_relation(mm))
    check("minimize preserves the weighted relation", ok)

    ok = True
    for _ in range(trials):
        graph, scores = _random_senone_graph(rng)
        want_cost, want_path = brute_force_best_path(graph, scores)
        if want_path is None:
            continue
        got = wfst.shortest_path_beam(graph, scores, beam=graph.num_states + 1)
        ok = ok and abs(got.cost - want_cost) < 1e-9
    check("full-beam search equals exhaustive best path", ok)

    from .acoustic import AcousticModel, Gmm
    import numpy as np

    am = AcousticModel(
        phones=("A",),
        gmms=[Gmm(np.array([1.0]), np.zeros((1, 2)), np.ones((1, 2)))],
        self_loops=np.array([0.5]),
        states_per_phone=1,
        dim=2,
    )
    from .gop import score_phone

    post = np.array([[0.5], [0.5]])
    got = score_phone((0, 2), [0, 0], post, am)
    check("GoP hand fixture 1.0397", abs(got - 1.0397) < 1e-4, f"got {got:.4f}")

    from .g2p import G2pConfig, train
    from .lexicon import parse_lexicon

    lex = parse_lexicon("AB AH B\nBA B AH\nB B\nA AH\nABBA AH B AH\n")
    model = train(lex, G2pConfig(order=2, max_iterations=5))
    worst = model.check_normalization()
    check("G2P smoothed distributions sum to one", worst < 1e-9, f"worst {worst:.2e}")

    return all(results)


def _random_senone_graph(rng, num_senones=3, num_states=3, T=4):
    isyms = wfst.SymbolTable(f"s{i}" for i in range(num_senones))
    g = wfst.Wfst(isyms, isyms)
    for _ in range(num_states):
        g.add_state()
    g.start = 0
    for s in range(num_states):
        for _ in range(3):
            g.add_arc(s, rng.randint(1, num_senones), wfst.EPS,
                      round(rng.uniform(0, 2), 3), rng.randint(0, num_states - 1))
    g.set_final(rng.randint(0, num_states - 1), 0.0)
    scores = [[round(rng.uniform(0, 3), 3) for _ in range(num_senones)]
              for _ in range(T)]
    return g, scores
