import math
import random

import numpy as np
import pytest

from conftest import sample_frames, toy_model
from gop_forge import lexicon, wfst
from gop_forge.errors import NonFunctional, NotDeterministic
from gop_forge.verify import (
    brute_force_best_path,
    compose_oracle,
    enumerate_relation,
    random_deterministic_machine,
    random_machine,
    relations_equal,
    _random_senone_graph,
)


def linear_acceptor(labels, syms, weight=1.0):
    fst = wfst.Wfst(syms, syms)
    prev = fst.add_state()
    fst.start = prev
    for lab in labels:
        cur = fst.add_state()
        fst.add_arc(prev, syms.index(lab), syms.index(lab), weight, cur)
        prev = cur
    fst.set_final(prev, 0.0)
    return fst


def test_symbol_table_round_trip(tmp_path):
    syms = wfst.SymbolTable(["a", "b", "c"])
    assert syms.index("a") == 1 and syms.symbol(0) == "<eps>"
    path = tmp_path / "syms.txt"
    syms.save(path)
    assert wfst.SymbolTable.load(path) == syms


def test_serialize_parse_round_trip():
    rng = random.Random(7)
    for _ in range(10):
        m = random_machine(rng, acceptor=False)
        again = wfst.Wfst.parse(m.serialize(), m.isyms, m.osyms)
        assert again.serialize() == m.serialize()


def test_trim_drops_useless_states():
    syms = wfst.SymbolTable(["a"])
    fst = wfst.Wfst(syms, syms)
    s0, s1, s2 = fst.add_state(), fst.add_state(), fst.add_state()
    fst.start = s0
    fst.add_arc(s0, 1, 1, 0.0, s1)
    fst.add_arc(s0, 1, 1, 0.0, s2)  # s2 is a dead end
    fst.set_final(s1, 0.0)
    trimmed = fst.trim()
    assert trimmed.num_states == 2
    assert trimmed.num_arcs == 1


def test_compose_matches_path_join_oracle():
    rng = random.Random(11)
    for _ in range(25):
        a = random_machine(rng, acceptor=False)
        b = random_machine(rng, acceptor=False)
        b = wfst.Wfst.parse(b.serialize(), a.osyms, a.osyms)
        got = enumerate_relation(wfst.compose(a, b), 6, 12)
        assert relations_equal(got, compose_oracle(a, b))


def test_compose_rejects_alphabet_mismatch():
    a = linear_acceptor(["a"], wfst.SymbolTable(["a"]))
    b = linear_acceptor(["x"], wfst.SymbolTable(["x"]))
    with pytest.raises(wfst.AlphabetMismatch):
        wfst.compose(a, b)


def test_determinize_output_is_deterministic_and_equivalent():
    rng = random.Random(5)
    done = 0
    while done < 25:
        m = random_machine(rng, acceptor=True)
        try:
            d = wfst.determinize(m, state_cap=5000)
        except NonFunctional:
            continue
        done += 1
        assert d.is_deterministic()
        assert relations_equal(enumerate_relation(m), enumerate_relation(d))


def test_determinize_merges_common_prefix():
    syms = wfst.SymbolTable(["a", "b"])
    fst = wfst.Wfst(syms, syms)
    s0 = fst.add_state()
    fst.start = s0
    for w, tail in ((1.0, "a"), (2.0, "b")):
        cur = s0
        for lab in ["a", tail]:
            nxt = fst.add_state()
            fst.add_arc(cur, syms.index(lab), syms.index(lab),
                        w if cur == s0 else 0.0, nxt)
            cur = nxt
        fst.set_final(cur, 0.0)
    d = wfst.determinize(fst)
    # the shared first "a" arc must carry the minimum weight
    first = [a for a in d.arcs[d.start] if a.ilabel == syms.index("a")]
    assert len(first) == 1
    assert first[0].weight == pytest.approx(1.0)


def test_determinize_state_cap_raises():
    # optional-silence loop plus a silence word entry share the SIL phone,
    # which is the textbook non-functional case without disambiguation
    lex = lexicon.parse_lexicon("A AH\n").with_specials()
    inv = lexicon.derive_inventory(lex)
    l_fst = wfst.build_L(lex, inv, with_disambig=False)
    with pytest.raises(NonFunctional):
        wfst.determinize(l_fst, state_cap=50)


def test_minimize_merges_identical_final_states():
    syms = wfst.SymbolTable(["a", "b"])
    fst = wfst.Wfst(syms, syms)
    s0, s1, s2 = fst.add_state(), fst.add_state(), fst.add_state()
    fst.start = s0
    fst.add_arc(s0, syms.index("a"), syms.index("a"), 0.5, s1)
    fst.add_arc(s0, syms.index("b"), syms.index("b"), 0.25, s2)
    fst.set_final(s1, 0.0)
    fst.set_final(s2, 0.0)
    m = wfst.minimize(fst)
    assert m.num_states == fst.num_states - 1
    assert relations_equal(enumerate_relation(fst), enumerate_relation(m))


def test_minimize_requires_deterministic_input():
    syms = wfst.SymbolTable(["a"])
    fst = wfst.Wfst(syms, syms)
    s0, s1 = fst.add_state(), fst.add_state()
    fst.start = s0
    fst.add_arc(s0, 1, 1, 0.0, s1)
    fst.add_arc(s0, 1, 1, 1.0, s0)
    fst.set_final(s1, 0.0)
    with pytest.raises(NotDeterministic):
        wfst.minimize(fst)


def test_minimize_preserves_relation_on_random_machines():
    rng = random.Random(13)
    for _ in range(25):
        m = random_deterministic_machine(rng)
        mm = wfst.minimize(m)
        assert mm.num_states <= max(m.num_states, 1)
        assert relations_equal(enumerate_relation(m), enumerate_relation(mm))


def test_push_weights_preserves_relation_on_cyclic_machines():
    rng = random.Random(17)
    for _ in range(25):
        m = random_machine(rng, acceptor=False)
        p = wfst.push_weights(m)
        assert relations_equal(enumerate_relation(m), enumerate_relation(p))


def test_disambig_for_homophones_and_prefixes():
    lex = lexicon.parse_lexicon(
        "RED R EH D\nREAD R EH D\nREDDEN R EH D AH N\nBLUE B L UW\n"
    )
    assignment, max_k = wfst.disambig_for(lex)
    entries = {e.word: assignment[i] for i, e in enumerate(lex.entries)}
    # homophones get distinct symbols; the prefix situation needs one too
    assert entries["RED"] is not None and entries["READ"] is not None
    assert entries["RED"] != entries["READ"]
    assert entries["BLUE"] is None
    assert max_k >= 2


def test_build_L_accepts_each_pronunciation(inventory):
    lex = lexicon.parse_lexicon("MA M AA\nMI M IY\n").with_specials()
    l_fst = wfst.build_L(lex, inventory, with_disambig=False)
    rel = enumerate_relation(l_fst, max_symbols=3, max_arcs=4)
    ma = tuple(l_fst.isyms.index(p) for p in ("M", "AA"))
    assert rel[(ma, (l_fst.osyms.index("MA"),))] == pytest.approx(0.0)
    sil = (l_fst.isyms.index("SIL"),)
    assert rel[(sil, ())] == pytest.approx(-math.log(0.5))


def test_build_L_determinizes_with_disambig(inventory):
    lex = lexicon.parse_lexicon("MA M AA\nMAS M AA S\n").with_specials()
    l_fst = wfst.build_L(lex, inventory, with_disambig=True)
    d = wfst.determinize(l_fst, state_cap=1000)
    assert d.is_deterministic()


def test_build_C_is_identity(inventory):
    c = wfst.build_C(inventory, ndisambig=1)
    assert c.num_states == 1
    for a in c.arcs[0]:
        assert a.ilabel == a.olabel and a.weight == 0.0


def test_build_H_chain_costs():
    am = toy_model(phones=("A",), states_per_phone=2, self_loop=0.5)
    inv = lexicon.PhoneInventory(frozenset(), frozenset({"A"}))
    h = wfst.build_H(am, inv, ndisambig=0)
    rel = enumerate_relation(h, max_symbols=3, max_arcs=6)
    seq = tuple(h.isyms.index(f"s{i}") for i in (0, 1))
    want = -math.log(0.5) * 2  # forward transition plus phone exit
    assert rel[(seq, (h.osyms.index("A"),))] == pytest.approx(want)


def drop_eps_self_loops(t):
    """Copy without cost-free eps:eps self-loops (stripped #0 loops).

    They never change the weighted relation but stall path enumeration.
    """
    out = wfst.Wfst(t.isyms, t.osyms)
    for _ in range(t.num_states):
        out.add_state()
    out.start = t.start
    out.finals = dict(t.finals)
    for s, arcs in enumerate(t.arcs):
        for a in arcs:
            if (a.nextstate == s and a.ilabel == wfst.EPS
                    and a.olabel == wfst.EPS and a.weight == 0.0):
                continue
            out.add_arc(s, *a)
    return out


def hcl_pair(text):
    """(optimized HCL, raw stripped H∘C∘L) for a lexicon text."""
    lex = lexicon.parse_lexicon(text).with_specials()
    phones = {p for e in lex.entries for p in e.phones}
    inv = lexicon.PhoneInventory(
        frozenset({"SIL", "SPN"}), frozenset(phones - {"SIL", "SPN"})
    )
    am = toy_model(phones=tuple(inv.ordered()), states_per_phone=1)
    nd = wfst.num_disambig(lex)
    l_fst = wfst.build_L(lex, inv, with_disambig=True)
    c_fst = wfst.build_C(inv, ndisambig=nd)
    h_fst = wfst.build_H(am, inv, ndisambig=nd)
    optimized = wfst.compile_hcl(h_fst, c_fst, l_fst)
    raw = wfst.strip_disambig(wfst.compose(h_fst, wfst.compose(c_fst, l_fst)))
    return drop_eps_self_loops(optimized), drop_eps_self_loops(raw)


TOY_LEXICONS = (
    "MA M AA\n",
    "MA M AA\nAM AA M\n",
    "MA M AA\nMAA M AA\n",  # prefix pair exercises the disambig path
)


def test_compile_hcl_matches_raw_composition():
    for text in TOY_LEXICONS:
        optimized, raw = hcl_pair(text)
        got = enumerate_relation(optimized, max_symbols=3, max_arcs=40)
        want = enumerate_relation(raw, max_symbols=3, max_arcs=40)
        assert relations_equal(got, want)


def test_beam_search_full_beam_equals_brute_force():
    rng = random.Random(23)
    for _ in range(30):
        graph, scores = _random_senone_graph(rng)
        want_cost, want_path = brute_force_best_path(graph, scores)
        if want_path is None:
            continue
        got = wfst.shortest_path_beam(graph, scores, beam=graph.num_states + 1)
        assert got.cost == pytest.approx(want_cost, abs=1e-9)
        assert len(got.frame_senones) == len(scores)


def test_beam_collapse_on_impossible_graph():
    am = toy_model(phones=("A",), states_per_phone=2)
    inv = lexicon.PhoneInventory(frozenset(), frozenset({"A"}))
    h = wfst.strip_disambig(wfst.build_H(am, inv))
    scores = np.zeros((1, am.senone_count))  # one frame cannot cross 2 states
    with pytest.raises(wfst.BeamCollapse):
        wfst.shortest_path_beam(h, scores, beam=10)


def test_narrow_beam_is_no_better_than_exact():
    rng = random.Random(29)
    graph, scores = _random_senone_graph(rng, num_states=4, T=5)
    exact = wfst.shortest_path_beam(graph, scores, beam=10)
    narrow = wfst.shortest_path_beam(graph, scores, beam=1)
    assert narrow.cost >= exact.cost - 1e-12
