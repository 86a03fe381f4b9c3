"""End-to-end acceptance gate.

One test per release criterion; the conftest terminal summary prints one
pass/fail line for each.  Tolerances are part of the contract and must not
be loosened.
"""

import filecmp
import math
import os
import random
import time

import numpy as np
import pytest

import synth
from conftest import sample_frames, toy_model
from gop_forge import acoustic, align, cli, g2p, gop, lexicon, pipeline, wfst
from gop_forge.verify import (
    brute_force_best_path,
    compose_oracle,
    enumerate_relation,
    random_deterministic_machine,
    random_machine,
    relations_equal,
)
from test_wfst import TOY_LEXICONS, hcl_pair

OOV_PLAN = [
    ["MA", "KIT"], ["SA", "TI"], ["SAM"], ["KA", "MAS"], ["TAS", "MI"],
    ["TIK"], ["SI", "KAT"], ["MAK"], ["KI", "SIT"], ["TA", "KIS"],
]  # 10 utterances, 3 planted OOV words: KIT, SAM, TAS


def corpus_rows(word_lists, seed=101):
    rng = np.random.default_rng(seed)
    lex = synth.base_lexicon()
    rows = []
    for i, words in enumerate(word_lists):
        wave, _ = synth.utterance_for_words(words, lex, rng)
        feats = acoustic.extract_features(wave, synth.RATE)
        rows.append((f"utt{i:03d}", feats, " ".join(words)))
    return rows


def make_engine(base_lexicon, g2p_model, am, mode, **cfg):
    config = pipeline.PipelineConfig(mode=mode, **cfg)
    return pipeline.ScoringEngine(base_lexicon, [], g2p_model, am, mode,
                                  config=config)


def run_all(engine, rows):
    if engine.mode == "offline":
        engine.run_offline_prepare([t for _, _, t in rows])
    return [engine.run_utterance(*row) for row in rows]


def test_criterion_1_oov_elimination(base_lexicon, g2p_model, am):
    rows = corpus_rows(OOV_PLAN)
    for mode in pipeline.MODES:
        engine = make_engine(base_lexicon, g2p_model, am, mode)
        results = run_all(engine, rows)
        assert len(results) == len(rows)
        for res in results:
            assert lexicon.UNKNOWN_WORD not in res.alignment.words, mode
            for rec in res.report.records:
                if rec.word is not None:  # transcript word, not silence
                    assert rec.phone != lexicon.SPN_PHONE, (mode, rec)
                    assert rec.word != lexicon.UNKNOWN_WORD, (mode, rec)
            text = res.report.serialize()
            assert lexicon.SPN_PHONE not in text.split(), mode
    # control: with resolution disabled the SPN contamination comes back
    control = make_engine(base_lexicon, g2p_model, am, "online",
                          resolve_oov=False)
    res = control.run_utterance(*rows[0])  # contains OOV word KIT
    assert lexicon.UNKNOWN_WORD in res.alignment.words
    assert any(rec.phone == lexicon.SPN_PHONE for rec in res.report.records)


def test_criterion_2_lexicon_set_algebra(base_lexicon, g2p_model, am):
    rows = corpus_rows(OOV_PLAN)

    online = make_engine(base_lexicon, g2p_model, am, "online")
    before = online.state.lexicon.serialize()
    run_all(online, rows)
    assert online.state.lexicon.serialize() == before  # byte-equal with L_0

    hybrid = make_engine(base_lexicon, g2p_model, am, "hybrid")
    seen = set(hybrid.state.lexicon.entries)
    for row in rows:
        hybrid.run_utterance(*row)
        now = set(hybrid.state.lexicon.entries)
        assert now >= seen  # monotone growth
        seen = now

    offline = make_engine(base_lexicon, g2p_model, am, "offline")
    run_all(offline, rows)
    assert set(hybrid.state.lexicon.entries) == set(offline.state.lexicon.entries)


def test_criterion_3_recompilation_counts(base_lexicon, g2p_model, am):
    # one OOV word (KIT) planted in all 4 utterances
    rows = corpus_rows([["KIT", "MA"], ["KIT", "SA"], ["KIT", "TI"],
                        ["KIT", "KA"]], seed=102)
    counts = {}
    for mode in pipeline.MODES:
        engine = make_engine(base_lexicon, g2p_model, am, mode)
        if mode == "offline":
            engine.run_offline_prepare([t for _, _, t in rows])
        summary = pipeline.run_batch(engine, rows)
        assert summary["succeeded"] == 4
        counts[mode] = summary["graph_recompilations"]
    assert counts == {"online": 4, "hybrid": 1, "offline": 0}


def test_criterion_4_wfst_vs_enumeration_oracle():
    started = time.monotonic()
    rng = random.Random(404)
    done = 0
    while done < 50:
        a = random_machine(rng, max_states=10, acceptor=False)
        b = random_machine(rng, max_states=10, acceptor=False)
        b = wfst.Wfst.parse(b.serialize(), a.osyms, a.osyms)
        got = enumerate_relation(wfst.compose(a, b), 6, 12)
        assert relations_equal(got, compose_oracle(a, b), tol=1e-9)

        m = random_machine(rng, max_states=10, acceptor=True)
        try:
            d = wfst.determinize(m, state_cap=5000)
        except wfst.NonFunctional:
            continue  # nondeterminizable draw; take another
        assert d.is_deterministic()
        assert relations_equal(enumerate_relation(m, 6),
                               enumerate_relation(d, 6), tol=1e-9)

        dm = random_deterministic_machine(rng, max_states=10)
        mm = wfst.minimize(dm)
        assert mm.num_states <= max(dm.num_states, 1)
        assert relations_equal(enumerate_relation(dm, 6),
                               enumerate_relation(mm, 6), tol=1e-9)
        done += 1

    for text in TOY_LEXICONS:
        optimized, raw = hcl_pair(text)
        assert relations_equal(
            enumerate_relation(optimized, max_symbols=3, max_arcs=40),
            enumerate_relation(raw, max_symbols=3, max_arcs=40), tol=1e-9)
    assert time.monotonic() - started < 60.0


def _random_unrounded_graph(rng, max_states=4, num_senones=3, max_frames=6):
    isyms = wfst.SymbolTable(f"s{i}" for i in range(num_senones))
    g = wfst.Wfst(isyms, isyms)
    n = rng.randint(2, max_states)
    for _ in range(n):
        g.add_state()
    g.start = 0
    for s in range(n):
        for _ in range(3):
            g.add_arc(s, rng.randint(1, num_senones), wfst.EPS,
                      rng.uniform(0.0, 2.0), rng.randint(0, n - 1))
    g.set_final(rng.randint(0, n - 1), 0.0)
    T = rng.randint(1, max_frames)
    scores = [[rng.uniform(0.0, 3.0) for _ in range(num_senones)]
              for _ in range(T)]
    return g, scores


def test_criterion_5_alignment_correctness():
    # full-beam Viterbi equals exhaustive best path, exact path equality
    rng = random.Random(505)
    done = 0
    while done < 100:
        graph, scores = _random_unrounded_graph(rng)
        want_cost, want_path = brute_force_best_path(graph, scores)
        if want_path is None:
            continue
        got = wfst.shortest_path_beam(graph, scores, beam=graph.num_states + 1)
        assert tuple(got.frame_senones) == want_path
        assert got.cost == pytest.approx(want_cost, abs=1e-9)
        done += 1

    # synthetic 2-phone boundary recovered within +/-2 frames in >=95/100
    am = toy_model(phones=("A", "B"), states_per_phone=3, dim=3,
                   spread=8.0, self_loop=0.7)
    graph = wfst.Wfst(wfst.SymbolTable(f"s{i}" for i in range(6)), None)
    start = graph.add_state()
    graph.start = start
    states = [graph.add_state() for _ in range(6)]
    graph.add_arc(start, graph.isyms.index("s0"), wfst.EPS, 0.0, states[0])
    for i in range(6):
        graph.add_arc(states[i], graph.isyms.index(f"s{i}"), wfst.EPS,
                      -math.log(0.7), states[i])
        if i < 5:
            graph.add_arc(states[i], graph.isyms.index(f"s{i + 1}"), wfst.EPS,
                          -math.log(0.3), states[i + 1])
    graph.set_final(states[5], -math.log(0.3))

    hits = 0
    nrng = np.random.default_rng(506)
    for _ in range(100):
        path = [s for s in range(6) for _ in range(4)]  # boundary at frame 12
        feats = sample_frames(am, path, nrng)
        alignment = align.force_align(graph, feats, am, beam=50)
        b_start = min(s.start for s in alignment.phone_segments
                      if s.phone == "B")
        if abs(b_start - 12) <= 2:
            hits += 1
    assert hits >= 95


def test_criterion_6_gop_formula():
    am1 = toy_model(phones=("A",), states_per_phone=1, dim=2, self_loop=0.5)
    post = np.array([[0.5], [0.5]])
    score = gop.score_phone((0, 2), [0, 0], post, am1)
    assert abs(score - 1.0397) < 1e-4

    sticky = toy_model(phones=("A",), states_per_phone=1, dim=2,
                       self_loop=1.0)
    assert gop.score_phone((0, 3), [0, 0, 0], np.ones((3, 1)), sticky) == 0.0

    am2 = toy_model(phones=("A", "B"), states_per_phone=1, dim=2, spread=4.0)
    nrng = np.random.default_rng(606)
    wins = 0
    for _ in range(100):
        feats = sample_frames(am2, [0, 0, 0, 0], nrng)
        post = acoustic.posteriors(am2, feats)
        matched = gop.score_phone((0, 4), [0, 0, 0, 0], post, am2)
        mismatched = gop.score_phone((0, 4), [1, 1, 1, 1], post, am2)
        if matched < mismatched:
            wins += 1
    assert wins >= 95


def test_criterion_7_g2p(g2p_model, base_lexicon):
    assert g2p_model.check_normalization() < 1e-9
    errors = 0
    for entry in base_lexicon.entries:  # 20-entry training lexicon
        got, _ = g2p.decode(g2p_model, entry.word, beam=10_000)[0]
        errors += got != entry.phones
    assert errors == 0
    lls = g2p_model.training_loglikelihoods
    assert all(b >= a - 1e-10 for a, b in zip(lls, lls[1:]))


def test_criterion_8_acoustic_model(am):
    rng = np.random.default_rng(808)
    wave, _ = synth.utterance_for_words(["MAS", "TIK"],
                                        synth.base_lexicon(), rng)
    feats = acoustic.extract_features(wave, synth.RATE)
    post = acoustic.posteriors(am, feats)
    assert np.max(np.abs(post.sum(axis=1) - 1.0)) < 1e-6

    truth = toy_model(phones=("A", "B"), states_per_phone=3, dim=3,
                      spread=8.0, self_loop=0.7)
    features, transcripts = [], []
    for _ in range(400):
        path = []
        for s in range(truth.senone_count):
            path.append(s)
            while rng.random() < 0.7:
                path.append(s)
        features.append(sample_frames(truth, path, rng))
        transcripts.append(["A", "B"])
    inv = lexicon.PhoneInventory(frozenset(), frozenset({"A", "B"}))
    model, _ = acoustic.train_am(features, transcripts, inv,
                                 acoustic.TrainConfig(max_iterations=10))
    for s in range(truth.senone_count):
        mean_err = np.max(np.abs(model.gmms[s].means[0]
                                 - truth.gmms[s].means[0]))
        assert mean_err < 0.1
        assert abs(model.self_loops[s] - 0.7) < 0.05


def test_criterion_9_determinism(tmp_path, am, g2p_model):
    d = tmp_path
    (d / "lexicon.txt").write_text(synth.LEXICON_TEXT)
    acoustic.save_model(am, d / "am.txt")
    g2p.save_model(g2p_model, d / "g2p.txt")
    manifest = synth.write_corpus(str(d / "corpus"),
                                  [["MA", "KIT"], ["SAM"], ["TIK", "SA"]],
                                  seed=909)
    outs = []
    for name in ("run1", "run2"):
        argv = ["pipeline", "run", "--mode", "hybrid",
                "--manifest", manifest,
                "--lexicon", str(d / "lexicon.txt"),
                "--g2p-model", str(d / "g2p.txt"),
                "--acoustic-model", str(d / "am.txt"),
                "--out", str(d / name)]
        assert cli.dispatch(argv) == 0
        outs.append(d / name)

    files = []
    for root, _, names in os.walk(outs[0]):
        rel = os.path.relpath(root, outs[0])
        files.extend(os.path.normpath(os.path.join(rel, n)) for n in names)
    assert files
    match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1],
                                               sorted(files), shallow=False)
    assert mismatch == [] and errors == []
    assert sorted(match) == sorted(files)
