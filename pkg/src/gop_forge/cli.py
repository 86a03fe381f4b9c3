"""Command-line entry point.

Every pipeline stage is reachable from a subcommand; data goes to files or
stdout, diagnostics to stderr.  Exit codes: 0 success, 1 domain error,
2 usage error.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__, acoustic, align, g2p, gop, lexicon, pipeline, verify, wfst
from .errors import GopForgeError


def _load_lexicons(paths):
    return [lexicon.load_lexicon(p) for p in paths]


def _inventory_from_am(am):
    silence = frozenset({lexicon.SIL_PHONE, lexicon.SPN_PHONE} & set(am.phones))
    return lexicon.PhoneInventory(silence, frozenset(am.phones) - silence)


# --- lexicon ---

def cmd_lexicon_prepare(args):
    lex = lexicon.load_lexicon(args.lexicon).with_specials()
    lexicon.save_lexicon(lex, args.out)
    if args.inventory_dir:
        os.makedirs(args.inventory_dir, exist_ok=True)
        lexicon.save_inventory(lexicon.derive_inventory(lex), args.inventory_dir)
    return 0


def cmd_lexicon_merge(args):
    base = lexicon.load_lexicon(args.base)
    addition = lexicon.load_lexicon(args.addition)
    lexicon.save_lexicon(lexicon.merge_lexicons(base, addition), args.out)
    return 0


def cmd_lexicon_oov(args):
    with open(args.transcript) as f:
        words = f.read().split()
    oov = lexicon.find_oov(words, _load_lexicons(args.lexicon))
    out = "".join(w + "\n" for w in oov)
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write(out)
    else:
        sys.stdout.write(out)
    return 0


# --- g2p ---

def cmd_g2p_train(args):
    lex = lexicon.load_lexicon(args.lexicon)
    config = g2p.G2pConfig(order=args.order, max_graphemes=args.max_graphemes,
                           max_phones=args.max_phones)
    model = g2p.train(lex, config)
    g2p.save_model(model, args.out)
    return 0


def cmd_g2p_apply(args):
    model = g2p.load_model(args.model)
    with open(args.words) as f:
        words = [w.strip().upper() for w in f if w.strip()]
    for word in words:
        for phones, logprob in g2p.decode(model, word, beam=args.beam,
                                          nbest=args.nbest):
            line = f"{word} {' '.join(phones)}"
            if args.scores:
                line += f"\t{logprob:.4f}"
            print(line)
    return 0


# --- graph ---

def cmd_graph_compile_l(args):
    lex = lexicon.load_lexicon(args.lexicon).with_specials()
    inv = lexicon.derive_inventory(lex)
    l_fst = wfst.build_L(lex, inv, with_disambig=args.disambig,
                         sil_prob=args.sil_prob)
    with open(args.out, "w", newline="\n") as f:
        f.write(l_fst.serialize())
    if args.isyms:
        l_fst.isyms.save(args.isyms)
    if args.osyms:
        l_fst.osyms.save(args.osyms)
    return 0


def cmd_graph_compile_hcl(args):
    am = acoustic.load_model(args.am)
    lex = lexicon.load_lexicon(args.lexicon).with_specials()
    hcl = align.build_decoding_graph(lex, _inventory_from_am(am), am,
                                     sil_prob=args.sil_prob)
    with open(args.out, "w", newline="\n") as f:
        f.write(hcl.serialize())
    if args.isyms:
        hcl.isyms.save(args.isyms)
    if args.osyms:
        hcl.osyms.save(args.osyms)
    return 0


def cmd_graph_info(args):
    fst = wfst.Wfst.parse(open(args.fst).read())
    print(f"states {fst.num_states}")
    print(f"arcs {fst.num_arcs}")
    print(f"final_states {len(fst.finals)}")
    return 0


# --- am ---

def _utt_id_for(path, override):
    return override or os.path.splitext(os.path.basename(path))[0]


def cmd_am_extract(args):
    samples, rate = acoustic.read_wav(args.wav)
    feats = acoustic.extract_features(samples, rate)
    acoustic.save_features([(_utt_id_for(args.wav, args.utt_id), feats)], args.out)
    return 0


def cmd_am_train(args):
    rows = []
    with open(args.manifest) as f:
        for line in f:
            if line.strip():
                utt_id, wav, transcript = line.rstrip("\n").split("\t")
                rows.append((utt_id, wav, transcript.split()))
    features = []
    transcripts = []
    phones = set()
    for _, wav, transcript in rows:
        samples, rate = acoustic.read_wav(wav)
        features.append(acoustic.extract_features(samples, rate))
        transcripts.append(transcript)
        phones.update(transcript)
    silence = frozenset({lexicon.SIL_PHONE, lexicon.SPN_PHONE} & phones)
    inv = lexicon.PhoneInventory(silence, frozenset(phones) - silence)
    config = acoustic.TrainConfig(max_iterations=args.iterations,
                                  num_components=args.components,
                                  seed=args.seed)
    model, lls = acoustic.train_am(features, transcripts, inv, config)
    acoustic.save_model(model, args.out)
    print(f"iterations {len(lls)}", file=sys.stderr)
    return 0


def cmd_am_posteriors(args):
    am = acoustic.load_model(args.am)
    samples, rate = acoustic.read_wav(args.wav)
    feats = acoustic.extract_features(samples, rate)
    post = acoustic.posteriors(am, feats)
    utt_id = _utt_id_for(args.wav, args.utt_id)
    rows = " ; ".join(" ".join(repr(float(v)) for v in row) for row in post)
    with open(args.out, "w", newline="\n") as f:
        f.write(f"{utt_id} [ {rows} ]\n")
    return 0


# --- align / gop ---

def _align_utterance(args):
    am = acoustic.load_model(args.am)
    lex = lexicon.load_lexicon(args.lexicon).with_specials()
    inv = _inventory_from_am(am)
    samples, rate = acoustic.read_wav(args.wav)
    feats = acoustic.extract_features(samples, rate)
    graph = align.compile_utterance_graph(args.transcript, lex, inv, am)
    alignment = align.force_align(
        graph, feats, am, utt_id=_utt_id_for(args.wav, args.utt_id),
        transcript=args.transcript, lexicon=lex, beam=args.beam,
    )
    return am, feats, alignment


def cmd_align_run(args):
    _, _, alignment = _align_utterance(args)
    if args.dump:
        with open(args.dump, "w", newline="\n") as f:
            f.write(align.alignment_dump_line(alignment) + "\n")
    for path, level in ((args.ctm_phone, "phone"), (args.ctm_word, "word")):
        if path:
            with open(path, "w", newline="\n") as f:
                f.write(align.ctm_text(align.emit_ctm(alignment, level=level)))
    if not (args.dump or args.ctm_phone or args.ctm_word):
        print(align.alignment_dump_line(alignment))
    return 0


def cmd_align_ctm(args):
    am = acoustic.load_model(args.am)
    with open(args.dump) as f:
        line = f.readline().split()
    utt_id, senones = line[0], [int(s) for s in line[1:]]
    shift = args.frame_shift
    rows = []
    start = 0
    for t in range(1, len(senones) + 1):
        boundary = t == len(senones)
        if not boundary:
            boundary = (am.phone_of_senone(senones[t])
                        != am.phone_of_senone(senones[start])
                        or am.state_of_senone(senones[t])
                        < am.state_of_senone(senones[t - 1]))
        if boundary:
            phone = am.phones[am.phone_of_senone(senones[start])]
            rows.append(align.CtmRow(utt_id, "1", start * shift,
                                     (t - start) * shift, phone))
            start = t
    sys.stdout.write(align.ctm_text(rows))
    return 0


def cmd_gop_score(args):
    am, feats, alignment = _align_utterance(args)
    post = acoustic.posteriors(am, feats)
    report = gop.score_utterance(alignment, post, am,
                                 skip_entry=args.skip_entry)
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write(report.serialize())
    else:
        sys.stdout.write(report.serialize())
    return 0


# --- pipeline ---

def cmd_pipeline_run(args):
    if args.config:
        config = pipeline.load_config(args.config)
    else:
        config = pipeline.PipelineConfig()
    if args.mode:
        config.mode = args.mode
    if args.out:
        config.output_dir = args.out
    if args.strict:
        config.strict = True
    if args.beam:
        config.beam = args.beam
    for name in ("lexicon", "g2p_model", "acoustic_model"):
        value = getattr(args, name if name != "lexicon" else "lexicon_path")
        if value:
            setattr(config, name, value)
    if not (config.lexicon and config.g2p_model and config.acoustic_model):
        raise pipeline.ConfigError(
            "lexicon, g2p_model and acoustic_model must be set "
            "(flags or config file)"
        )
    base = lexicon.load_lexicon(config.lexicon)
    extras = _load_lexicons(config.extra_lexicons)
    g2p_model = g2p.load_model(config.g2p_model)
    am = acoustic.load_model(config.acoustic_model)
    engine = pipeline.ScoringEngine(
        base, extras, g2p_model, am, config.mode, config=config,
        lexicon_out=args.lexicon_out,
    )
    manifest = pipeline.parse_manifest(args.manifest)
    summary = pipeline.run_batch(engine, manifest, output_dir=config.output_dir)
    text = pipeline.summary_text(summary)
    with open(os.path.join(config.output_dir, "summary.txt"), "w",
              newline="\n") as f:
        f.write(text)
    sys.stdout.write(text)
    if config.strict and summary["failed"]:
        return 1
    return 0


def cmd_selftest(args):
    ok = verify.run_selftest(seed=args.seed)
    return 0 if ok else 1


# ---------------------------------------------------------------------------

#: (group, command) -> handler; the coverage test walks this table.
DISPATCH = {
    ("lexicon", "prepare"): cmd_lexicon_prepare,
    ("lexicon", "merge"): cmd_lexicon_merge,
    ("lexicon", "oov"): cmd_lexicon_oov,
    ("g2p", "train"): cmd_g2p_train,
    ("g2p", "apply"): cmd_g2p_apply,
    ("graph", "compile-l"): cmd_graph_compile_l,
    ("graph", "compile-hcl"): cmd_graph_compile_hcl,
    ("graph", "info"): cmd_graph_info,
    ("am", "extract"): cmd_am_extract,
    ("am", "train"): cmd_am_train,
    ("am", "posteriors"): cmd_am_posteriors,
    ("align", "run"): cmd_align_run,
    ("align", "ctm"): cmd_align_ctm,
    ("gop", "score"): cmd_gop_score,
    ("pipeline", "run"): cmd_pipeline_run,
    ("selftest", None): cmd_selftest,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gop-forge",
        description="Pronunciation scoring with OOV-free lexicon expansion",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for all randomized steps")
    groups = parser.add_subparsers(dest="group", required=True)

    g_lex = groups.add_parser("lexicon").add_subparsers(dest="command", required=True)
    p = g_lex.add_parser("prepare")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inventory-dir")
    p = g_lex.add_parser("merge")
    p.add_argument("--base", required=True)
    p.add_argument("--addition", required=True)
    p.add_argument("--out", required=True)
    p = g_lex.add_parser("oov")
    p.add_argument("--transcript", required=True)
    p.add_argument("--lexicon", action="append", required=True)
    p.add_argument("--out")

    g_g2p = groups.add_parser("g2p").add_subparsers(dest="command", required=True)
    p = g_g2p.add_parser("train")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--max-graphemes", type=int, default=2)
    p.add_argument("--max-phones", type=int, default=2)
    p.add_argument("--out", required=True)
    p = g_g2p.add_parser("apply")
    p.add_argument("--model", required=True)
    p.add_argument("--words", required=True)
    p.add_argument("--nbest", type=int, default=1)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--scores", action="store_true")

    g_graph = groups.add_parser("graph").add_subparsers(dest="command", required=True)
    p = g_graph.add_parser("compile-l")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--disambig", action="store_true")
    p.add_argument("--sil-prob", type=float, default=0.5)
    p.add_argument("--isyms")
    p.add_argument("--osyms")
    p = g_graph.add_parser("compile-hcl")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--am", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sil-prob", type=float, default=0.5)
    p.add_argument("--isyms")
    p.add_argument("--osyms")
    p = g_graph.add_parser("info")
    p.add_argument("--fst", required=True)

    g_am = groups.add_parser("am").add_subparsers(dest="command", required=True)
    p = g_am.add_parser("extract")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--utt-id")
    p = g_am.add_parser("train")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--components", type=int, default=1)
    p = g_am.add_parser("posteriors")
    p.add_argument("--am", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--utt-id")

    g_align = groups.add_parser("align").add_subparsers(dest="command", required=True)
    p = g_align.add_parser("run")
    for flag in ("--am", "--lexicon", "--wav", "--transcript"):
        p.add_argument(flag, required=True)
    p.add_argument("--utt-id")
    p.add_argument("--beam", type=int, default=200)
    p.add_argument("--dump")
    p.add_argument("--ctm-phone")
    p.add_argument("--ctm-word")
    p = g_align.add_parser("ctm")
    p.add_argument("--dump", required=True)
    p.add_argument("--am", required=True)
    p.add_argument("--frame-shift", type=float, default=0.01)

    g_gop = groups.add_parser("gop").add_subparsers(dest="command", required=True)
    p = g_gop.add_parser("score")
    for flag in ("--am", "--lexicon", "--wav", "--transcript"):
        p.add_argument(flag, required=True)
    p.add_argument("--utt-id")
    p.add_argument("--beam", type=int, default=200)
    p.add_argument("--skip-entry", action="store_true")
    p.add_argument("--out")

    g_pipe = groups.add_parser("pipeline").add_subparsers(dest="command", required=True)
    p = g_pipe.add_parser("run")
    p.add_argument("--mode", choices=pipeline.MODES)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--lexicon", dest="lexicon_path")
    p.add_argument("--g2p-model", dest="g2p_model")
    p.add_argument("--acoustic-model", dest="acoustic_model")
    p.add_argument("--lexicon-out")
    p.add_argument("--out")
    p.add_argument("--beam", type=int)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--jobs", type=int, default=1,
                   help="reserved; scoring currently runs sequentially")

    groups.add_parser("selftest")
    return parser


def dispatch(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed)
    handler = DISPATCH[(args.group, getattr(args, "command", None))]
    try:
        return handler(args)
    except GopForgeError as e:
        print(f"gop-forge: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"gop-forge: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
