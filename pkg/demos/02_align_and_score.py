"""Force-align one utterance and print its GoP scores.

Loads the models from demo 01, synthesizes an utterance of "MAS TIK",
compiles the HCL decoding graph, aligns, and prints the phone CTM next
to the per-phone GoP scores.  Lower GoP means closer to the model's idea
of a native rendition.

Run:  python3 demos/01_train_models.py  (once)
      python3 demos/02_align_and_score.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

import synthcorpus
from gop_forge import acoustic, align, gop, lexicon

WORK = os.path.join(os.path.dirname(__file__), "demo_work")


def main():
    am = acoustic.load_model(os.path.join(WORK, "am.txt"))
    lex = lexicon.load_lexicon(os.path.join(WORK, "lexicon.txt")).with_specials()
    silence = frozenset({lexicon.SIL_PHONE, lexicon.SPN_PHONE})
    inv = lexicon.PhoneInventory(silence, frozenset(am.phones) - silence)

    rng = np.random.default_rng(7)
    wave, _ = synthcorpus.utterance_for_words(["MAS", "TIK"], lex, rng)
    feats = acoustic.extract_features(wave, synthcorpus.RATE)
    print(f"utterance: 'MAS TIK', {feats.num_frames} frames")

    hcl = align.build_decoding_graph(lex, inv, am)
    print(f"HCL graph: {hcl.num_states} states, {hcl.num_arcs} arcs")
    graph = align.compile_utterance_graph("MAS TIK", lex, inv, am, hcl=hcl)

    alignment = align.force_align(graph, feats, am, utt_id="demo",
                                  transcript="MAS TIK", lexicon=lex)
    post = acoustic.posteriors(am, feats)
    report = gop.score_utterance(alignment, post, am)

    print("\nphone  word  start  dur    gop")
    for rec in report.records:
        word = rec.word or "-"
        print(f"{rec.phone:<5}  {word:<5} {rec.start:5.2f}  {rec.duration:4.2f}"
              f"  {rec.score:6.3f}")
    print("\nword boundaries (seconds):")
    for word, start, end in report.word_boundaries:
        print(f"  {word:<4} {start:.2f} - {end:.2f}")


if __name__ == "__main__":
    main()
