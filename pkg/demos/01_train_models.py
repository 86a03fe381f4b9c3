"""Train the two models every later demo needs.

Builds a synthetic two-tone corpus, trains a monophone GMM-HMM acoustic
model on it, trains a graphone G2P model on the 20-word lexicon, and
saves everything under demo_work/.

Run:  python3 demos/01_train_models.py
"""

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import synthcorpus
from gop_forge import acoustic, g2p, lexicon

WORK = os.path.join(os.path.dirname(__file__), "demo_work")


def main():
    os.makedirs(WORK, exist_ok=True)

    lex = synthcorpus.base_lexicon()
    lexicon.save_lexicon(lex, os.path.join(WORK, "lexicon.txt"))
    print(f"lexicon: {len(lex)} entries, "
          f"{len(lexicon.derive_inventory(lex).phones)} phones")

    print("extracting features for 10 training utterances ...")
    features, transcripts = synthcorpus.training_corpus(seed=0)
    inv = lexicon.PhoneInventory(
        frozenset({lexicon.SIL_PHONE, lexicon.SPN_PHONE}),
        frozenset(synthcorpus.PHONE_FREQS),
    )
    print("training the acoustic model (Viterbi EM, flat start) ...")
    am, lls = acoustic.train_am(features, transcripts, inv,
                                acoustic.TrainConfig(max_iterations=8, seed=0))
    for i, ll in enumerate(lls):
        print(f"  iter {i}: avg log-likelihood {ll:.3f}")
    acoustic.save_model(am, os.path.join(WORK, "am.txt"))

    print("training the graphone G2P model (EM over segmentations) ...")
    model = g2p.train(lex, g2p.G2pConfig(order=3, max_iterations=15))
    print(f"  graphone inventory: {len(model.inventory)} units, "
          f"final log-likelihood {model.training_loglikelihoods[-1]:.3f}")
    g2p.save_model(model, os.path.join(WORK, "g2p.txt"))

    print("sanity check: pronouncing words the model never saw")
    for word in synthcorpus.OOV_WORDS:
        phones, lp = g2p.decode(model, word)[0]
        print(f"  {word} -> {' '.join(phones)}   (logprob {lp:.2f})")
    print(f"models written to {WORK}/")


if __name__ == "__main__":
    main()
