"""Regenerate the bundled sentence corpus from the bundled word list.

The sentence file shipped under src/titan/data/ is a build artifact of this
script. Rerun it only when words.txt changes, then commit the new output:

    python tools/gen_corpus.py

Sentences are plain lowercase word runs, 4 to 12 words, single spaces, no
punctuation, and no word repeated within a sentence. Task generators that
need a repeated word or a specific word count edit the sentence themselves,
so the base corpus stays free of accidental repeats.
"""

import random
from pathlib import Path

SEED = 20240817
COUNT = 520
MIN_WORDS = 4
MAX_WORDS = 12

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "titan" / "data"


def main() -> None:
    words = [w for w in (DATA_DIR / "words.txt").read_text().split() if w]
    rng = random.Random(SEED)
    seen = set()
    sentences = []
    while len(sentences) < COUNT:
        n = rng.randint(MIN_WORDS, MAX_WORDS)
        sentence = " ".join(rng.sample(words, n))
        if sentence in seen:
            continue
        seen.add(sentence)
        sentences.append(sentence)
    out = DATA_DIR / "sentences.txt"
    out.write_text("\n".join(sentences) + "\n")
    print(f"wrote {len(sentences)} sentences to {out}")


if __name__ == "__main__":
    main()
