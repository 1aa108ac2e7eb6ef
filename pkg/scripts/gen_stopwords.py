#!/usr/bin/env python3
"""Dump the frozen English stop list bundled with the package.

The 318-word list is the classic Glasgow IR stop list (as frozen in
scikit-learn); it is written once to src/seke/data/stopwords_en.txt and
versioned there so association scores stay reproducible.
"""

from pathlib import Path

from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS


def main():
    out = Path(__file__).resolve().parent.parent / "src" / "seke" / "data" / "stopwords_en.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    words = sorted(ENGLISH_STOP_WORDS)
    out.write_text("\n".join(words) + "\n", encoding="utf-8")
    print(f"wrote {len(words)} stopwords to {out}")


if __name__ == "__main__":
    main()
