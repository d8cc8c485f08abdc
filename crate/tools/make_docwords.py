#!/usr/bin/env python3
"""Builds the bundled `docwords` bag-of-words dataset.

Documents are API docstrings harvested from four scientific Python libraries
(one class per library). Each docstring becomes one document; features are
L2-normalized term counts over a shared vocabulary selected by document
frequency. Run from the repository root; writes into data/.
"""

import inspect
import re
import sys
from collections import Counter

PER_CLASS = 100
VOCAB_SIZE = 128
MIN_DOC_CHARS = 240

STOPWORDS = set(
    """a an and are as at be by for from has have if in into is it its of on or
    that the this to was will with not no when where which while each other
    than then there these those can may must should would could between both
    being been also any all some such very more most over under only same
    different default none true false new used use using given value values
    parameter parameters return returns type types object objects example
    examples note notes see method methods function functions class attribute
    attributes optional input output array like shape int float bool str
    string data
    """.split()
)

TOKEN = re.compile(r"[a-z]{3,}")


def harvest(module_names):
    import importlib

    docs = []
    seen = set()
    for name in module_names:
        try:
            mod = importlib.import_module(name)
        except Exception:
            continue
        for _, obj in inspect.getmembers(mod):
            if not (inspect.isfunction(obj) or inspect.isclass(obj)):
                continue
            doc = inspect.getdoc(obj)
            if not doc or len(doc) < MIN_DOC_CHARS:
                continue
            key = doc[:200]
            if key in seen:
                continue
            seen.add(key)
            docs.append(doc)
            if len(docs) >= PER_CLASS:
                return docs
    return docs


CLASSES = [
    ("numpy", ["numpy", "numpy.linalg", "numpy.fft", "numpy.random", "numpy.ma"]),
    ("scipy", ["scipy.signal", "scipy.optimize", "scipy.stats", "scipy.interpolate", "scipy.linalg"]),
    ("sklearn", ["sklearn.linear_model", "sklearn.cluster", "sklearn.ensemble", "sklearn.metrics", "sklearn.preprocessing"]),
    ("pandas", ["pandas", "pandas.api.types", "pandas.core.groupby.generic", "pandas.core.window.rolling", "pandas.io.formats.style"]),
]


def main():
    all_docs = []
    labels = []
    for label, (name, modules) in enumerate(CLASSES):
        docs = harvest(modules)
        if len(docs) < PER_CLASS:
            print(f"warning: {name} yielded only {len(docs)} documents", file=sys.stderr)
        all_docs.extend(docs[:PER_CLASS])
        labels.extend([label] * min(len(docs), PER_CLASS))
        print(f"{name}: {min(len(docs), PER_CLASS)} documents")

    token_lists = [
        [t for t in TOKEN.findall(doc.lower()) if t not in STOPWORDS]
        for doc in all_docs
    ]
    n = len(token_lists)
    df = Counter()
    for toks in token_lists:
        df.update(set(toks))
    lo, hi = max(3, int(0.02 * n)), int(0.5 * n)
    candidates = [(cnt, t) for t, cnt in df.items() if lo <= cnt <= hi]
    candidates.sort(key=lambda x: (-x[0], x[1]))
    vocab = [t for _, t in candidates[:VOCAB_SIZE]]
    index = {t: i for i, t in enumerate(vocab)}
    print(f"{n} documents, vocab {len(vocab)}")

    rows = []
    kept_labels = []
    for toks, label in zip(token_lists, labels):
        counts = [0.0] * len(vocab)
        for t in toks:
            j = index.get(t)
            if j is not None:
                counts[j] += 1.0
        norm = sum(c * c for c in counts) ** 0.5
        if norm == 0.0:
            continue
        rows.append([c / norm for c in counts])
        kept_labels.append(label)

    with open("data/docwords_features.csv", "w") as f:
        for row in rows:
            f.write(",".join(repr(v) for v in row) + "\n")
    with open("data/docwords_labels.txt", "w") as f:
        for l in kept_labels:
            f.write(f"{l}\n")
    with open("data/docwords_vocab.txt", "w") as f:
        for t in vocab:
            f.write(t + "\n")
    print(f"wrote {len(rows)} rows x {len(vocab)} terms")


if __name__ == "__main__":
    main()
