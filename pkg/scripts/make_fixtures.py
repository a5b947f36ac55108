"""Regenerate the bundled test fixtures (committed; not run during tests).

Trains the 4x100 MLP on the 8x8 digits dataset with scikit-learn and writes
it in the canonical weight format together with one correctly-classified
representative per class.  Usage: python scripts/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits
from sklearn.neural_network import MLPClassifier

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    x = digits.data / 16.0
    y = digits.target
    clf = MLPClassifier(hidden_layer_sizes=(100, 100, 100, 100),
                        activation="relu", solver="adam", max_iter=400,
                        random_state=0)
    clf.fit(x, y)
    print("train accuracy:", clf.score(x, y))

    layers = []
    for W, b in zip(clf.coefs_, clf.intercepts_):
        layers.append({"type": "dense",
                       "W": [[repr(float(v)) for v in row] for row in W.T],
                       "b": [repr(float(v)) for v in b]})
        layers.append({"type": "relu"})
    layers.pop()  # no activation after the head
    layers.append({"type": "softmax"})
    doc = {"input_dim": 64, "layers": layers}
    (OUT / "digits_mlp.json").write_text(json.dumps(doc) + "\n")

    pred = clf.predict(x)
    reps = []
    for cls in range(10):
        idx = np.nonzero((y == cls) & (pred == cls))[0][0]
        reps.append([repr(float(v)) for v in x[idx]])
    (OUT / "digits_points.json").write_text(
        json.dumps({"points": reps, "classes": list(range(10))}) + "\n")
    print("wrote", OUT / "digits_mlp.json", "and digits_points.json")


if __name__ == "__main__":
    main()
