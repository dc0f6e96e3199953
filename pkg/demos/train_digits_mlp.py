"""Train the small digits MLP shipped with the package.

Run once to regenerate ``src/fermisim/data/digits_mlp``.  Needs
scikit-learn (the library itself does not).

    python3 demos/train_digits_mlp.py
"""

from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPClassifier

from fermisim.nn_mapper import LayerSpec, Model, save_eval_set

OUT = Path(__file__).resolve().parents[1] / "src" / "fermisim" / "data" / "digits_mlp"
HIDDEN = 64


def main():
    X, y = load_digits(return_X_y=True)
    X_train, X_test, y_train, y_test = train_test_split(X, y, test_size=0.3, random_state=0, stratify=y)
    clf = MLPClassifier(hidden_layer_sizes=(HIDDEN,), activation="relu", alpha=1.0,
                        max_iter=800, random_state=0)
    clf.fit(X_train, y_train)
    print(f"train accuracy {clf.score(X_train, y_train):.4f}  test accuracy {clf.score(X_test, y_test):.4f}")

    layers = [
        LayerSpec("dense", 64, HIDDEN, "relu", "int4", name="fc1"),
        LayerSpec("dense", HIDDEN, 10, "softmax", "int4", name="fc2"),
    ]
    weights = [w.T.copy() for w in clf.coefs_]  # sklearn stores (in, out)
    model = Model(layers, weights, [b.copy() for b in clf.intercepts_])
    OUT.mkdir(parents=True, exist_ok=True)
    model.save(OUT / "model.json")
    save_eval_set(X_test, y_test, OUT / "eval.csv")
    save_eval_set(X_train[:200], y_train[:200], OUT / "calibration.csv")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
