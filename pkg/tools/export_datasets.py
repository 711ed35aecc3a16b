"""Regenerate the bundled CSV assets from scikit-learn's copies of the UCI sets.

Run once by maintainers; the package itself never imports scikit-learn.
"""
import csv
from pathlib import Path

from sklearn import datasets

OUT = Path(__file__).resolve().parents[1] / "src" / "mahpo" / "assets"
LOADERS = {
    "iris": datasets.load_iris,
    "wine": datasets.load_wine,
    "breast_cancer": datasets.load_breast_cancer,
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, loader in LOADERS.items():
        bunch = loader()
        names = [str(n).replace(" ", "_").replace("(", "").replace(")", "") for n in bunch.feature_names]
        with open(OUT / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names + ["target"])
            for row, label in zip(bunch.data, bunch.target):
                writer.writerow([repr(float(v)) for v in row] + [bunch.target_names[label]])
        print(name, bunch.data.shape)


if __name__ == "__main__":
    main()
