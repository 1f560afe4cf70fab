"""Rebuild data/breast-cancer (LIBSVM format) from the MASS ``biopsy`` table.

The LIBSVM ``breast-cancer`` benchmark is the original Wisconsin data with
incomplete rows dropped (683 rows), the sample ID kept as feature 1 and the
class coded 2 (benign) / 4 (malignant). The ``rdatasets`` wheel bundles the
same table, so the file can be regenerated offline::

    pip install rdatasets
    python scripts/make_breast_cancer.py data/breast-cancer
"""
import sys

from rdatasets import data


def main(out):
    df = data("MASS", "biopsy").dropna()
    cols = ["ID"] + [f"V{i}" for i in range(1, 10)]
    with open(out, "w") as fh:
        for _, row in df.iterrows():
            label = 2 if row["class"] == "benign" else 4
            feats = " ".join(f"{k}:{int(row[c])}" for k, c in enumerate(cols, start=1))
            fh.write(f"{label} {feats}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/breast-cancer")
