"""Write the DAAG spam7 table (4601 e-mails, 6 features) as LIBSVM.

Label 1 = spam. Needs the ``rdatasets`` package at fetch time only.
"""
import sys
from pathlib import Path

import rdatasets

COLUMNS = ["crl.tot", "dollar", "bang", "money", "n000", "make"]


def main(out):
    df = rdatasets.data("DAAG", "spam7")
    with open(out, "w") as fh:
        for _, row in df.iterrows():
            label = 1 if row["yesno"] == "y" else 0
            feats = " ".join(f"{j + 1}:{row[c]:g}" for j, c in enumerate(COLUMNS) if row[c] != 0)
            fh.write(f"{label} {feats}".rstrip() + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "data/spam7"))
