"""Regenerate src/costtrees/presets/*.json (Twitter spam cost models)."""
import json
from pathlib import Path

# name, decrease category, increase category
TWITTER_FEATURES = [
    ("EntryURLid", "M", "N"), ("AvgURLid", "M", "N"), ("ChainWeight", "L", "N"),
    ("CCsize", "L", "N"), ("CCdensity", "L", "N"), ("MinRCLen", "L", "N"),
    ("AvgLdURLDom", "H", "N"), ("AvgURLDom", "M", "N"), ("GeoDist", "H", "N"),
    ("CntContinent", "M", "N"), ("CntCountry", "M", "N"), ("CntIP", "L", "N"),
    ("CntDomain", "L", "N"), ("CntTLD", "L", "N"), ("ChainLen", "L", "N"),
    ("EntryURLDist", "L", "N"), ("CntInitURL", "L", "N"), ("CntInitURLDom", "L", "N"),
    ("CntLdURL", "L", "N"), ("AvgIPperURL", "L", "N"), ("AvgIPperLdURL", "L", "H"),
    ("MentionCount", "N", "L"), ("HashtagCount", "N", "L"), ("TweetCount", "N", "M"),
    ("URLPercent", "N", "L"),
]

# (alpha, beta, gamma, mu) per model
MODELS = {
    "cost1": {"M1": (0.08, 0.04, 0.02, 0), "M2": (0.12, 0.06, 0.03, 0), "M3": (0.20, 0.10, 0.05, 0),
              "M4": (0.28, 0.14, 0.07, 0), "M5": (0.32, 0.16, 0.08, 0)},
    "cost2": {"M6": (0.09, 0.06, 0.03, 0.03), "M7": (0.15, 0.10, 0.05, 0.05),
              "M8": (0.24, 0.16, 0.08, 0.08), "M9": (0.30, 0.20, 0.10, 0.10)},
    "cost3": {"M10": (0.04, 0.04, 0.02, 0), "M11": (0.06, 0.06, 0.03, 0), "M12": (0.10, 0.10, 0.05, 0),
              "M13": (0.16, 0.16, 0.08, 0), "M14": (0.20, 0.20, 0.10, 0), "M15": (0.28, 0.28, 0.14, 0)},
    "cost4": {"M16": (0.06, 0.03, 0.03, 0), "M17": (0.10, 0.05, 0.05, 0), "M18": (0.16, 0.08, 0.08, 0),
              "M19": (0.20, 0.10, 0.10, 0)},
}
UNIFORM = {"C1": 0.03, "C2": 0.05, "C3": 0.1}


def main(out=Path(__file__).resolve().parents[1] / "src" / "costtrees" / "presets"):
    out.mkdir(parents=True, exist_ok=True)
    feats = [{"name": n, "decrease": dec, "increase": inc} for n, dec, inc in TWITTER_FEATURES]
    for family, models in MODELS.items():
        for name, (a, b, g, m) in models.items():
            doc = {"schema": 1, "kind": "box", "name": name, "family": family,
                   "variables": {"alpha": a, "beta": b, "gamma": g, "mu": m}, "features": feats}
            (out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
    for name, eps in UNIFORM.items():
        doc = {"schema": 1, "kind": "box", "name": name, "uniform": eps}
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
