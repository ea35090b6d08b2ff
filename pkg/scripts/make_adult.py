"""Build the 123-feature binary ADULT benchmark (a9a layout) from the raw UCI files.

Usage: python scripts/make_adult.py RAW_DIR OUT_DIR

RAW_DIR must contain the UCI ``adult.data`` and ``adult.test`` files. Continuous
attributes are quantile-binned on the training file (capital gain/loss become a
zero/nonzero indicator); categorical attributes are one-hot encoded. Missing
values ('?') set no feature. Output is gzip-compressed svmlight text.
"""

import gzip
import sys
from pathlib import Path

import numpy as np

CATEGORIES = {
    "workclass": "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, State-gov, Without-pay, Never-worked",
    "education": "Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, Assoc-voc, 9th, 7th-8th, 12th, Masters, 1st-4th, 10th, Doctorate, 5th-6th, Preschool",
    "marital-status": "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, Married-spouse-absent, Married-AF-spouse",
    "occupation": "Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, Prof-specialty, Handlers-cleaners, Machine-op-inspct, Adm-clerical, Farming-fishing, Transport-moving, Priv-house-serv, Protective-serv, Armed-Forces",
    "relationship": "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried",
    "race": "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black",
    "sex": "Female, Male",
    "native-country": "United-States, Cambodia, England, Puerto-Rico, Canada, Germany, Outlying-US(Guam-USVI-etc), India, Japan, Greece, South, China, Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, Vietnam, Mexico, Portugal, Ireland, France, Dominican-Republic, Laos, Ecuador, Taiwan, Haiti, Columbia, Hungary, Guatemala, Nicaragua, Scotland, Thailand, Yugoslavia, El-Salvador, Trinadad&Tobago, Peru, Hong, Holand-Netherlands",
}
CATEGORIES = {k: [c.strip() for c in v.split(",")] for k, v in CATEGORIES.items()}

# (column name, number of bins); 0 means categorical. 123 features in total.
LAYOUT = [
    ("age", 5), ("workclass", 0), ("fnlwgt", 5), ("education", 0),
    ("education-num", 5), ("marital-status", 0), ("occupation", 0),
    ("relationship", 0), ("race", 0), ("sex", 0), ("capital-gain", 2),
    ("capital-loss", 2), ("hours-per-week", 5), ("native-country", 0),
]


def read_rows(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 15:
            continue
        rows.append(fields)
    return rows


def bin_edges(values, n_bins):
    if n_bins == 2:
        return np.array([0.0])  # zero vs nonzero
    qs = np.quantile(values, np.linspace(0, 1, n_bins + 1)[1:-1])
    return np.unique(qs)


def encode(rows, edges):
    out = []
    for fields in rows:
        label = "+1" if fields[14].startswith(">50K") else "-1"
        feats = []
        offset = 0
        for col, (name, n_bins) in enumerate(LAYOUT):
            value = fields[col]
            if n_bins:
                if value != "?":
                    b = int(np.searchsorted(edges[name], float(value), side="right"))
                    feats.append(offset + min(b, n_bins - 1) + 1)
                offset += n_bins
            else:
                cats = CATEGORIES[name]
                if value in cats:
                    feats.append(offset + cats.index(value) + 1)
                offset += len(cats)
        assert offset == 123
        out.append(label + " " + " ".join(f"{f}:1" for f in feats) + "\n")
    return out


def main(raw_dir, out_dir):
    raw_dir, out_dir = Path(raw_dir), Path(out_dir)
    train = read_rows(raw_dir / "adult.data")
    test = read_rows(raw_dir / "adult.test")
    edges = {}
    for col, (name, n_bins) in enumerate(LAYOUT):
        if n_bins:
            vals = np.array([float(r[col]) for r in train if r[col] != "?"])
            edges[name] = bin_edges(vals, n_bins)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rows, name in ((train, "adult.train.gz"), (test, "adult.test.gz")):
        # mtime=0 keeps the archive byte-stable across rebuilds
        with gzip.GzipFile(out_dir / name, "wb", mtime=0) as fh:
            fh.write("".join(encode(rows, edges)).encode())
        print(f"{name}: {len(rows)} points")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
