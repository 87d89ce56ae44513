#!/usr/bin/env python3
"""Download the Energy, Kin8nm and CCPP regression tables into data/*.csv.

Needs network access, pandas and openpyxl (the UCI archives ship Excel files).
"""

import argparse
import io
import pathlib
import urllib.request
import zipfile

import pandas as pd

SOURCES = {
    "energy": "https://archive.ics.uci.edu/static/public/242/energy+efficiency.zip",
    "ccpp": "https://archive.ics.uci.edu/static/public/294/combined+cycle+power+plant.zip",
    "kin8nm": "https://www.openml.org/data/get_csv/3626/dataset_2175_kin8nm.csv",
}

EXPECTED_ROWS = {"energy": 768, "kin8nm": 8192, "ccpp": 9568}


def fetch(url):
    with urllib.request.urlopen(url, timeout=60) as r:
        return r.read()


def excel_from_zip(blob, suffix=".xlsx"):
    with zipfile.ZipFile(io.BytesIO(blob)) as z:
        name = next(n for n in z.namelist() if n.endswith(suffix))
        return pd.read_excel(io.BytesIO(z.read(name)))


def load(name):
    blob = fetch(SOURCES[name])
    if name == "energy":
        df = excel_from_zip(blob)
        df = df.dropna(how="all").dropna(axis=1, how="all")
        return df[[f"X{i}" for i in range(1, 9)] + ["Y1", "Y2"]]
    if name == "ccpp":
        # The workbook holds five shuffles of the same rows; the first sheet suffices.
        return excel_from_zip(blob)[["AT", "V", "AP", "RH", "PE"]]
    return pd.read_csv(io.BytesIO(blob))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=pathlib.Path(__file__).resolve().parent.parent / "data", type=pathlib.Path)
    ap.add_argument("datasets", nargs="*", default=list(SOURCES))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.datasets:
        df = load(name)
        if len(df) != EXPECTED_ROWS[name]:
            raise SystemExit(f"{name}: expected {EXPECTED_ROWS[name]} rows, got {len(df)}")
        path = args.out / f"{name}.csv"
        df.to_csv(path, index=False)
        print(f"wrote {path} ({len(df)} rows)")


if __name__ == "__main__":
    main()
