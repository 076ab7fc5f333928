#!/usr/bin/env python3
"""Populate data/ with the six benchmark files named in data/manifest.toml.

Each file is downloaded from its public source when the network allows.
Offline, two local fallbacks are tried:

  housing   the Boston CSV bundled with scikit-learn < 1.2
            (pass the installed package dir or a wheel via --sklearn)
  redwine   the red wine CSV bundled with the linfa-datasets crate in the
            cargo registry ($CARGO_HOME or ~/.cargo)

Files that cannot be obtained are reported and skipped.
"""
import argparse
import glob
import gzip
import io
import os
import sys
import urllib.request
import zipfile

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
SOURCES = {
    "housing.data": f"{UCI}/housing/housing.data",
    "yacht_hydrodynamics.data": f"{UCI}/00243/yacht_hydrodynamics.data",
    "winequality-red.csv": f"{UCI}/wine-quality/winequality-red.csv",
    "winequality-white.csv": f"{UCI}/wine-quality/winequality-white.csv",
    "PM10.dat": "http://lib.stat.cmu.edu/datasets/PM10.dat",
}


def download(url):
    try:
        with urllib.request.urlopen(url, timeout=20) as r:
            return r.read()
    except Exception as e:  # noqa: BLE001
        print(f"  download failed: {e}", file=sys.stderr)
        return None


def housing_from_sklearn(path):
    name = "sklearn/datasets/data/boston_house_prices.csv"
    if path and path.endswith(".whl"):
        text = zipfile.ZipFile(path).read(name).decode()
    else:
        roots = [path] if path else []
        try:
            import sklearn

            roots.append(os.path.dirname(os.path.dirname(sklearn.__file__)))
        except ImportError:
            pass
        for root in roots:
            for cand in (os.path.join(root, name), os.path.join(root, "datasets/data/boston_house_prices.csv")):
                if os.path.exists(cand):
                    text = open(cand).read()
                    break
            else:
                continue
            break
        else:
            return None
    # line 1: counts, line 2: header, then 506 comma-separated rows
    rows = text.strip().splitlines()[2:]
    return ("\n".join(" ".join(r.split(",")) for r in rows) + "\n").encode()


def redwine_from_cargo():
    home = os.environ.get("CARGO_HOME", os.path.expanduser("~/.cargo"))
    hits = sorted(glob.glob(f"{home}/registry/src/*/linfa-datasets-*/data/winequality-red.csv.gz"))
    if not hits:
        return None
    text = gzip.open(hits[-1]).read().decode()
    return text.replace(",", ";").encode()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dir", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    ap.add_argument("--sklearn", help="scikit-learn<1.2 wheel or site-packages dir")
    ap.add_argument("--offline", action="store_true")
    args = ap.parse_args()

    fallbacks = {
        "housing.data": lambda: housing_from_sklearn(args.sklearn),
        "winequality-red.csv": redwine_from_cargo,
    }
    missing = []
    for fname in ["housing.data", "concrete.csv", "yacht_hydrodynamics.data", "PM10.dat",
                  "winequality-red.csv", "winequality-white.csv"]:
        dest = os.path.join(args.dir, fname)
        if os.path.exists(dest):
            print(f"{fname}: present")
            continue
        data = None
        if not args.offline and fname in SOURCES:
            data = download(SOURCES[fname])
        if data is None and fname in fallbacks:
            data = fallbacks[fname]()
        if data is None:
            missing.append(fname)
            print(f"{fname}: unavailable")
            continue
        with open(dest, "wb") as f:
            f.write(data)
        print(f"{fname}: written")
    if "concrete.csv" in missing:
        print("concrete: export Concrete_Data.xls from UCI to CSV (header row, strength last)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
