#!/usr/bin/env python3
"""Fetch the MovieLens 100K ratings file into data/ml-100k/u.data.

Tries the GroupLens archive first. When that host is unreachable, falls back
to the copy bundled in the RecBole wheel on PyPI (same 100,000 rows, same
order, with a header line that is stripped here).
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
RECBOLE_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def from_grouplens() -> bytes:
    with urllib.request.urlopen(GROUPLENS_URL, timeout=30) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    return archive.read("ml-100k/u.data")


def from_recbole_wheel() -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "recbole==1.2.1",
             "--no-deps", "-d", tmp, "-q"],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        text = zipfile.ZipFile(wheel).read(RECBOLE_MEMBER).decode()
    lines = text.splitlines()[1:]  # drop "user_id:token\t..." header
    return ("\n".join(lines) + "\n").encode()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve()
                                              .parent.parent / "data" / "ml-100k"))
    args = parser.parse_args()
    out_dir = pathlib.Path(args.out)
    target = out_dir / "u.data"
    if target.exists():
        print(f"{target} already present")
        return 0
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        payload = from_grouplens()
        source = "grouplens"
    except Exception as err:  # noqa: BLE001
        print(f"grouplens unavailable ({err}); using the RecBole wheel copy")
        payload = from_recbole_wheel()
        source = "recbole wheel"
    target.write_bytes(payload)
    rows = payload.count(b"\n")
    print(f"wrote {target} ({rows} rows, from {source})")
    return 0 if rows == 100000 else 1


if __name__ == "__main__":
    sys.exit(main())
