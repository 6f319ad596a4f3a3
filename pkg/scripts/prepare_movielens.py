"""Download Movielens 100K and write link-prediction input files.

The rating graph is treated as a bipartite link set: every rated
(user, movie) pair is a positive link, and each node is described by
its one-hot identity.  The script writes three files to --out:

    a.svm      one svmlight row per user (one-hot)
    b.svm      one svmlight row per movie (one-hot)
    pairs.txt  one '<user> <movie>' line per rated pair (0-based)

These feed ``hofm link --a a.svm --b b.svm --pairs pairs.txt`` and the
optional network-dependent benchmark in the acceptance tests:

    python scripts/prepare_movielens.py --out data/ml-100k
    HOFM_MOVIELENS=data/ml-100k pytest tests/test_acceptance.py -k link -s

Needs network access for the ~5 MB archive (grouplens.org); pass
--archive to reuse a previously downloaded ml-100k.zip instead.
"""

import argparse
import io
import urllib.request
import zipfile
from pathlib import Path

URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def _read_ratings(archive_bytes):
    with zipfile.ZipFile(io.BytesIO(archive_bytes)) as zf:
        raw = zf.read("ml-100k/u.data").decode("ascii")
    pairs = set()
    for line in raw.splitlines():
        if not line.strip():
            continue
        user, item, _rating, _ts = line.split("\t")
        pairs.add((int(user) - 1, int(item) - 1))  # file ids are 1-based
    return sorted(pairs)


def _write_onehot(path, count):
    with open(path, "w") as fh:
        for i in range(count):
            fh.write("0 %d:1\n" % (i + 1))  # svmlight indices are 1-based


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--archive", default=None,
                    help="local ml-100k.zip to use instead of downloading")
    args = ap.parse_args()

    if args.archive:
        blob = Path(args.archive).read_bytes()
    else:
        print("downloading %s ..." % URL)
        with urllib.request.urlopen(URL) as resp:
            blob = resp.read()

    pairs = _read_ratings(blob)
    n_users = max(u for u, _ in pairs) + 1
    n_items = max(i for _, i in pairs) + 1

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_onehot(out / "a.svm", n_users)
    _write_onehot(out / "b.svm", n_items)
    with open(out / "pairs.txt", "w") as fh:
        for u, i in pairs:
            fh.write("%d %d\n" % (u, i))

    print("wrote %s: %d users, %d movies, %d positive pairs"
          % (out, n_users, n_items, len(pairs)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
