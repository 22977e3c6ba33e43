"""Write synthetic clusters to disk in the documented corpus layout."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, "src")

from prefsum.synthetic import export_cluster, synthetic_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("count", type=int)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--length-limit", type=int, default=100)
    args = parser.parse_args()
    for cluster in synthetic_corpus(args.count, args.seed, args.length_limit):
        export_cluster(cluster, args.out_dir)
        print(f"wrote {cluster.id}: {len(cluster.sentences)} sentences")
    return 0


if __name__ == "__main__":
    sys.exit(main())
