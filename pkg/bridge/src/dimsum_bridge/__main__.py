"""Console entry: serve one reference adapter over stdin/stdout."""

import argparse
import sys

from .adapters import ADAPTERS
from .server import BridgeServer


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dimsum-bridge",
        description="serve a reference imputer over line-delimited JSON stdio",
    )
    parser.add_argument(
        "--imputer",
        choices=sorted(ADAPTERS),
        default="linear",
        help="which reference adapter to serve",
    )
    args = parser.parse_args(argv)
    return BridgeServer(ADAPTERS[args.imputer]()).serve()


if __name__ == "__main__":
    sys.exit(main())
