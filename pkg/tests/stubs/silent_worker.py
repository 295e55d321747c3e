"""Stub worker: consumes the start message and exits without replying."""
import sys


def main() -> None:
    sys.stdin.readline()


if __name__ == "__main__":
    main()
