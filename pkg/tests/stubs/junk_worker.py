"""Stub worker: writes a line that is not JSON."""
import sys


def main() -> None:
    sys.stdin.readline()
    sys.stdout.write("this is not a protocol message\n")
    sys.stdout.flush()


if __name__ == "__main__":
    main()
