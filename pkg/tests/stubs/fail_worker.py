"""Stub worker: always reports failure."""
import json
import sys


def main() -> None:
    start = json.loads(sys.stdin.readline())
    print(json.dumps({"type": "fail", "trial_id": start["trial_id"],
                      "message": "synthetic training crash"}), flush=True)


if __name__ == "__main__":
    main()
