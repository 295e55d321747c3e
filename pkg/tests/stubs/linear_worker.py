"""Stub worker: objectives are a deterministic function of the config.

error = x (clamped to [0,1]) and rank_disparity = 1 - x at the final
fidelity; progress values carry a 1/fidelity optimism bias. `x` is read
from config["x"] when numeric, else derived from a hash of the config.
"""
import json
import sys


def main() -> None:
    start = json.loads(sys.stdin.readline())
    trial_id = start["trial_id"]
    fidelity = int(start["fidelity"])
    config = start["config"]
    raw = config.get("x")
    if isinstance(raw, (int, float)):
        x = float(raw)
    else:
        x = (hash(json.dumps(config, sort_keys=True)) % 1000) / 1000.0
    x = min(1.0, max(0.0, x))
    for f in range(25, fidelity, 25):
        line = {"type": "progress", "trial_id": trial_id, "fidelity": f,
                "objectives": {"error": x + 1.0 / f, "rank_disparity": 1.0 - x}}
        print(json.dumps(line), flush=True)
    final = {"type": "final", "trial_id": trial_id, "fidelity": fidelity,
             "objectives": {"error": x, "rank_disparity": 1.0 - x}}
    print(json.dumps(final), flush=True)


if __name__ == "__main__":
    main()
