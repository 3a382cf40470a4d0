"""Scripted generator speaking the line protocol. Usage: fake_generator.py MODE"""
import json
import os
import sys
import time

mode = sys.argv[1] if len(sys.argv) > 1 else "normal"


def emit(obj):
    try:
        sys.stdout.write(json.dumps(obj) + "\n")
        sys.stdout.flush()
    except BrokenPipeError:
        # the harness hung up on us
        os._exit(0)


for served, line in enumerate(sys.stdin):
    if not line.strip():
        continue
    req = json.loads(line)
    pid, n = req["pair_id"], req["n_samples"]
    if mode == "crash" and served >= 1:
        sys.exit(3)
    if mode == "malformed":
        sys.stdout.write("{not json\n")
        sys.stdout.flush()
        continue
    if mode == "slow":
        time.sleep(30)
    if mode == "wrongid":
        emit({"type": "done", "pair_id": pid + "x"})
        continue
    if mode == "error" and served % 2 == 1:
        emit({"type": "error", "pair_id": pid, "message": "model unavailable"})
        continue
    count = n - 1 if mode == "short" else n
    # reversed order exercises reassembly by sample_index
    for i in reversed(range(count)):
        emit({"type": "candidate", "pair_id": pid, "sample_index": i,
              "source": req["wrong"] + ("" if i == 0 else f"# sample {i}\n")})
    emit({"type": "done", "pair_id": pid})
