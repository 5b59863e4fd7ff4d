"""Build the extension module and exercise it end to end.

Usage: python python/smoke_test.py [--no-build]

Builds `transit-py` with cargo (release), loads the resulting shared library
as `transit_design` and runs a short design/train/evaluate round trip. If the
module is already importable (e.g. installed with maturin) pass --no-build.
"""

import importlib.util
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_and_load():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "transit-py"], cwd=ROOT, check=True
    )
    lib = ROOT / "target" / "release" / "libtransit_design.so"
    if not lib.exists():  # macOS
        lib = lib.with_suffix(".dylib")
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "transit_design.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("transit_design", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    if "--no-build" in sys.argv:
        import transit_design as td
    else:
        td = build_and_load()

    net = td.Network.grid(3, 4, demand_pairs=30, seed=7)
    assert net.node_count == 12, net
    round_trip = td.Network.from_json(net.to_json())
    assert round_trip.edge_count == net.edge_count

    env = td.Env(net, routes=2, max_len=4, alpha=1.0, horizon=3600, shaping=True)
    state = env.reset()
    done, steps, terminal = False, 0, None
    while not done:
        state, done, shaping, terminal = env.step(state, state.candidates[0])
        assert shaping is not None and math.isfinite(shaping)
        steps += 1
    assert terminal is not None and math.isfinite(terminal["reward"])
    again = env.evaluate(state.completed, seed=0)
    assert again["reward"] == terminal["reward"]

    p = td.masked_policy([1.0, 2.0, 3.0], [True, False, True])
    assert p[1] == 0.0 and abs(sum(p) - 1.0) < 1e-12

    est = td.estimate_search_space(143, 243)
    assert abs(est["total_log10"] - 81.5) < 0.05

    for method in ["random", "demand-cover", "shortest-path"]:
        d = env.design(method, seed=1)
        assert len(d["routes"]) == 2
    mcts = env.design("pure-mcts", seed=1, iterations=10)
    assert math.isfinite(mcts["evaluation"]["reward"])
    ga = env.design("ga", seed=1, ga={"population": 8, "elitism": 1, "generations": 2})
    assert len(ga["design"]["routes"]) == 2

    small = {
        "net": {"hidden": 8, "widths": [8, 6], "heads": [2, 2], "actor": [8], "critic": [8]},
        "train_steps_per_iter": 2,
        "batch_size": 8,
        "workers": 2,
        "search": {"iterations": 8},
    }
    ckpt = env.train(20, seed=3, config=small)
    assert json.loads(ckpt)["format"] == "transit-design-checkpoint"
    learned = env.design("alphatransit", seed=0, iterations=8, checkpoint=ckpt)
    assert len(learned["routes"]) == 2

    try:
        env.design("alphatransit")
    except ValueError as e:
        assert "checkpoint" in str(e)
    else:
        raise AssertionError("missing checkpoint accepted")

    print("smoke test passed:", td.__version__, "reward", round(learned["evaluation"]["reward"], 4))


if __name__ == "__main__":
    main()
