"""Exercise the command-line interface end to end.

Writes a pair of scene files plus a ground-truth extrinsic into a temp
directory, then drives the `boxcalib` subcommands the way a shell user
would: calibrate the pair, evaluate the estimate against the truth, and
run the monitor over a short frame stream. Uses cli.main(argv) directly
so the demo works without installing console scripts on PATH.
"""
import json
import tempfile
from pathlib import Path

from boxcalib import SynthConfig, cli, generate_scene_pair, random_yaw_transform
from boxcalib.io import save_extrinsic, save_scene

import numpy as np


def run(argv):
    print(f"\n$ boxcalib {' '.join(argv)}")
    code = cli.main(argv)
    print(f"[exit {code}]")


def main():
    rng = np.random.default_rng(3)
    t_true = random_yaw_transform(rng)
    ego, coop, _ = generate_scene_pair(
        SynthConfig(n_boxes=12, visibility=0.8, seed=3, coop_transform=t_true)
    )

    with tempfile.TemporaryDirectory() as td:
        work = Path(td)
        save_scene(ego, work / "ego.json")
        save_scene(coop, work / "coop.json")
        save_extrinsic(t_true, work / "gt.json")

        run(["calibrate", str(work / "ego.json"), str(work / "coop.json"),
             "--out", str(work / "estimate.json")])

        manifest = [{"ego": "ego.json", "coop": "coop.json", "gt": "gt.json"}]
        (work / "manifest.json").write_text(json.dumps(manifest))
        run(["eval", str(work / "manifest.json"), "--lambda", "1.0"])

        stream = work / "stream"
        stream.mkdir()
        for i in range(4):
            save_scene(ego, stream / f"{i:02d}.ego.json")
            save_scene(coop, stream / f"{i:02d}.coop.json")
        run(["monitor", str(stream), "--out", str(work / "mon")])

        print("\nmonitor events written to events.jsonl:")
        for line in (work / "mon" / "events.jsonl").read_text().splitlines():
            e = json.loads(line)
            print(f"  frame {e['frame_id']}: {e['kind']}")


if __name__ == "__main__":
    main()
