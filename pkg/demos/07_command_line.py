"""The same pipeline from the command line (python3 -m mccaspeech ...).

Writes a small synthetic dataset, runs a cross-validated experiment and a
chunk sweep, and shows the files produced. The dataset is small, so its
class templates are set further apart than the default to keep the cue
learnable. Everything goes to a temporary directory.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    cmd = [sys.executable, "-m", "mccaspeech", *args]
    print("$", "mccaspeech", " ".join(args))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    print(proc.stdout + proc.stderr, end="")
    print(f"(exit {proc.returncode})\n")
    return proc.returncode


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "synth.json").write_text(json.dumps({"n_speakers_per_class": 10, "segments_per_speaker": 6,
                                                      "template_distance": 1.0}))
    (tmp / "pipeline.json").write_text(json.dumps({"chunks": 8, "components": 5, "seeds": [0, 1, 2]}))

    run("synth", "--config", str(tmp / "synth.json"), "--output-dir", str(tmp / "data"))
    manifest = str(tmp / "data" / "manifest.csv")
    run("experiment", "--manifest", manifest, "--config", str(tmp / "pipeline.json"),
        "--output-dir", str(tmp / "exp"))
    print((tmp / "exp" / "report.csv").read_text())
    run("sweep", "--manifest", manifest, "--config", str(tmp / "pipeline.json"),
        "--chunks", "4,8,12", "--components", "5", "--output-dir", str(tmp / "sweep"))
    # a usage error: zero chunks
    run("reduce", str(tmp / "data" / "nt000_000.fmx"), "--chunks", "0", "--output-dir", str(tmp))
