"""The command-line workflow, driven from Python with the same argv the shell takes.

Run: python3 demos/07_cli.py   (equivalent shell commands are printed)
"""
import tempfile
from pathlib import Path

from pushframe.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    common = ["--n", "64", "--seed", "2", "--set", "optics.illumination=column-ramp",
              "--set", "optics.read_noise=1e-3", "--set", f"run.output={out}"]
    steps = [
        ["pattern", *common],
        ["simulate", *common, "--width", "80"],
        ["calibrate", *common],
        ["reconstruct", *common, "--stream", str(out / "stream.csv"),
         "--pattern", str(out / "pattern.txt"), "--calib", str(out / "calib.txt"),
         "--mode", "flatfield"],
        ["sweep", *common, "--width", "80", "--mode", "flatfield", "--param", "step_error",
         "--values", "0,0.002,0.01"],
    ]
    for argv in steps:
        print("$ pushframe", " ".join(argv))
        code = main(argv)
        print("exit", code)
    print(open(out / "sweep.csv").read())
    print(sorted(p.name for p in out.iterdir()))
