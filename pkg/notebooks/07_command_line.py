"""
Driving the command line
========================

Generate a witness file, analyse it and run the verification oracle.
"""

# %%
import json
import pathlib
import tempfile

from rank3id.cli import main

tmp = pathlib.Path(tempfile.mkdtemp())
main(["generate", "x11", "--shape", "2x2x2x2x2", "--seed", "7", "--out", str(tmp / "x11.json")])
print(json.loads((tmp / "x11.json").read_text())["ground_truth"]["label"])

# %%
code = main(["analyze", str(tmp / "x11.json"), "--dim"])
print("exit code", code)

# %%
code = main(["verify", str(tmp / "x11.json"), "--samples", "5"])
print("exit code", code)
