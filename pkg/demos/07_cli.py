"""
Command line and trace files
============================

The same pipeline is available from the shell. Traces are JSON lines: a
header, one record per stored frame and a trailer with the outcome.
"""

import json
import subprocess
import sys
from importlib import resources

from unlock.io import read_trace

DATA = resources.files("unlock") / "data"


def unlock(*args):
    r = subprocess.run([sys.executable, "-m", "unlock", *args], capture_output=True, text=True)
    print("$ unlock", " ".join(a.rsplit("/", 1)[-1] for a in args), " -> exit", r.returncode)
    return r


r = unlock("analyze", "--input", str(DATA / "braced_square.json"))
print(json.dumps(json.loads(r.stdout)["verdict"]))

r = unlock("unfold", "--input", str(DATA / "l_chain.json"), "--method", "cdr")
tf = read_trace(r.stdout)
print("frames:", len(tf.frames), " complete:", tf.complete, " outcome:", tf.trailer["outcome"])

r = unlock("unfold", "--input", str(DATA / "spiral.json"), "--max-steps", "3")
print(r.stderr.strip().splitlines()[-1])

r = unlock("unfold", "--input", str(DATA / "self_crossing.json"))
print(r.stderr.strip())
