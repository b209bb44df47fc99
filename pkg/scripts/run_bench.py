#!/usr/bin/env python3
"""Full-scale paired benchmark: 250 devices, 20 servers, 10 runs.

    python scripts/run_bench.py --checkpoint results/acceptance/checkpoint.json

Without a checkpoint only PSO and APSO are compared. Extra arguments are
passed through to ``mec-swarm bench``.
"""

import sys

from mec_swarm.harness.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:]
    methods = "pso,apso,apsosac" if "--checkpoint" in argv else "pso,apso"
    defaults = ["--devices", "250", "--servers", "20", "--runs", "10", "--seed", "42",
                "--methods", methods, "--out", "results/bench"]
    sys.exit(main(["bench", *defaults, *argv]))
