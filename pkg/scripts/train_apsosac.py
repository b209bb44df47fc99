#!/usr/bin/env python3
"""Train the APSO-SAC controller with the acceptance-suite settings.

    python scripts/train_apsosac.py --out results/acceptance [--steps 100000]

The output directory can be passed to the acceptance tests through
MEC_SWARM_ACCEPTANCE_DIR to reuse the checkpoint.
"""

import argparse
import time

from mec_swarm import controller
from mec_swarm.env import EnvConfig
from mec_swarm.sac import SacParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/acceptance")
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hidden", default="64,64")
    ap.add_argument("--resume", action="store_true")
    args = ap.parse_args()

    cfg = controller.TrainConfig(
        master_seed=args.seed,
        total_steps=args.steps,
        env=EnvConfig(n_devices=250, n_servers=20),
        sac=SacParams(hidden=tuple(int(h) for h in args.hidden.split(","))),
        eval_every=100,
        checkpoint_every=200,
        checkpoint_path=f"{args.out}/checkpoint.json",
        log_path=f"{args.out}/train_log.jsonl",
    )
    t0 = time.perf_counter()
    res = controller.train(cfg, resume=args.resume)
    for rec in res.log:
        if rec["type"] == "eval":
            print(f"episode {rec['episode']:5d}  steps {rec['steps']:7d}  eval return {rec['eval_return_mean']:.4f}")
    print(f"{res.env_steps} steps in {time.perf_counter() - t0:.0f}s -> {cfg.checkpoint_path}")


if __name__ == "__main__":
    main()
