"""Command-line entry point: ``mec-swarm <subcommand> [--config FILE] [flags]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .. import controller, pso
from ..cost import brute_force_optimum, Weights
from ..env import EnvConfig, generate_environment, save_environment
from ..errors import MecSwarmError
from ..sac import SacParams
from .config import ExperimentConfig, default_seed, load_config_file
from .experiment import run_experiment
from .report import emit_report

log = logging.getLogger("mec_swarm")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in _csv_list(text)]


def _common(p: argparse.ArgumentParser) -> None:
    # Defaults are None so config-file values survive unless a flag is given.
    p.add_argument("--config", help="JSON file with flag values (flags override it)")
    p.add_argument("--devices", type=int)
    p.add_argument("--servers", type=int)
    p.add_argument("--seed", type=int, help="master seed (default: $MEC_SWARM_SEED or 42)")
    p.add_argument("--env-seed", type=int, help="environment seed (default: master seed)")
    p.add_argument("--m", type=float, help="cost weight")
    p.add_argument("--n", type=float, help="latency weight")
    p.add_argument("--mode", choices=["penalty", "paper_literal"])
    p.add_argument("--penalty", type=float)
    p.add_argument("--mbit-per-mbyte", type=float, help="8 converts MB to Mb; 1 divides MB by Mbps as-is")


def _pso_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--particles", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--w", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--v-max", type=float)
    p.add_argument("--scalar-draws", action="store_true", default=None)


def _out(p: argparse.ArgumentParser, default: str) -> None:
    p.add_argument("--out", help=f"output directory or file (default: {default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mec-swarm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-env", help="generate and save an environment")
    _common(p)
    _out(p, "env.json")

    p = sub.add_parser("run", help="run one optimizer")
    _common(p)
    _pso_flags(p)
    p.add_argument("--method", choices=["pso", "apso", "apsosac"])
    p.add_argument("--runs", type=int)
    p.add_argument("--checkpoint")
    p.add_argument("--els", action="store_true", default=None)
    _out(p, "results/run")

    p = sub.add_parser("bench", help="paired comparison of several optimizers")
    _common(p)
    _pso_flags(p)
    p.add_argument("--methods", type=_csv_list)
    p.add_argument("--runs", type=int)
    p.add_argument("--checkpoint")
    p.add_argument("--els", action="store_true", default=None)
    p.add_argument("--resample-env", action="store_true", default=None)
    _out(p, "results/bench")

    p = sub.add_parser("train", help="train the APSO-SAC controller")
    _common(p)
    _pso_flags(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--hidden", type=_int_list, help="hidden layer sizes, e.g. 64,64")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--auto-alpha", action="store_true", default=None)
    p.add_argument("--control-inertia", action="store_true", default=None)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--checkpoint", help="checkpoint path (default: <out>/checkpoint.json)")
    p.add_argument("--resume", action="store_true", default=None)
    _out(p, "results/train")

    p = sub.add_parser("evaluate", help="compare a trained controller against PSO and APSO")
    _common(p)
    _pso_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--env-seeds", type=_int_list)
    p.add_argument("--runs", type=int)
    _out(p, "results/evaluate")

    p = sub.add_parser("oracle", help="exhaustive optimum for a small instance")
    _common(p)
    p.add_argument("--cap", type=int)
    _out(p, "-")
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    values = load_config_file(getattr(args, "config", None))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            values[k] = v
    return values


def _env_config(v: dict) -> EnvConfig:
    master = int(v.get("seed", default_seed()))
    return EnvConfig(
        n_devices=int(v.get("devices", 250)),
        n_servers=int(v.get("servers", 20)),
        seed=int(v.get("env_seed", master)),
    )


def _weights(v: dict) -> Weights:
    return Weights(m=float(v.get("m", 10.0)), n=float(v.get("n", 1e-2)))


def _pso_params(v: dict) -> pso.PsoParams:
    base = pso.PsoParams()
    return pso.PsoParams(
        w=float(v.get("w", base.w)),
        c1=float(v.get("c1", base.c1)),
        c2=float(v.get("c2", base.c2)),
        n_particles=int(v.get("particles", base.n_particles)),
        max_iters=int(v.get("max_iters", base.max_iters)),
        v_max=v.get("v_max"),
        scalar_draws=bool(v.get("scalar_draws", False)),
    )


def _experiment(v: dict, methods, default_out: str, env_seeds=()) -> ExperimentConfig:
    return ExperimentConfig(
        env=_env_config(v),
        env_seeds=tuple(env_seeds),
        methods=tuple(methods),
        weights=_weights(v),
        mode=v.get("mode", "penalty"),
        penalty=float(v.get("penalty", 1e3)),
        mbit_per_mbyte=float(v.get("mbit_per_mbyte", 8.0)),
        runs=int(v.get("runs", 10)),
        master_seed=int(v.get("seed", default_seed())),
        resample_env=bool(v.get("resample_env", False)),
        pso=_pso_params(v),
        apso_els=bool(v.get("els", False)),
        checkpoint=v.get("checkpoint"),
        out_dir=v.get("out", default_out),
    )


def _report(cfg: ExperimentConfig) -> int:
    report = run_experiment(cfg)
    emit_report(report, cfg.out_dir)
    for m in cfg.methods:
        s = report.summary[m]
        imp = s["improvement_vs_pso_pct"]
        extra = f"  vs pso {imp:+.2f}%" if imp is not None else ""
        print(f"{m:8s} mean best cost {s['mean_best_cost']:.4f}  std {s['std_best_cost']:.4f}{extra}")
    print(f"wrote {cfg.out_dir}")
    return 0


def cmd_gen_env(v: dict) -> int:
    env = generate_environment(_env_config(v))
    out = v.get("out", "env.json")
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_environment(env, out)
    print(f"wrote {out} ({env.n_devices} devices, {env.n_servers} servers)")
    return 0


def cmd_run(v: dict) -> int:
    method = v.get("method", "pso")
    v.setdefault("runs", 1)
    return _report(_experiment(v, [method], "results/run"))


def cmd_bench(v: dict) -> int:
    methods = v.get("methods", ["pso", "apso", "apsosac"])
    if isinstance(methods, str):
        methods = _csv_list(methods)
    return _report(_experiment(v, methods, "results/bench"))


def cmd_evaluate(v: dict) -> int:
    seeds = v.get("env_seeds") or [int(v.get("env_seed", v.get("seed", default_seed())))]
    if isinstance(seeds, str):
        seeds = _int_list(seeds)
    return _report(_experiment(v, ["pso", "apso", "apsosac"], "results/evaluate", env_seeds=seeds))


def train_config_from(v: dict) -> controller.TrainConfig:
    out = v.get("out", "results/train")
    base = SacParams()
    sac = SacParams(
        hidden=tuple(v.get("hidden", base.hidden)),
        batch_size=int(v.get("batch_size", base.batch_size)),
        warmup_steps=int(v.get("warmup", base.warmup_steps)),
        alpha=float(v.get("alpha", base.alpha)),
        auto_alpha=bool(v.get("auto_alpha", False)),
        total_train_steps=int(v.get("steps", base.total_train_steps)),
    )
    ctrl = controller.ControllerParams(pso=_pso_params(v), control_inertia=bool(v.get("control_inertia", False)))
    return controller.TrainConfig(
        master_seed=int(v.get("seed", default_seed())),
        total_steps=sac.total_train_steps,
        env=_env_config(v),
        controller=ctrl,
        sac=sac,
        weights=_weights(v),
        eval_every=int(v.get("eval_every", 50)),
        checkpoint_every=int(v.get("checkpoint_every", 200)),
        checkpoint_path=v.get("checkpoint") or os.path.join(out, "checkpoint.json"),
        log_path=os.path.join(out, "train_log.jsonl"),
    )


def cmd_train(v: dict) -> int:
    cfg = train_config_from(v)
    result = controller.train(cfg, resume=bool(v.get("resume", False)))
    evals = [r for r in result.log if r["type"] == "eval"]
    if evals:
        print(f"last eval return {evals[-1]['eval_return_mean']:.4f}")
    print(f"trained {result.env_steps} steps over {result.episodes} episodes; checkpoint {cfg.checkpoint_path}")
    return 0


def cmd_oracle(v: dict) -> int:
    cfg = _env_config(v)
    env = generate_environment(cfg)
    from ..cost import Penalty, PaperLiteral, DEFAULT_ORACLE_CAP

    mode = Penalty(float(v.get("penalty", 1e3))) if v.get("mode", "penalty") == "penalty" else PaperLiteral()
    assignment, cost = brute_force_optimum(
        env, _weights(v), mode,
        cap=int(v.get("cap", DEFAULT_ORACLE_CAP)),
        mbit_per_mbyte=float(v.get("mbit_per_mbyte", 8.0)),
    )
    text = json.dumps({
        "env": cfg.to_dict(),
        "enumerated": env.n_servers**env.n_devices,
        "assignment": list(assignment.server_of),
        "cost": cost,
    }, indent=2, sort_keys=True) + "\n"
    out = v.get("out", "-")
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        print(f"wrote {out}")
    return 0


COMMANDS = {
    "gen-env": cmd_gen_env,
    "run": cmd_run,
    "bench": cmd_bench,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "oracle": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return COMMANDS[args.command](_resolve(args))
    except (CliError, MecSwarmError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"mec-swarm: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
