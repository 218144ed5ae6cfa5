# 文件路径: mecco/main.py
"""命令行入口

    mecco train    --config cfg.txt --out runs/adrlo
    mecco eval     --model runs/adrlo/model.json --policy ADRLO --seeds-per-point 50
    mecco sweep    --preset fig8a --shared-model --out runs/fig8a.csv
    mecco oracle   --config cfg.txt
    mecco pipeline --model runs/adrlo/model.json --unregistered 3
    mecco chain    init|register|request|audit --ledger runs/ledger.bin

退出码：0 成功，2 配置错误，3 准入错误，4 训练失败，1 其他领域错误。
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from loguru import logger

from .core.config import get_settings
from .core.errors import MeccoError
from .core.scenario import ExperimentConfig, load_config
from .features.agent.network import QNetworkParams
from .features.agent.service import TrainResult, train
from .features.agent.storage import load_model, save_model
from .features.chain.contract import AccessManager, penalty_counts, rebuild_policy_table
from .features.chain.crypto import digest
from .features.chain.ledger import Ledger, verify_chain
from .features.chain.service import build_offload_tx, new_account
from .features.chain.storage import append_blocks, load_ledger, save_ledger
from .features.env.service import OffloadingEnv
from .features.policies.models import PolicyName
from .features.policies.oracle import brute_force_oracle
from .features.policies.service import build_policy, evaluate_policy
from .harness.pipeline import run_pipeline
from .harness.reporting import provenance_header, report_frame, write_csv
from .harness.sweep import PRESETS, preset_spec, run_sweep


# --- 1. 日志 ---
def setup_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format="{time:HH:mm:ss} | {level: <8} | {message}")


# --- 2. 公共参数 ---
def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="实验配置文件 (key = value)")
    parser.add_argument("--seed", type=int, help="覆盖配置中的 seed")
    parser.add_argument("--out", type=Path, help="输出路径")


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _out(args: argparse.Namespace, default: str) -> Path:
    return args.out or get_settings().output_dir / default


def _train_variant(cfg: ExperimentConfig, policy: PolicyName) -> TrainResult:
    # DRLO：单头网络 + vanilla 目标
    dueling = policy is not PolicyName.DRLO
    env = OffloadingEnv(cfg.scenario, cfg.levels_f, cfg.levels_w)
    return train(env, cfg.agent, seed=cfg.seed, dueling=dueling, double=dueling)


def _maybe_model(path: Path | None) -> QNetworkParams | None:
    if path is None:
        return None
    params, _ = load_model(path)
    return params


# --- 3. 子命令 ---
def cmd_train(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    policy = PolicyName(args.policy)
    out = _out(args, policy.value.lower())
    result = _train_variant(cfg, policy)
    save_model(
        result.params,
        out / "model.json",
        metadata={"policy": policy.value, "seed": cfg.seed, **cfg.agent.model_dump()},
    )
    write_csv(result.trace, out / "trace.csv", provenance_header(cfg, [cfg.seed], policy=policy.value))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    policy = build_policy(args.policy, _maybe_model(args.model))
    seeds = [cfg.seed + k for k in range(args.seeds_per_point)]
    if args.trajectory:
        args.trajectory.parent.mkdir(parents=True, exist_ok=True)
        with args.trajectory.open("w", encoding="utf-8") as trajectory:
            report = evaluate_policy(policy, cfg.scenario, seeds, cfg.levels_f, cfg.levels_w, trajectory)
    else:
        report = evaluate_policy(policy, cfg.scenario, seeds, cfg.levels_f, cfg.levels_w)
    write_csv(report_frame(report), _out(args, f"eval-{policy.name}.csv"), provenance_header(cfg, seeds))
    print(f"{policy.name}: mean total cost {report.mean_total_cost:.6g} over {report.seed_count} seeds")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    spec = preset_spec(
        args.preset,
        seeds_per_point=args.seeds_per_point,
        shared_model=args.shared_model,
        output=_out(args, f"{args.preset}.csv"),
    )
    run_sweep(cfg, spec, workers=get_settings().workers)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    result = brute_force_oracle(cfg.scenario, cfg.levels_f, cfg.levels_w)
    print(f"optimal cost {result.cost!r}")
    print(f"actions {','.join(str(a) for a in result.actions)}")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    params = _maybe_model(args.model)
    if params is None and PolicyName(args.policy).learned:
        logger.info("🧠 [pipeline] no --model given, training inline")
        params = _train_variant(cfg, PolicyName(args.policy)).params
    policy = build_policy(args.policy, params)
    out = _out(args, "pipeline")
    run = run_pipeline(cfg, cfg.seed, policy, unregistered=set(args.unregistered))
    save_ledger(run.ledger, out / "ledger.bin")
    write_csv(run.offloading, out / "offloading.csv", provenance_header(cfg, [cfg.seed]))
    print(f"authorized {len(run.authorized)}/{len(run.verdicts)}, denied {list(run.denied)}")
    print(f"total cost {run.total_cost:.6g}, chain valid: {run.chain_valid}")
    return 0


def _open_ledger(cfg: ExperimentConfig, path: Path) -> Ledger:
    ledger = load_ledger(path)
    ledger.attach_sealers(cfg.chain)
    return ledger


def _manager(cfg: ExperimentConfig, ledger: Ledger) -> AccessManager:
    admin = new_account(cfg.chain.admin_seed, role="admin")
    return AccessManager(admin, ledger, rebuild_policy_table(ledger, admin.public_key))


def _commit(ledger: Ledger, path: Path) -> None:
    block = ledger.mine()
    if block is not None:
        append_blocks(path, [block])


def cmd_chain(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    path: Path = args.ledger or get_settings().output_dir / "ledger.bin"

    match args.action:
        case "init":
            if path.exists():
                raise MeccoError(f"ledger {path} already exists")
            save_ledger(Ledger.create(cfg.chain), path)
        case "register":
            ledger = _open_ledger(cfg, path)
            acct = new_account(args.account, role="device")
            _manager(cfg, ledger).register(acct.public_key, args.device)
            _commit(ledger, path)
            print(f"registered {args.device} for {acct.public_key.hex()}")
        case "request":
            ledger = _open_ledger(cfg, path)
            acct = new_account(args.account, role="device")
            acct.nonce = ledger.last_nonce(acct.public_key) + 1
            tx = build_offload_tx(acct, args.device, digest(b"cli-request", args.device.encode("utf-8")))
            result = _manager(cfg, ledger).handle_request(tx)
            _commit(ledger, path)
            print(result.message)
        case "audit":
            ledger = load_ledger(path)
            valid = verify_chain(ledger)
            counts = ledger.count_kinds()
            print(f"height {ledger.height}, valid: {valid}")
            for kind, count in counts.items():
                print(f"  {kind.value}: {count}")
            warned = penalty_counts(ledger)
            print(f"  penalized keys: {len(warned)}")
            return 0 if valid else 1
    return 0


# --- 4. 解析器 ---
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mecco", description="多用户边缘-云计算卸载仿真（含区块链访问控制）")
    sub = parser.add_subparsers(dest="command", required=True)
    policies = [p.value for p in PolicyName]

    p = sub.add_parser("train", help="训练 ADRLO / DRLO")
    _common(p)
    p.add_argument("--policy", choices=[PolicyName.ADRLO.value, PolicyName.DRLO.value], default="ADRLO")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="按 seed 评估一个策略")
    _common(p)
    p.add_argument("--policy", choices=policies, default="ADRLO")
    p.add_argument("--model", type=Path, help="学习类策略的模型文件")
    p.add_argument("--seeds-per-point", type=int, default=50)
    p.add_argument("--trajectory", type=Path, help="逐步轨迹输出 (TSV)")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="复现图表 sweep")
    _common(p)
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--seeds-per-point", type=int, default=50)
    p.add_argument("--shared-model", action="store_true", help="所有网格点共用一份模型")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("oracle", help="穷举求小规模实例的最优解")
    _common(p)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("pipeline", help="访问控制 + 计算卸载联合流程")
    _common(p)
    p.add_argument("--policy", choices=policies, default="ADRLO")
    p.add_argument("--model", type=Path)
    p.add_argument("--unregistered", type=int, nargs="*", default=[], help="不注册的设备编号")
    p.set_defaults(handler=cmd_pipeline)

    p = sub.add_parser("chain", help="账本操作")
    _common(p)
    p.add_argument("action", choices=["init", "register", "request", "audit"])
    p.add_argument("--ledger", type=Path)
    # --seed 在 chain 子命令里是账户种子
    p.add_argument("--device", default="md-0")
    p.set_defaults(handler=cmd_chain)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(get_settings().effective_log_level)
    if getattr(args, "seeds_per_point", 1) < 1:
        logger.error("❌ --seeds-per-point must be at least 1")
        return 2
    if args.command == "chain":
        args.account = args.seed if args.seed is not None else 0
        args.seed = None
    try:
        return args.handler(args)
    except MeccoError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
