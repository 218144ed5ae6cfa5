"""配置文件、CSV 产物、联合流水线、sweep 与命令行"""

import polars as pl
import pytest

from mecco.core.config import get_settings
from mecco.core.errors import ConfigError, MeccoError
from mecco.core.scenario import (
    ExperimentConfig,
    build_config,
    config_hash,
    dump_config,
    load_config,
    parse_config,
)
from mecco.features.chain.ledger import verify_chain
from mecco.features.chain.models import TxKind
from mecco.features.chain.storage import load_ledger
from mecco.features.costs.models import BITS_PER_MB, CloudShareMode
from mecco.features.policies.models import PolicyName
from mecco.features.policies.service import build_policy, evaluate_policy
from mecco.harness.pipeline import device_account, run_pipeline
from mecco.harness.reporting import AGGREGATE_SEED, provenance_header, render_csv, report_frame
from mecco.harness.sweep import PRESETS, SweepSpec, SweepVar, point_config, preset_spec, run_sweep
from mecco.main import main

SMALL = ExperimentConfig(n_devices=3, levels_f=2, levels_w=4, task_min_mb=0.5, task_max_mb=2.0)


# --- 配置 ---
def test_parse_config_converts_units_and_skips_comments():
    cfg = parse_config(
        """
        # 小规模实验
        n_devices = 4      # 设备数
        bandwidth_mhz = 10
        cloud_share_mode = full
        enforce_deadline = true
        """
    )
    assert cfg.n_devices == 4
    assert cfg.scenario.bandwidth_hz == 10e6
    assert cfg.scenario.cloud_share_mode is CloudShareMode.FULL
    assert cfg.scenario.enforce_deadline is True
    assert cfg.scenario.task_max_bits == 12 * BITS_PER_MB
    assert cfg.agent.episodes == 3000


@pytest.mark.parametrize(
    ("text", "line", "fragment"),
    [
        ("n_devices = 3\nwarp_speed = 9\n", 2, "unknown key"),
        ("n_devices = 3\nn_devices = 4\n", 2, "duplicate"),
        ("\n\nbeta_t = 1.5\n", 3, "beta_t"),
        ("n_devices three\n", 1, "key = value"),
        ("task_min_mb = 5\ntask_max_mb = 1\n", 2, "task_min_mb"),
        ("batch_size = 128\nreplay_capacity = 64\n", 1, "batch_size"),
    ],
)
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert exc.value.exit_code == 2


def test_dump_then_parse_gives_the_same_config():
    cfg = SMALL.with_overrides(cloud_share_mode="full", enforce_deadline=True, gamma=0.8)
    assert parse_config(dump_config(cfg)) == cfg
    assert config_hash(cfg) == config_hash(parse_config(dump_config(cfg)))
    assert config_hash(cfg) != config_hash(SMALL)


def test_load_config(tmp_path):
    assert load_config(None) == ExperimentConfig()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.txt")
    path = tmp_path / "cfg.txt"
    path.write_text("seed = 9\n", encoding="utf-8")
    assert load_config(path).seed == 9


def test_overrides_are_validated():
    with pytest.raises(ConfigError):
        SMALL.with_overrides(n_devices=-1)
    with pytest.raises(ConfigError):
        build_config({"levels_w": 0})


# --- CSV ---
def test_report_frame_appends_aggregate_row():
    report = evaluate_policy(build_policy(PolicyName.CO), SMALL.scenario, [0, 1, 2], 2, 4)
    frame = report_frame(report)
    assert frame.height == 4
    last = frame.row(-1, named=True)
    assert last["seed"] == AGGREGATE_SEED
    assert last["total_cost"] == pytest.approx(report.mean_total_cost)
    assert frame["seed"].to_list()[:3] == ["0", "1", "2"]


def test_csv_header_records_provenance():
    header = provenance_header(SMALL, [4, 5], preset="fig8a", shared_model=True)
    text = render_csv(pl.DataFrame({"a": [1]}), header)
    lines = text.splitlines()
    assert lines[0] == f"# config_hash = {config_hash(SMALL)}"
    assert lines[1] == "# seeds = 4,5"
    assert "# preset = fig8a" in lines and "# shared_model = true" in lines
    assert "# config n_devices = 3" in lines
    assert lines[-2:] == ["a", "1"]


# --- 联合流水线 ---
def test_pipeline_excludes_unregistered_devices():
    run = run_pipeline(SMALL, seed=2, policy=build_policy(PolicyName.CO), unregistered={1})
    assert run.authorized == ("md-0", "md-2")
    assert run.denied == ("md-1",)
    assert run.verdicts["md-1"].message == "Failed"
    assert run.chain_valid and verify_chain(run.ledger)
    assert run.offloading.height == 2
    assert run.offloading["device_id"].to_list() == ["md-0", "md-2"]
    assert run.total_cost == pytest.approx(run.offloading["cost"].sum())

    counts = run.ledger.count_kinds()
    assert counts[TxKind.REGISTRATION] == 2
    assert counts[TxKind.PENALTY_NOTICE] == 1
    assert counts[TxKind.OFFLOAD_REQUEST] == 2
    assert run.accounts["md-1"] == device_account(2, 1).public_key


def test_pipeline_with_every_device_denied():
    run = run_pipeline(SMALL, seed=0, policy=build_policy(PolicyName.CO), unregistered={0, 1, 2})
    assert run.authorized == ()
    assert run.total_cost == 0.0
    assert run.offloading.is_empty()
    assert run.ledger.count_kinds()[TxKind.PENALTY_NOTICE] == 3


def test_pipeline_can_extend_an_existing_ledger():
    first = run_pipeline(SMALL, seed=1, policy=build_policy(PolicyName.CO))
    height = first.ledger.height
    second = run_pipeline(SMALL, seed=1, policy=build_policy(PolicyName.CO), ledger=first.ledger)
    assert second.ledger.height > height
    assert second.chain_valid
    assert second.authorized == first.authorized


# --- sweep ---
def test_presets_cover_every_figure():
    assert set(PRESETS) == {"fig8a", "fig8b", "fig9a", "fig9b", "fig10"}
    assert PRESETS["fig8a"].values == (2, 4, 6, 8, 10, 12)
    assert PRESETS["fig9a"].values[0] == 0.5 and PRESETS["fig9a"].values[-1] == 5.0
    assert set(PRESETS["fig10"].policies) == {
        PolicyName.ADRLO,
        PolicyName.NO_EDGE_ALLOC,
        PolicyName.NO_BW_ALLOC,
    }
    with pytest.raises(ConfigError):
        preset_spec("fig99")


def test_sweep_grid_must_increase():
    with pytest.raises(ValueError):
        SweepSpec(sweep_var=SweepVar.N_DEVICES, values=(4, 2), policies=(PolicyName.CO,))
    with pytest.raises(ValueError):
        SweepSpec(sweep_var=SweepVar.N_DEVICES, values=(), policies=(PolicyName.CO,))


def test_point_config_for_task_size_pins_the_range():
    point = point_config(SMALL, SweepVar.TASK_SIZE_MB, 6.0)
    assert point.task_min_mb == point.task_max_mb == 6.0


def test_sweep_rows_and_skipped_points(tmp_path):
    spec = SweepSpec(
        sweep_var=SweepVar.N_DEVICES,
        values=(2, 6),
        policies=(PolicyName.CO, PolicyName.EO),
        seeds_per_point=2,
        output=tmp_path / "sweep.csv",
    )
    df = run_sweep(SMALL, spec)
    # N=2：2 个策略 x (2 个 seed + 1 行聚合)；N=6 > L_w=4：每个策略每个 seed 一行 skipped
    assert df.height == 2 * 3 + 2 * 2
    skipped = df.filter(pl.col("skipped"))
    assert skipped["sweep_value"].unique().to_list() == [6.0]
    assert skipped["total_cost"].null_count() == skipped.height
    means = df.filter(pl.col("seed") == AGGREGATE_SEED)
    assert means.height == 2
    text = (tmp_path / "sweep.csv").read_text(encoding="utf-8")
    assert text.startswith("# config_hash = ")
    assert "# shared_model = false" in text


def test_sweep_is_independent_of_worker_count():
    spec = SweepSpec(
        sweep_var=SweepVar.BANDWIDTH_MHZ,
        values=(5.0, 10.0),
        policies=(PolicyName.CO,),
        seeds_per_point=2,
    )
    assert run_sweep(SMALL, spec, workers=1).equals(run_sweep(SMALL, spec, workers=2))


# --- 命令行 ---
def _write_config(tmp_path, text="n_devices = 2\nlevels_f = 2\nlevels_w = 4\nepisodes = 3\nbatch_size = 2\n"):
    path = tmp_path / "cfg.txt"
    path.write_text(text, encoding="utf-8")
    return path


def test_cli_oracle_and_eval(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    assert main(["oracle", "--config", str(cfg)]) == 0
    assert "optimal cost" in capsys.readouterr().out

    out = tmp_path / "eval.csv"
    assert main(["eval", "--config", str(cfg), "--policy", "CO", "--seeds-per-point", "3", "--out", str(out)]) == 0
    body = [line for line in out.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    assert len(body) == 1 + 3 + 1


def test_cli_train_then_eval_learned(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "adrlo"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "model.json").is_file() and (out / "trace.csv").is_file()
    assert main(["eval", "--config", str(cfg), "--model", str(out / "model.json"), "--seeds-per-point", "2"]) == 0


def test_cli_exit_codes(tmp_path):
    assert main(["eval", "--policy", "ADRLO", "--config", str(_write_config(tmp_path))]) == 2
    assert main(["oracle", "--config", str(_write_config(tmp_path, "warp = 1\n"))]) == 2
    too_many = _write_config(tmp_path, "n_devices = 5\nlevels_f = 2\nlevels_w = 4\n")
    assert main(["eval", "--policy", "CO", "--config", str(too_many), "--seeds-per-point", "1"]) == 3


def test_cli_chain_workflow(tmp_path, capsys):
    ledger = tmp_path / "ledger.bin"
    assert main(["chain", "init", "--ledger", str(ledger)]) == 0
    assert main(["chain", "init", "--ledger", str(ledger)]) == MeccoError.exit_code
    assert main(["chain", "register", "--ledger", str(ledger), "--seed", "5", "--device", "md-7"]) == 0
    capsys.readouterr()

    assert main(["chain", "request", "--ledger", str(ledger), "--seed", "5", "--device", "md-7"]) == 0
    assert capsys.readouterr().out.strip() == "Successful!"
    assert main(["chain", "request", "--ledger", str(ledger), "--seed", "5", "--device", "md-8"]) == 0
    assert capsys.readouterr().out.strip() == "Failed"

    assert main(["chain", "audit", "--ledger", str(ledger)]) == 0
    audit = capsys.readouterr().out
    assert "valid: True" in audit
    assert "penalized keys: 1" in audit
    assert verify_chain(load_ledger(ledger))


def test_cli_pipeline_writes_ledger_and_table(tmp_path, capsys):
    out = tmp_path / "pipeline"
    args = ["pipeline", "--config", str(_write_config(tmp_path)), "--policy", "CO", "--unregistered", "1"]
    assert main([*args, "--out", str(out)]) == 0
    assert "authorized 1/2" in capsys.readouterr().out
    assert verify_chain(load_ledger(out / "ledger.bin"))
    table = pl.read_csv(out / "offloading.csv", comment_prefix="#")
    assert table["device_id"].to_list() == ["md-0"]


def test_fig8b_preset_has_an_edge_cloud_crossover():
    spec = preset_spec("fig8b", policies=(PolicyName.EO, PolicyName.CO), seeds_per_point=1)
    df = run_sweep(ExperimentConfig(), spec).filter(pl.col("seed") == AGGREGATE_SEED)
    cost = {(row["policy"], row["sweep_value"]): row["total_cost"] for row in df.iter_rows(named=True)}
    assert cost[("EO", 2.0)] < cost[("CO", 2.0)]
    assert cost[("CO", 12.0)] < cost[("EO", 12.0)]


def test_settings_read_prefixed_environment(monkeypatch, tmp_path):
    settings = get_settings()
    assert settings.output_dir == tmp_path / "runs"
    assert settings.workers == 1
    assert settings.effective_log_level == "INFO"

    monkeypatch.setenv("MECCO_DEBUG", "true")
    get_settings.cache_clear()
    assert get_settings().effective_log_level == "DEBUG"
