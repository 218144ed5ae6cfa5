"""CSV 产物（polars 生成正文，前面拼上 `#` 注释头）"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path

import polars as pl
from loguru import logger

from ..core.scenario import ExperimentConfig, config_hash, dump_config
from ..features.policies.models import EvalReport

AGGREGATE_SEED = "mean"


def provenance_header(cfg: ExperimentConfig, seeds: Sequence[int], **extra: object) -> list[str]:
    """config_hash、seed 列表、附加标记以及完整的生效配置"""
    lines = [f"config_hash = {config_hash(cfg)}", f"seeds = {','.join(str(s) for s in seeds)}"]
    lines += [f"{key} = {str(value).lower() if isinstance(value, bool) else value}" for key, value in extra.items()]
    lines += [f"config {line}" for line in dump_config(cfg).splitlines()]
    return lines


def render_csv(df: pl.DataFrame, header: Iterable[str] = ()) -> str:
    comments = "".join(f"# {line}\n" for line in header)
    return comments + df.write_csv()


def write_csv(df: pl.DataFrame, path: Path, header: Iterable[str] = ()) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(df, header), encoding="utf-8")
    logger.info(f"💾 [report] {df.height} rows written to {path}")
    return path


def report_frame(report: EvalReport) -> pl.DataFrame:
    """逐 seed 行 + 一行聚合（seed = "mean"）"""
    per_seed = report.per_seed.with_columns(pl.col("seed").cast(pl.Utf8))
    if per_seed.is_empty():
        return per_seed
    aggregate = per_seed.select(
        pl.col("policy").first(),
        pl.lit(AGGREGATE_SEED).alias("seed"),
        pl.col("total_cost").mean(),
        pl.col("mean_latency_s").mean(),
        pl.col("mean_energy_j").mean(),
        pl.col("edge_fraction").mean(),
        pl.col("fallback_count").sum(),
    )
    return pl.concat([per_seed, aggregate], how="vertical")


__all__: Iterable[str] = (
    "AGGREGATE_SEED",
    "provenance_header",
    "render_csv",
    "write_csv",
    "report_frame",
)
