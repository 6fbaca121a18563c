import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import pandas as pd


logger = logging.getLogger(__name__)

HEADLINE_PROTOCOLS = ("anthocnet", "dsr")
LABELS = {"anthocnet": "AntHocNet", "dsr": "DSR", "ara": "ARA (extra)"}
PLOT_METRICS = ("avg_delay_ms", "throughput_kbps", "goodput_kbps", "overhead_kbps", "pdr",
                "energy_used_joules")
REQUIRED_COLUMNS = ("protocol", "node_count") + tuple(f"{m}_median" for m in PLOT_METRICS)


def label(protocol: str) -> str:
    return LABELS.get(protocol, protocol)


def overhead_difference(lower: float, higher: float) -> float:
    """Percent by which ``lower`` undercuts ``higher``: ``(higher - lower) / higher * 100``."""
    if higher <= 0:
        return 0.0
    return (higher - lower) / higher * 100.0


def load_aggregate(source: Union[Path, pd.DataFrame]) -> pd.DataFrame:
    """Read an aggregate CSV and check its schema.

    Raises:
        ValueError: Naming the first missing column.
    """
    frame = source.copy() if isinstance(source, pd.DataFrame) else pd.read_csv(source)
    for column in REQUIRED_COLUMNS:
        if column not in frame.columns:
            raise ValueError(f"aggregate is missing column '{column}'")
    if "p_err" not in frame.columns:
        frame["p_err"] = 0.0
    return frame


def _ordered_protocols(frame: pd.DataFrame, protocols: Optional[Sequence[str]]) -> list:
    present = set(frame["protocol"])
    if protocols:
        for protocol in protocols:
            if protocol not in present:
                raise ValueError(f"aggregate has no rows for protocol '{protocol}'")
        ordered = list(protocols)
    else:
        ordered = [p for p in HEADLINE_PROTOCOLS if p in present] + sorted(present - set(HEADLINE_PROTOCOLS))
    if len(ordered) < 2:
        raise ValueError("a comparison needs at least two protocols")
    return ordered


def metric_table(frame: pd.DataFrame, metric: str, protocols: Sequence[str]) -> pd.DataFrame:
    """Median ``metric`` with one row per node count and one column per protocol."""
    table = frame.pivot_table(index="node_count", columns="protocol", values=f"{metric}_median",
                              aggfunc="first", dropna=False)
    return table.reindex(columns=list(protocols)).sort_index()


def throughput_goodput_table(frame: pd.DataFrame, protocols: Sequence[str]) -> pd.DataFrame:
    throughput = metric_table(frame, "throughput_kbps", protocols)
    goodput = metric_table(frame, "goodput_kbps", protocols)
    columns = {}
    for protocol in protocols:
        columns[f"{label(protocol)} throughput"] = throughput[protocol]
        columns[f"{label(protocol)} goodput"] = goodput[protocol]
    return pd.DataFrame(columns)


def overhead_summary(frame: pd.DataFrame, protocols: Sequence[str]) -> list:
    """Mean overhead per protocol and the pairwise percent difference lines."""
    means = {p: float(frame.loc[frame["protocol"] == p, "overhead_kbps_median"].mean()) for p in protocols}
    lines = [f"{label(p)} mean overhead: {means[p]:.3f} kbps" for p in protocols]
    for i, first in enumerate(protocols):
        for second in protocols[i + 1:]:
            lower, higher = sorted((first, second), key=lambda p: (means[p], protocols.index(p)))
            difference = overhead_difference(means[lower], means[higher])
            if difference == 0.0:
                lines.append(f"{label(first)} and {label(second)} overhead differ by 0.0%")
            else:
                lines.append(f"{label(lower)} overhead is {difference:.1f}% lesser than {label(higher)}")
    return lines


def _write_table(table: pd.DataFrame, path: Path, title: str) -> Path:
    table = table.rename(columns=label)
    text = table.to_string(float_format=lambda v: f"{v:.3f}", na_rep="-")
    path.write_text(f"{title}\n{text}\n", encoding="utf-8")
    return path


def write_plot_data(table: pd.DataFrame, path: Path, x_name: str = "node_count") -> Path:
    """Columnar text with a one-line header: x, then one column per protocol."""
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(" ".join([x_name] + list(table.columns)) + "\n")
        for x, row in table.iterrows():
            values = ["-" if pd.isna(v) else f"{v:.6f}" for v in row]
            handle.write(" ".join([f"{x:g}"] + values) + "\n")
    return path


def compare_report(source: Union[Path, pd.DataFrame], out_dir: Path,
                   protocols: Optional[Sequence[str]] = None) -> dict:
    """Write the comparison tables, overhead summary and plot-data files.

    Tables use the lowest error rate in the aggregate. When several error
    rates are present, ``plot_pdr_vs_p_err.dat`` holds PDR against the error
    rate, taken at the largest node count.

    Args:
        source (Path | DataFrame): Aggregate CSV or its DataFrame.
        out_dir (Path): Destination directory.
        protocols (Sequence[str], optional): Protocols to compare, every protocol present when omitted.

    Returns:
        dict: Output name to written path.

    Raises:
        ValueError: If a column or requested protocol is missing, or fewer than two protocols remain.
    """
    frame = load_aggregate(source)
    protocols = _ordered_protocols(frame, protocols)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    baseline = frame[frame["p_err"] == frame["p_err"].min()]
    written = {
        "delay_table": _write_table(metric_table(baseline, "avg_delay_ms", protocols),
                                    out_dir / "delay_table.txt", "End-to-end delay (ms)"),
        "throughput_goodput_table": _write_table(throughput_goodput_table(baseline, protocols),
                                                 out_dir / "throughput_goodput_table.txt",
                                                 "Throughput and goodput (kbps)"),
    }
    summary = out_dir / "overhead_summary.txt"
    summary.write_text("\n".join(overhead_summary(baseline, protocols)) + "\n", encoding="utf-8")
    written["overhead_summary"] = summary
    for metric in PLOT_METRICS:
        written[f"plot_{metric}"] = write_plot_data(metric_table(baseline, metric, protocols),
                                                    out_dir / f"plot_{metric}.dat")
    if frame["p_err"].nunique() > 1:
        largest = frame[frame["node_count"] == frame["node_count"].max()]
        table = largest.pivot_table(index="p_err", columns="protocol", values="pdr_median",
                                    aggfunc="first").reindex(columns=protocols).sort_index()
        written["plot_pdr_vs_p_err"] = write_plot_data(table, out_dir / "plot_pdr_vs_p_err.dat", "p_err")
    logger.info(f"Wrote comparison of {', '.join(protocols)} to {out_dir}")
    return written
