from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx
import numpy as np
import pandas as pd

from harness.compare import PLOT_METRICS, label


METRIC_TITLES = {
    "avg_delay_ms": ("End-to-end delay", "Delay (ms)"),
    "throughput_kbps": ("Throughput", "Throughput (kbps)"),
    "goodput_kbps": ("Goodput", "Goodput (kbps)"),
    "overhead_kbps": ("Routing overhead", "Overhead (kbps)"),
    "pdr": ("Packet delivery ratio", "PDR"),
    "energy_used_joules": ("Energy used", "Energy (J)"),
}

COLORS = {"anthocnet": "#1f77b4", "dsr": "#d62728", "ara": "#2ca02c"}


def setup_plot_style() -> None:
    """
    Set up a clean matplotlib style shared by every figure.
    """
    plt.rcParams.update({
        'font.size': 11,
        'axes.titlesize': 14,
        'axes.labelsize': 12,
        'xtick.labelsize': 10,
        'ytick.labelsize': 10,
        'legend.fontsize': 10,
        'figure.titlesize': 16,
        'axes.grid': True,
        'grid.alpha': 0.3,
        'axes.spines.top': False,
        'axes.spines.right': False,
    })


def read_plot_data(path: Path) -> pd.DataFrame:
    """
    Load a plot-data file written by the comparison report.

    Args:
        path (Path): File with a one-line header, x in the first column.

    Returns:
        pandas.DataFrame: One column per protocol, indexed by x.
    """
    frame = pd.read_csv(path, sep=r"\s+", na_values=["-"])
    return frame.set_index(frame.columns[0])


def plot_metric(table: pd.DataFrame, metric: str, xlabel: str = "Number of nodes"):
    """
    Line plot of one metric, one line per protocol.

    Args:
        table (pandas.DataFrame): Indexed by x, one column per protocol.
        metric (str): Metric name, used for the title and y label.
        xlabel (str): Label of the x axis.

    Returns:
        matplotlib.figure.Figure: The generated figure.
    """
    setup_plot_style()
    title, ylabel = METRIC_TITLES.get(metric, (metric, metric))

    fig, ax = plt.subplots(1, 1, figsize=(8, 5))
    for protocol in table.columns:
        ax.plot(table.index, table[protocol], marker='o', linewidth=2,
                color=COLORS.get(protocol), label=label(protocol))

    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.set_facecolor('#FAFAFA')
    fig.patch.set_facecolor('white')
    return fig


def plot_comparison_grid(tables: dict):
    """
    All metrics side by side, as in a results overview.

    Args:
        tables (dict): Metric name to a table as accepted by :func:`plot_metric`.

    Returns:
        matplotlib.figure.Figure: Figure with one subplot per metric.
    """
    setup_plot_style()
    metrics = [m for m in PLOT_METRICS if m in tables]
    cols = 3
    rows = max(1, int(np.ceil(len(metrics) / cols)))
    fig, axs = plt.subplots(rows, cols, figsize=(15, 4.5 * rows), squeeze=False)
    fig.suptitle('Protocol comparison by network size', fontweight='bold')

    for i, metric in enumerate(metrics):
        ax = axs[i // cols, i % cols]
        title, ylabel = METRIC_TITLES.get(metric, (metric, metric))
        table = tables[metric]
        for protocol in table.columns:
            ax.plot(table.index, table[protocol], marker='o', linewidth=2,
                    color=COLORS.get(protocol), label=label(protocol))
        ax.set_title(title, fontweight='bold')
        ax.set_xlabel('Number of nodes')
        ax.set_ylabel(ylabel)
        ax.set_facecolor('#FAFAFA')
    for j in range(len(metrics), rows * cols):
        axs[j // cols, j % cols].axis('off')
    if metrics:
        axs[0, 0].legend()

    plt.tight_layout()
    return fig


def plot_topology(graph: nx.Graph, positions: np.ndarray, radius: float, width: float, height: float):
    """
    Snapshot of node positions and the links of the unit-disk graph.

    Returns:
        matplotlib.figure.Figure: The generated figure.
    """
    setup_plot_style()
    fig, ax = plt.subplots(1, 1, figsize=(10, 6))
    for a, b in graph.edges():
        ax.plot(positions[[a, b], 0], positions[[a, b], 1], color='grey', alpha=0.5, linewidth=1)
    ax.scatter(positions[:, 0], positions[:, 1], s=60, color='#1f77b4', zorder=3,
               edgecolors='white', linewidth=1.5)
    for node, (x, y) in enumerate(positions):
        ax.annotate(str(node), (x, y), textcoords='offset points', xytext=(4, 4), fontsize=8)

    ax.set_xlim(0, width)
    ax.set_ylim(0, height)
    ax.set_aspect('equal')
    ax.set_xlabel('x (m)')
    ax.set_ylabel('y (m)')
    ax.set_title(f'Topology snapshot (range {radius:g} m, {graph.number_of_edges()} links)')
    ax.set_facecolor('#FAFAFA')
    return fig


def plot_drop_reasons(dropped: dict):
    """
    Horizontal bars of dropped packet counts per reason.
    """
    setup_plot_style()
    fig, ax = plt.subplots(1, 1, figsize=(8, 4))
    reasons = sorted(dropped, key=dropped.get)
    ax.barh(reasons, [dropped[r] for r in reasons], color='#d62728', alpha=0.7)
    ax.set_xlabel('Packets')
    ax.set_title('Drops by reason')
    return fig


def render_report_plots(out_dir: Path) -> dict:
    """
    Render PNG figures for every plot-data file found in ``out_dir``.

    Returns:
        dict: Figure name to written path.
    """
    out_dir = Path(out_dir)
    written = {}
    tables = {}
    for metric in PLOT_METRICS:
        source = out_dir / f"plot_{metric}.dat"
        if not source.exists():
            continue
        tables[metric] = read_plot_data(source)
        fig = plot_metric(tables[metric], metric)
        written[f"figure_{metric}"] = out_dir / f"{metric}.png"
        fig.savefig(written[f"figure_{metric}"], dpi=120)
        plt.close(fig)

    error_source = out_dir / "plot_pdr_vs_p_err.dat"
    if error_source.exists():
        fig = plot_metric(read_plot_data(error_source), "pdr", xlabel="Channel error rate")
        written["figure_pdr_vs_p_err"] = out_dir / "pdr_vs_p_err.png"
        fig.savefig(written["figure_pdr_vs_p_err"], dpi=120)
        plt.close(fig)

    if tables:
        fig = plot_comparison_grid(tables)
        written["figure_overview"] = out_dir / "overview.png"
        fig.savefig(written["figure_overview"], dpi=120)
        plt.close(fig)
    return written
