import pandas as pd
import streamlit as st

from harness.compare import label, metric_table
from harness.runner import Simulation
from harness.scenario import PROTOCOLS, ConfigurationError, Scenario, parse_scenario
from harness.sweep import SweepSpec, aggregate_cells, run_cell
from plot import plot_comparison_grid, plot_drop_reasons, plot_topology


@st.cache_data(show_spinner=False)
def run_scenario(scenario_text: str) -> dict:
    """Run one scenario (given as its key=value text) and return its report row and drops."""
    report = Simulation(parse_scenario(scenario_text)).run()
    return {"row": report.as_row(), "dropped": report.dropped}


@st.cache_data(show_spinner=False)
def run_small_sweep(scenario_text: str, protocols: tuple, node_counts: tuple, seeds: tuple) -> pd.DataFrame:
    spec = SweepSpec(parse_scenario(scenario_text), node_counts, protocols, seeds)
    cells = pd.DataFrame([run_cell(spec, cell) for cell in spec.cells()])
    return aggregate_cells(cells)


def main() -> None:
    """
    Streamlit dashboard for comparing MANET routing protocols.

    Lets users configure a scenario in the sidebar, runs the selected protocols
    on the same mobility and traffic, and shows their metrics side by side,
    a topology snapshot, the drop breakdown and an optional node-count sweep.
    """

    st.set_page_config(page_title="MANET Routing Comparison", layout="centered")
    st.title("MANET Routing Dashboard")
    st.divider()

    # Scenario parameters; everything not shown keeps its default
    st.sidebar.header("Scenario")
    protocols = st.sidebar.multiselect("Protocols", list(PROTOCOLS), default=["anthocnet", "dsr"])
    node_count = st.sidebar.number_input("Number of nodes", 2, 200, 16, 1)
    duration = st.sidebar.number_input("Duration (s)", 1.0, 900.0, 60.0, 10.0)
    seed = st.sidebar.number_input("Seed", value=1, min_value=0, step=1)
    sessions = st.sidebar.number_input("Sessions", 1, 100, 10, 1)
    rate = st.sidebar.number_input("Packets per second", 0.5, 50.0, 4.0, 0.5)
    mobility = st.sidebar.checkbox("Random waypoint mobility", value=True)
    v_max = st.sidebar.number_input("Maximum speed (m/s)", 1.0, 50.0, 20.0, 1.0)
    p_err = st.sidebar.slider("Channel error rate", 0.0, 0.5, 0.0, 0.01)
    retransmission = st.sidebar.checkbox("End-to-end retransmission", value=False)

    try:
        template = Scenario(duration_s=float(duration), node_count=int(node_count), seed=int(seed),
                            sessions=int(sessions), rate_pps=float(rate), mobility=mobility,
                            v_max=float(v_max), p_err=float(p_err),
                            retransmission=retransmission).validate()
    except ConfigurationError as exc:
        st.error(f"Invalid scenario: {exc}")
        return
    if not protocols:
        st.info("Select at least one protocol.")
        return

    results = {}
    with st.spinner("Simulating..."):
        for protocol in protocols:
            results[protocol] = run_scenario(template.with_changes(protocol=protocol).to_text())

    # One column of headline numbers per protocol
    columns = st.columns(len(protocols))
    for column, protocol in zip(columns, protocols):
        row = results[protocol]["row"]
        with column:
            st.markdown(f"### {label(protocol)}")
            st.metric("PDR", "-" if row["pdr"] == "" else f"{row['pdr']:.3f}")
            st.metric("Delay (ms)", "-" if row["avg_delay_ms"] == "" else f"{row['avg_delay_ms']:.1f}")
            st.metric("Goodput (kbps)", f"{row['goodput_kbps']:.2f}")
            st.metric("Overhead (kbps)", f"{row['overhead_kbps']:.2f}")

    st.divider()

    st.subheader("All metrics")
    st.dataframe(pd.DataFrame({label(p): results[p]["row"] for p in protocols}))

    st.subheader("Drops by reason")
    selected = st.selectbox("Protocol", protocols, format_func=label)
    if results[selected]["dropped"]:
        st.pyplot(plot_drop_reasons(results[selected]["dropped"]), use_container_width=True)
    else:
        st.write("No packet was dropped.")

    st.divider()

    st.subheader("Initial topology")
    snapshot = Simulation(template)
    positions = snapshot.world.positions_at(0)
    fig = plot_topology(snapshot.world.topology(0), positions, template.radius_m,
                        template.arena_width_m, template.arena_height_m)
    st.pyplot(fig, use_container_width=True)

    st.divider()

    # Optional small sweep; every cell is a full run so keep it short
    st.subheader("Node-count sweep")
    counts_text = st.text_input("Node counts", "16,32,50")
    seed_count = st.number_input("Seeds per cell", 1, 10, 2, 1)
    if st.button("Run sweep"):
        node_counts = tuple(int(v) for v in counts_text.split(",") if v.strip())
        with st.spinner("Sweeping..."):
            aggregate = run_small_sweep(template.to_text(), tuple(protocols), node_counts,
                                        tuple(range(1, int(seed_count) + 1)))
        tables = {metric: metric_table(aggregate, metric, protocols)
                  for metric in ("avg_delay_ms", "throughput_kbps", "goodput_kbps", "overhead_kbps",
                                 "pdr", "energy_used_joules")}
        st.pyplot(plot_comparison_grid(tables), use_container_width=True)
        st.dataframe(aggregate)


if __name__ == '__main__':
    main()
