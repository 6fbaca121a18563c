import os, sys
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(1, project_root)
import tempfile
from pathlib import Path
import pandas as pd
from harness.compare import (PLOT_METRICS, compare_report, load_aggregate, metric_table, overhead_difference,
                             overhead_summary)
import unittest


def aggregate(overheads, node_counts=(16, 32), p_errs=(0.0,)):
    rows = []
    for protocol, overhead in overheads.items():
        for n in node_counts:
            for p in p_errs:
                row = {"protocol": protocol, "node_count": n, "p_err": p}
                row.update({f"{m}_median": float(n) for m in PLOT_METRICS})
                row["overhead_kbps_median"] = overhead
                row["pdr_median"] = 1.0 - p
                rows.append(row)
    return pd.DataFrame(rows)


class TestOverheadSummary(unittest.TestCase):

    def test_percent_difference(self):
        self.assertAlmostEqual(overhead_difference(40.0, 50.0), 20.0)
        lines = overhead_summary(aggregate({"anthocnet": 40.0, "dsr": 50.0}), ["anthocnet", "dsr"])
        self.assertEqual(lines[-1], "AntHocNet overhead is 20.0% lesser than DSR")

    def test_higher_first_protocol_is_reported_second(self):
        lines = overhead_summary(aggregate({"anthocnet": 50.0, "dsr": 40.0}), ["anthocnet", "dsr"])
        self.assertEqual(lines[-1], "DSR overhead is 20.0% lesser than AntHocNet")

    def test_identical_overheads(self):
        lines = overhead_summary(aggregate({"anthocnet": 30.0, "dsr": 30.0}), ["anthocnet", "dsr"])
        self.assertEqual(lines[-1], "AntHocNet and DSR overhead differ by 0.0%")


class TestCompareReport(unittest.TestCase):

    def test_single_node_count_gives_one_row(self):
        frame = aggregate({"anthocnet": 1.0, "dsr": 2.0}, node_counts=(50,))
        table = metric_table(frame, "avg_delay_ms", ["anthocnet", "dsr"])
        self.assertEqual(list(table.index), [50])
        self.assertEqual(list(table.columns), ["anthocnet", "dsr"])

    def test_missing_protocol_or_column(self):
        frame = aggregate({"anthocnet": 1.0, "dsr": 2.0})
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValueError):
                compare_report(frame, Path(tmp), ["anthocnet", "ara"])
            with self.assertRaises(ValueError):
                compare_report(aggregate({"dsr": 2.0}), Path(tmp))
        with self.assertRaisesRegex(ValueError, "pdr_median"):
            load_aggregate(frame.drop(columns=["pdr_median"]))

    def test_writes_every_output(self):
        frame = aggregate({"anthocnet": 40.0, "dsr": 50.0, "ara": 45.0}, p_errs=(0.0, 0.1))
        with tempfile.TemporaryDirectory() as tmp:
            csv = Path(tmp) / "aggregate.csv"
            frame.to_csv(csv, index=False)
            written = compare_report(csv, Path(tmp) / "report", ["anthocnet", "dsr"])
            self.assertIn("plot_pdr_vs_p_err", written)
            delay = written["plot_avg_delay_ms"].read_text().splitlines()
            self.assertEqual(delay[0], "node_count anthocnet dsr")
            self.assertEqual(delay[1], "16 16.000000 16.000000")
            pdr = written["plot_pdr_vs_p_err"].read_text().splitlines()
            self.assertEqual(pdr[1:], ["0 1.000000 1.000000", "0.1 0.900000 0.900000"])
            summary = written["overhead_summary"].read_text()
            self.assertIn("AntHocNet overhead is 20.0% lesser than DSR", summary)
            self.assertIn("DSR", written["throughput_goodput_table"].read_text())


if __name__ == '__main__':
    unittest.main()
