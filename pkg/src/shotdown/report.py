"""Result rows, tables and their CSV and PNG renderings.

Every CSV starts with ``#`` preamble lines echoing the effective config,
then one RFC 4180 header and data rows. Floats are written with ``repr``
so reruns with the same config produce identical bytes. Figures are
rendered with the Agg backend next to the table they plot.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

from .config import config_text

RESULT_COLUMNS = (
    "claim", "quantity", "value", "stderr", "n", "budget", "passed", "status",
    "h", "eps_j", "horizon", "bias_note",
)


@dataclass
class ResultRow:
    """One measured quantity. passed is None for informational rows."""

    claim: str
    quantity: str
    value: float
    stderr: float = math.nan
    n: int = 0
    budget: str = ""
    passed: bool | None = None
    h: float = math.nan
    eps_j: float = math.nan
    horizon: float = math.nan
    bias_note: str = ""

    @property
    def status(self):
        if self.passed is None:
            return "info"
        return "pass" if self.passed else "fail"

    def cells(self):
        passed = "" if self.passed is None else str(bool(self.passed)).lower()
        return [self.claim, self.quantity, _cell(self.value), _cell(self.stderr), str(int(self.n)),
                self.budget, passed, self.status, _cell(self.h), _cell(self.eps_j),
                _cell(self.horizon), self.bias_note]


@dataclass
class Table:
    """Named columns of numbers with an optional plot description.

    plot keys: x, y (list of columns), err (dict y -> stderr column),
    logx, logy, title, xlabel, ylabel, kind ("line", "scatter" or "bar").
    """

    name: str
    columns: tuple
    rows: list = field(default_factory=list)
    plot: dict | None = None

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class ExperimentResult:
    experiment: str
    rows: list = field(default_factory=list)
    tables: list = field(default_factory=list)

    @property
    def asserted(self):
        return [r for r in self.rows if r.passed is not None]

    @property
    def passed(self):
        return all(r.passed for r in self.asserted)

    def by_claim(self, claim):
        return [r for r in self.rows if r.claim == claim]


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def preamble(cfg):
    lines = ["# shotdown-lab results"]
    for line in config_text(cfg).splitlines():
        # the output directory does not change any number
        if not line.startswith("out ="):
            lines.append("# " + line)
    return "\n".join(lines) + "\n"


def render_csv(cfg, columns, rows):
    buf = io.StringIO()
    buf.write(preamble(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def results_csv(cfg, result):
    return render_csv(cfg, RESULT_COLUMNS, [r.cells() for r in result.rows])


def table_csv(cfg, table):
    return render_csv(cfg, table.columns, [[_cell(v) for v in r] for r in table.rows])


def read_csv(path):
    """(header, rows) of a CSV written here, skipping the preamble."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def render_figure(table, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = table.plot
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    xs = table.column(spec["x"])
    kind = spec.get("kind", "line")
    for i, col in enumerate(spec["y"]):
        ys = table.column(col)
        err = spec.get("err", {}).get(col)
        if kind == "bar":
            width = 0.8 / len(spec["y"])
            pos = [j + (i - (len(spec["y"]) - 1) / 2) * width for j in range(len(xs))]
            ax.bar(pos, ys, width, yerr=table.column(err) if err else None, label=col)
            ax.set_xticks(range(len(xs)), [str(v) for v in xs])
        elif err:
            ax.errorbar(xs, ys, yerr=table.column(err), fmt="o-" if kind == "line" else "o",
                        ms=3, capsize=2, label=col)
        else:
            ax.plot(xs, ys, "-" if kind == "line" else "o", ms=3, label=col)
    if spec.get("logx"):
        ax.set_xscale("log")
    if spec.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(spec.get("xlabel", spec["x"]))
    ax.set_ylabel(spec.get("ylabel", ""))
    ax.set_title(spec.get("title", table.name))
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def write_outputs(out_dir, cfg, result, figures=True):
    """Write results.csv, config.txt, one CSV per table and its PNG.

    Returns the list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    put("config.txt", config_text(cfg))
    put("results.csv", results_csv(cfg, result))
    for t in result.tables:
        put(f"{t.name}.csv", table_csv(cfg, t))
        if figures and t.plot and t.rows:
            path = os.path.join(out_dir, f"{t.name}.png")
            render_figure(t, path)
            written.append(path)
    return written
