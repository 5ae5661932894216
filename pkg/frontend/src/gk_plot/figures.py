"""Figure builders for the solver's published CSV formats.

Five kinds, one per verification study:

  haff      log-log temperature decay with a slope -2 guide line
            (input: a trace CSV in the documented diagnostics schema)
  profile   steady radial mass histogram with the limit-Maxwellian overlay
            (input: profile_hist.csv: r_lo,r_hi,mass,ref_mass)
  sweep     steady-profile distance vs inelasticity, log-log
            (input: sweep_summary.csv: alpha,distance,floor,corrected,theta_inf)
  eigen     energy-relaxation residual traces on a log axis
            (input: eigen_resid.csv: t,replica,energy,resid)
  lyapunov  H1 monitor traces and their replica median
            (input: lyap_median.csv: t,h1_median; optional lyap_h1.csv:
            t,replica,h1)

All styling is fixed and no timestamps are embedded, so byte-identical
inputs render pixel-identical (and byte-identical) PNG files. Input CSVs are
validated against their documented headers before any drawing happens.
"""

import csv
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

TRACE_HEADER = ("t", "rho", "px", "py", "pz", "energy", "theta", "m_half",
                "m_32", "m_2", "m_3", "de_est", "de_se", "rel_entropy",
                "l1_dist", "collisions", "replica")

HEADERS = {
    "haff": TRACE_HEADER,
    "profile": ("r_lo", "r_hi", "mass", "ref_mass"),
    "sweep": ("alpha", "distance", "floor", "corrected", "theta_inf"),
    "eigen": ("t", "replica", "energy", "resid"),
    "lyapunov": ("t", "h1_median"),
    "lyapunov_traces": ("t", "replica", "h1"),
}

KINDS = ("haff", "profile", "sweep", "eigen", "lyapunov")

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaError(ValueError):
    """An input CSV does not match its documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    logx: bool = True
    logy: bool = True
    title: str = ""
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def read_table(path: str, expected_header) -> dict:
    """Load a CSV as column arrays, validating the exact header."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != tuple(expected_header):
            got = set(h.strip() for h in header)
            want = set(expected_header)
            missing = sorted(want - got)
            extra = sorted(got - want)
            problem = []
            if missing:
                problem.append(f"missing column(s) {missing}")
            if extra:
                problem.append(f"unexpected column(s) {extra}")
            if not problem:
                problem.append("column order differs")
            raise SchemaError(f"{path}: header mismatch: " + "; ".join(problem))
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols = {}
    for idx, name in enumerate(expected_header):
        try:
            cols[name] = np.array([float(row[idx]) for row in rows])
        except (ValueError, IndexError):
            raise SchemaError(f"{path}: column {name!r} contains non-numeric data")
    return cols


def _new_axes():
    fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path: str):
    fig.tight_layout()
    # strip the Software tag so output bytes depend only on the input data
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def _render_haff(spec: FigureSpec):
    cols = read_table(spec.inputs[0], HEADERS["haff"])
    fig, ax = _new_axes()
    replicas = np.unique(cols["replica"])
    for rep in replicas:
        mask = cols["replica"] == rep
        order = np.argsort(cols["t"][mask])
        ax.plot(cols["t"][mask][order], cols["theta"][mask][order],
                color="#9ecae1", lw=0.6, alpha=0.7, zorder=1)
    t_all = np.unique(cols["t"])
    mean_theta = np.array([cols["theta"][cols["t"] == t].mean() for t in t_all])
    ax.plot(t_all, mean_theta, color="#08519c", lw=1.6, label="replica mean",
            zorder=2)
    positive = (t_all > 0) & (mean_theta > 0)
    if np.any(positive):
        t_ref = t_all[positive][-1]
        th_ref = mean_theta[positive][-1]
        guide_t = t_all[positive]
        ax.plot(guide_t, th_ref * (guide_t / t_ref) ** -2.0, "k--", lw=1.0,
                label="slope -2", zorder=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("temperature")
    ax.set_title(spec.title or "free cooling: temperature decay")
    ax.legend(loc="lower left")
    _save(fig, spec.output)


def _render_profile(spec: FigureSpec):
    cols = read_table(spec.inputs[0], HEADERS["profile"])
    lo, hi = cols["r_lo"], cols["r_hi"]
    finite = np.isfinite(hi)
    if not np.all(np.diff(lo) > 0):
        raise SchemaError(f"{spec.inputs[0]}: r_lo must increase")
    width = np.where(finite, hi - lo, 0.0)
    centers = np.where(finite, 0.5 * (lo + hi), lo)
    fig, ax = _new_axes()
    dens_emp = np.where(width > 0, cols["mass"] / np.maximum(width, 1e-300), 0.0)
    dens_ref = np.where(width > 0, cols["ref_mass"] / np.maximum(width, 1e-300), 0.0)
    ax.bar(centers[finite], dens_emp[finite], width=width[finite],
           color="#c6dbef", edgecolor="#6baed6", lw=0.5, label="steady profile")
    ax.plot(centers[finite], dens_ref[finite], color="#a63603", lw=1.6,
            label="limit Maxwellian")
    ax.set_xlabel("|v|")
    ax.set_ylabel("radial mass density")
    ax.set_title(spec.title or "steady radial profile vs limit Maxwellian")
    ax.legend(loc="upper right")
    _save(fig, spec.output)


def _render_sweep(spec: FigureSpec):
    cols = read_table(spec.inputs[0], HEADERS["sweep"])
    eps = 1.0 - cols["alpha"]
    fig, ax = _new_axes()
    ax.plot(eps, cols["distance"], "o-", color="#6baed6", label="measured")
    ax.plot(eps, cols["corrected"], "s-", color="#08519c",
            label="floor subtracted")
    ax.plot(eps, cols["floor"], ":", color="#969696", label="noise floor")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("1 - alpha")
    ax.set_ylabel("weighted L1 distance to limit Maxwellian")
    ax.set_title(spec.title or "elastic-limit sweep")
    ax.legend(loc="upper left")
    _save(fig, spec.output)


def _render_eigen(spec: FigureSpec):
    cols = read_table(spec.inputs[0], HEADERS["eigen"])
    fig, ax = _new_axes()
    for rep in np.unique(cols["replica"]):
        mask = cols["replica"] == rep
        order = np.argsort(cols["t"][mask])
        resid = cols["resid"][mask][order]
        ax.plot(cols["t"][mask][order], np.abs(resid), color="#9ecae1",
                lw=0.5, alpha=0.5, zorder=1)
    t_all = np.unique(cols["t"])
    mean_resid = np.array([cols["resid"][cols["t"] == t].mean() for t in t_all])
    ax.plot(t_all, np.abs(mean_resid), color="#08519c", lw=1.8,
            label="replica mean", zorder=2)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("|E(t) - E_inf|")
    ax.set_title(spec.title or "energy relaxation residual")
    ax.legend(loc="upper right")
    _save(fig, spec.output)


def _render_lyapunov(spec: FigureSpec):
    median = read_table(spec.inputs[0], HEADERS["lyapunov"])
    fig, ax = _new_axes()
    if len(spec.inputs) > 1:
        traces = read_table(spec.inputs[1], HEADERS["lyapunov_traces"])
        for rep in np.unique(traces["replica"]):
            mask = traces["replica"] == rep
            order = np.argsort(traces["t"][mask])
            ax.plot(traces["t"][mask][order], traces["h1"][mask][order],
                    color="#9ecae1", lw=0.5, alpha=0.5, zorder=1)
    ax.plot(median["t"], median["h1_median"], color="#08519c", lw=1.8,
            label="replica median", zorder=2)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("H1 = H(g|M[g]) + (E - E_inf)^2")
    ax.set_title(spec.title or "H1 monitor")
    ax.legend(loc="upper right")
    _save(fig, spec.output)


_RENDERERS = {
    "haff": _render_haff,
    "profile": _render_profile,
    "sweep": _render_sweep,
    "eigen": _render_eigen,
    "lyapunov": _render_lyapunov,
}


def render(spec: FigureSpec) -> str:
    """Validate inputs and write the figure; returns the output path."""
    with plt.rc_context(STYLE):
        _RENDERERS[spec.kind](spec)
    return spec.output
