"""A11: the five figure kinds render deterministically from real solver
outputs, and schema validation rejects a corrupted header.

The solver outputs are produced by invoking the granular-kinetics CLI at
miniature scale (the file formats are the only coupling between the two
packages).
"""

import subprocess
import sys

import pytest

from gk_plot.figures import FigureSpec, render

pytest.importorskip("granular_kinetics")


def run_solver(subcommand, out_dir, *sets):
    cmd = [sys.executable, "-m", "granular_kinetics.cli", subcommand,
           "--out", str(out_dir)]
    for item in sets:
        cmd += ["--set", item]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode in (0, 1), proc.stderr
    return proc


SMALL = ("particle_count=1500", "replicas=2", "bins=32", "pair_samples=256",
         "min_settle_time=15", "min_window_time=30", "record_spacing=1.0",
         "plateau_drift_floor=0.02", "bootstrap_resamples=50", "threads=1")


@pytest.fixture(scope="session")
def solver_outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("solver")
    run_solver("haff", root, *SMALL, "alpha=0.9", "haff_records=20",
               "particle_count=3000", "seed=101")
    run_solver("profile", root, *SMALL, "alpha=0.9", "seed=102")
    run_solver("sweep", root, *SMALL, "alpha=0.9", "sweep_alphas=0.8,0.9",
               "particle_count=3000", "seed=103")
    run_solver("eigen", root, *SMALL, "alpha=0.9", "eigen_records=24",
               "replicas=6", "seed=104")
    run_solver("lyapunov", root, *SMALL, "alpha=0.9", "replicas=4", "seed=105")
    return root


def figure_specs(root, out_dir):
    return [
        FigureSpec("haff", (str(root / "haff_trace.csv"),),
                   str(out_dir / "haff.png")),
        FigureSpec("profile", (str(root / "profile_hist.csv"),),
                   str(out_dir / "profile.png")),
        FigureSpec("sweep", (str(root / "sweep_summary.csv"),),
                   str(out_dir / "sweep.png")),
        FigureSpec("eigen", (str(root / "eigen_resid.csv"),),
                   str(out_dir / "eigen.png")),
        FigureSpec("lyapunov", (str(root / "lyap_median.csv"),
                                str(root / "lyap_h1.csv")),
                   str(out_dir / "lyapunov.png")),
    ]


def test_a11_five_kinds_render_deterministically(solver_outputs, tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    first.mkdir()
    second.mkdir()
    for spec in figure_specs(solver_outputs, first):
        render(spec)
    for spec in figure_specs(solver_outputs, second):
        render(spec)
    names = ("haff.png", "profile.png", "sweep.png", "eigen.png",
             "lyapunov.png")
    identical = all((first / n).read_bytes() == (second / n).read_bytes()
                    for n in names)
    sizes = {n: (first / n).stat().st_size for n in names}
    ok = identical and all(s > 5000 for s in sizes.values())
    print(f"A11 {'PASS' if ok else 'FAIL'}: five kinds rendered "
          f"deterministically from solver outputs, sizes {sizes}")
    assert ok


def test_a11_corrupted_header_rejected(solver_outputs, tmp_path):
    src = (solver_outputs / "sweep_summary.csv").read_text().splitlines()
    src[0] = src[0].replace("corrected", "corruptd")
    bad = tmp_path / "sweep_bad.csv"
    bad.write_text("\n".join(src) + "\n")
    proc = subprocess.run(
        [sys.executable, "-m", "gk_plot.cli", "sweep", "--in", str(bad),
         "--out", str(tmp_path / "x.png")],
        capture_output=True, text=True)
    ok = proc.returncode == 2 and "corrected" in proc.stderr
    print(f"A11 {'PASS' if ok else 'FAIL'}: corrupted header rejected with "
          f"exit {proc.returncode}: {proc.stderr.strip()}")
    assert ok
