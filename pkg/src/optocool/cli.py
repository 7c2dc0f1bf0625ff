"""Command line entry point: ``optocool {stark-map,branching,cool,trajectories}``.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure, 4 I/O error.
"""
import argparse
import copy
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, DomainError, NumericError, StatisticsError
from .molphys import RotationalState, dressed_branching, stark_eigensystem, zero_field_branching_exact

log = logging.getLogger("optocool")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _num(x):
    # shortest round-trip repr keeps output byte-stable across runs
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class _CsvSink:
    """Row writer that flushes after every row so an aborted run leaves usable output."""

    def __init__(self, path, header):
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(header)

    def row(self, *vals):
        self.w.writerow([v if isinstance(v, str) else _num(v) for v in vals])
        self.fh.flush()

    def close(self):
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _time_tag(t):
    return f"{t:g}"


# --- subcommands -----------------------------------------------------------

def cmd_stark_map(cfg, out):
    spec = cfgmod.molecule(cfg)
    sm = cfg["stark_map"]
    with _CsvSink(out / "starkmap.csv", ["field_V_per_m", "K", "M", "level_index", "energy_J"]) as sink:
        for K in sm["K_values"]:
            for M in sm["M_values"]:
                j_min = max(abs(K), abs(M))
                for f in sm["fields_V_per_m"]:
                    blk = stark_eigensystem(spec, K, M, float(f), j_max=j_min + sm["j_extra"])
                    for n in range(min(sm["n_levels"], blk.eigenvalues.size)):
                        sink.row(float(f), K, M, n, float(blk.eigenvalues[n]))


def cmd_branching(cfg, out):
    spec = cfgmod.molecule(cfg)
    br = cfg["branching"]
    exc = RotationalState(*br["excited"])
    report = {
        "molecule": spec.name,
        "excited": br["excited"],
        "zero_field_exact": [
            {"lower": [s.v, s.J, s.K, s.M], "fraction": str(fr)}
            for s, fr in zero_field_branching_exact(exc).items()
        ],
        "fields": [],
    }
    for f in br["fields_V_per_m"]:
        res = dressed_branching(spec, float(f), exc, high_j=br["high_j"])
        entries = sorted(res.table.entries, key=lambda e: (e[0].J, e[0].M))
        report["fields"].append({
            "field_V_per_m": float(f),
            "sum": float(sum(w for _, w in entries)),
            "leak_high_j": res.leak_high_j,
            "branching": [{"lower": [s.v, s.J, s.K, s.M], "fraction": w}
                          for s, w in entries if w >= 1e-12],
        })
    _dump_json(out / "branching.json", report)


def cmd_cool(cfg, out):
    from .ratesim import run_cooling

    cc = cfgmod.build_cooling(cfg)
    header = ["time_s", "T80_K", "field_step_V_per_m", "N_total", "decays_cum"]
    last = [None]
    with _CsvSink(out / "cooling.csv", header) as sink:
        def progress(t, rec):
            if rec is not last[0]:
                last[0] = rec
                sink.row(rec.time, rec.temperature_p80, rec.field_step, rec.total_number,
                         rec.cumulative_decays_per_molecule)

        result = run_cooling(cc, progress=progress)

    speeds = result.config.grid.speeds
    for t, ens in sorted(result.snapshots.items()):
        with _CsvSink(out / f"hist_{_time_tag(t)}.csv",
                      ["region", "state", "v_m_per_s", "population"]) as sink:
            pops = ens.populations
            for r in range(pops.shape[0]):
                for a in range(pops.shape[1]):
                    nz = np.nonzero(pops[r, a])[0]
                    for k in nz:
                        sink.row(r + 1, a, float(speeds[k]), float(pops[r, a, k]))
    return result


def cmd_trajectories(cfg, out):
    from .trapsim import default_tau_grid, fit_mixing_probability, run_ensemble

    spec = cfgmod.molecule(cfg)
    geom = cfgmod.build_geometry(cfg)
    ec = cfgmod.build_ensemble(cfg)
    tau_max, fine_max, fit_max = cfgmod.tau_window(cfg)
    tau = default_tau_grid(ec.sample_dt, fine_max, tau_max)
    with _CsvSink(out / "collisions.csv",
                  ["particle", "seed", "collisions", "duration_s", "lost", "max_energy_error"]) as sink:
        def progress(i, s):
            sink.row(i - 1, str(s["seed"]), s["collisions"], s["duration"], s["lost"],
                     s["max_energy_error"])
            log.info("particle %d/%d done", i, ec.n_particles)

        res = run_ensemble(spec, geom, ec, tau, progress=progress)
    ser = res.series
    with _CsvSink(out / "correlation.csv", ["tau_s", "c_x", "c_y", "c_z"]) as sink:
        for row in zip(ser.tau, ser.c_x, ser.c_y, ser.c_z):
            sink.row(*row)
    comps = (0, 1, 2) if geom.top_plate_rotated else (0, 1)
    report = {"seed": ec.seed, "n_particles": ser.n_particles,
              "n_lost": int(sum(s["lost"] for s in res.trajectories)),
              "collision_rate_per_s": ser.collision_rate,
              "max_energy_error": max(s["max_energy_error"] for s in res.trajectories)}
    try:
        fit = fit_mixing_probability(ser, comps, tau_max=fit_max)
        report.update({"q": fit.q, "q_stderr": fit.q_stderr, "q_95ci": list(fit.interval),
                       "c_inf_m2_per_s2": dict(zip("xyz", fit.c_inf)),
                       "components": ["xyz"[i] for i in comps],
                       "fit_tau_window_s": list(fit.tau_range)})
    finally:
        _dump_json(out / "mixing_fit.json", report)
    return res


COMMANDS = {
    "stark-map": cmd_stark_map,
    "branching": cmd_branching,
    "cool": cmd_cool,
    "trajectories": cmd_trajectories,
}


def build_parser():
    p = argparse.ArgumentParser(prog="optocool", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--out", help="output directory (overrides output_dir)")
        s.add_argument("--seed", type=int)
        if name in ("cool", "trajectories"):
            s.add_argument("--duration", type=float, help="simulated time in seconds")
    return p


def _apply_overrides(user, args):
    user = copy.deepcopy(user)
    if args.seed is not None:
        user["seed"] = args.seed
    if args.out is not None:
        user["output_dir"] = args.out
    if getattr(args, "duration", None) is not None:
        section = "cool" if args.command == "cool" else "trajectories"
        user.setdefault(section, {})["duration_s"] = args.duration
    return user


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        base_dir = None
        user = {}
        if args.config:
            path = Path(args.config)
            try:
                user = json.loads(path.read_text())
            except FileNotFoundError:
                raise ConfigError(f"config file {path} does not exist") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
            base_dir = path.parent
        cfg = cfgmod.resolve(_apply_overrides(user, args), base_dir=base_dir)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "resolved_config.json", cfgmod.public(cfg))
        COMMANDS[args.command](cfg, out)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, StatisticsError) as exc:
        diag = getattr(exc, "diagnostics", None)
        print(f"numerical failure: {exc}" + (f" {diag}" if diag else ""), file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
