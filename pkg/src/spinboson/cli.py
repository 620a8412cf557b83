"""Command-line front end: built-in figure scenarios, config files, CSV output.

    spinboson list
    spinboson run fig1a [--set theta=0,pi/2] [--outdir DIR] [--jobs N]
    spinboson run my.cfg
    spinboson validate my.cfg

Output goes to --outdir, else $SPINBOSON_OUTDIR, else ./spinboson-out, inside
a subdirectory named after the scenario.  Exit status: 0 ok, 1 bad
configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import MISSING, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .bath import BathError, BathParams, QuadratureError, SystemParams
from .battery import battery_series
from .diagnostics import (
    SteadyStateError,
    blp_scan,
    coherence_series,
    fidelity,
    pc_steady_state,
    qsl_time,
    rhp_g_series,
    thermal_state,
    trace_distance,
)
from .dynamics import Equation, QubitState, evolve

OUTDIR_ENV = "SPINBOSON_OUTDIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

OUTPUTS = ("energy", "ergotropy", "blp", "rhp", "qsl", "coherence", "fidelity", "battery-full")
PRESETS = {
    "plus": QubitState.plus,
    "excited": QubitState.excited,
    "ground": QubitState.ground,
    "mixed": QubitState.mixed,
    "charged": QubitState.charged,
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    """One figure's worth of runs; tuple fields are swept as a product."""

    name: str
    figure: str
    equations: tuple[str, ...]
    omega0: float
    thetas: tuple[float, ...]
    couplings: tuple[float, ...]
    cutoff: float
    temperature: float
    initial_state: str | tuple[float, float, float]
    t_end: float
    dt: float
    outputs: tuple[str, ...]
    matsubara_terms: int = 1000
    tail_tol: float = 1e-10
    stride: int = 10
    entropy_base: float = 2.0

    def validate(self) -> "Scenario":
        if not self.outputs:
            raise ConfigError("outputs is empty; nothing to compute")
        for o in self.outputs:
            if o not in OUTPUTS:
                raise ConfigError(f"unknown output {o!r}; choose from {', '.join(OUTPUTS)}")
        for e in self.equations:
            Equation.parse(e)
        if not self.equations:
            raise ConfigError("equation list is empty")
        if not (self.t_end > 0 and self.dt > 0 and self.dt < self.t_end):
            raise ConfigError(f"need 0 < dt < t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not self.thetas or not self.couplings:
            raise ConfigError("theta and coupling lists must be non-empty")
        self.initial()
        for th in self.thetas:
            SystemParams(self.omega0, th)
        for c in self.couplings:
            self.bath(c)
        return self

    def initial(self) -> QubitState:
        if isinstance(self.initial_state, str):
            try:
                return PRESETS[self.initial_state]()
            except KeyError:
                raise ConfigError(
                    f"unknown initial state {self.initial_state!r}; presets are {', '.join(sorted(PRESETS))}"
                ) from None
        s = QubitState.from_bloch(self.initial_state)
        if s.radius > 1 + 1e-12:
            raise ConfigError(f"initial Bloch vector has norm {s.radius:.6g} > 1")
        return s

    def bath(self, coupling: float) -> BathParams:
        return BathParams(coupling, self.cutoff, self.temperature, self.matsubara_terms, self.tail_tol)

    def branches(self) -> list[tuple[str, float, float]]:
        return [(e, th, c) for e in self.equations for c in self.couplings for th in self.thetas]


PI = math.pi

# t_end per scenario is long enough for every curve to flatten out
SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario("fig1a", "Fig. 1(a) trace distance, WCSB", ("WCSB",), 1.25, (0.0, PI / 4, PI / 2), (0.4,), 15.0, 0.2, "plus", 15.0, 1e-3, ("blp",)),
        Scenario("fig1b", "Fig. 1(b) trace distance, PC", ("PC",), 1.25, (0.0, PI / 4, PI / 2), (0.4,), 15.0, 0.2, "plus", 15.0, 1e-3, ("blp",)),
        Scenario("fig2a", "Fig. 2(a) RHP g(t), WCSB", ("WCSB",), 2.25, (0.0, PI / 4, PI / 2), (0.4,), 15.0, 0.2, "charged", 10.0, 1e-3, ("rhp",)),
        Scenario("fig2b", "Fig. 2(b) RHP g(t), PC", ("PC",), 2.25, (0.0, PI / 4, PI / 2), (0.4,), 15.0, 0.2, "charged", 10.0, 1e-3, ("rhp",)),
        Scenario("fig3", "Fig. 3 RHP g(t) vs coupling, WCSB", ("WCSB",), 2.25, (0.0,), (0.4, 0.1, 0.01), 15.0, 1.0, "charged", 10.0, 1e-3, ("rhp",)),
        Scenario("fig4a", "Fig. 4(a) QSL time and coherence, WCSB", ("WCSB",), 1.25, (0.0, PI / 4, PI / 2), (0.4,), 15.0, 0.2, "charged", 20.0, 1e-3, ("qsl", "coherence")),
        Scenario("fig4b", "Fig. 4(b) QSL time and coherence, PC", ("PC",), 2.25, (0.0, PI / 4, PI / 2), (0.4,), 15.0, 0.2, "charged", 20.0, 1e-3, ("qsl", "coherence")),
        Scenario("fig5", "Fig. 5 fidelity to the thermal state", ("WCSB", "PC"), 1.25, (PI / 4,), (0.1,), 15.0, 0.5, "charged", 100.0, 1e-3, ("fidelity",)),
        Scenario("fig6", "Fig. 6 energy and instantaneous power", ("WCSB",), 1.25, (0.0, PI / 2), (0.4,), 15.0, 0.2, "charged", 20.0, 1e-3, ("energy",)),
        Scenario("fig7a", "Fig. 7(a) ergotropy split, dissipative", ("WCSB",), 1.25, (0.0,), (0.4,), 15.0, 0.2, "charged", 20.0, 1e-3, ("ergotropy",)),
        Scenario("fig7b", "Fig. 7(b) ergotropy split, dephasing", ("WCSB",), 1.25, (PI / 2,), (0.4,), 15.0, 0.2, "charged", 20.0, 1e-3, ("ergotropy",)),
        Scenario("fig8", "Fig. 8 ergotropy, anti-ergotropy, capacity", ("WCSB",), 2.5, (0.0, PI / 4, PI / 2), (0.1,), 10.0, 1.0, "charged", 60.0, 1e-3, ("battery-full",)),
        Scenario("figC1", "Fig. C1 battery under the PC equation", ("PC",), 2.25, (0.0,), (0.4,), 15.0, 0.2, "charged", 25.0, 1e-3, ("battery-full",)),
    ]
}


# ---------------------------------------------------------------------------
# config parsing

_ANGLE = re.compile(r"^\s*(?:(?P<num>[0-9.eE+-]+)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>[0-9.eE+-]+))?\s*$")


def parse_number(text: str) -> float:
    """A float, or a multiple of pi such as ``pi/4`` or ``3*pi/8``."""
    t = text.strip()
    m = _ANGLE.match(t)
    try:
        if m:
            num = float(m.group("num")) if m.group("num") else 1.0
            den = float(m.group("den")) if m.group("den") else 1.0
            return num * math.pi / den
        return float(t)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


_KEYS = {
    "name": ("name", str),
    "figure": ("figure", str),
    "equation": ("equations", lambda v: tuple(Equation.parse(e).value for e in _list(v))),
    "omega0": ("omega0", parse_number),
    "theta": ("thetas", lambda v: tuple(parse_number(x) for x in _list(v))),
    "coupling": ("couplings", lambda v: tuple(parse_number(x) for x in _list(v))),
    "cutoff": ("cutoff", parse_number),
    "temperature": ("temperature", parse_number),
    "initial_state": ("initial_state", lambda v: v.strip() if v.strip() in PRESETS else tuple(parse_number(x) for x in _list(v))),
    "t_end": ("t_end", parse_number),
    "dt": ("dt", parse_number),
    "outputs": ("outputs", lambda v: tuple(_list(v))),
    "matsubara_terms": ("matsubara_terms", int),
    "tail_tol": ("tail_tol", parse_number),
    "stride": ("stride", int),
    "entropy_base": ("entropy_base", lambda v: math.e if v.strip() == "e" else parse_number(v)),
}


def apply_setting(base: dict, key: str, value: str, line: int | None = None, source: str | None = None) -> None:
    key = key.strip()
    if key not in _KEYS:
        raise ConfigError(f"unknown key {key!r}", line, source)
    field_name, conv = _KEYS[key]
    try:
        v = conv(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {exc}", line, source) from None
    if key == "initial_state" and isinstance(v, tuple) and len(v) != 3:
        raise ConfigError("initial_state needs a preset name or three Bloch components", line, source)
    base[field_name] = v


def parse_config(text: str, source: str = "<config>") -> Scenario:
    """Flat ``key = value`` lines; ``#`` starts a comment.

    ``scenario = NAME`` starts from a built-in scenario; otherwise every
    field must be given.
    """
    values: dict = {}
    base: Scenario | None = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", n, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "scenario":
            if value not in SCENARIOS:
                raise ConfigError(f"unknown scenario {value!r}", n, source)
            base = SCENARIOS[value]
            continue
        apply_setting(values, key, value, n, source)
    if base is not None:
        scen = replace(base, **values)
    else:
        missing = [f.name for f in fields(Scenario) if f.default is MISSING and f.name not in values and f.name != "figure"]
        if missing:
            raise ConfigError(f"missing keys: {', '.join(missing)} (or give 'scenario = NAME')", None, source)
        values.setdefault("figure", "custom")
        scen = Scenario(**values)
    try:
        return scen.validate()
    except ConfigError:
        raise
    except (BathError, ValueError) as exc:
        raise ConfigError(str(exc), None, source) from None


# ---------------------------------------------------------------------------
# running


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _label(x: float) -> str:
    return f"{x:.6g}".replace(".", "p").replace("-", "m")


def branch_tag(eq: str, theta: float, coupling: float) -> str:
    return f"{eq}_theta{_label(theta)}_c{_label(coupling)}"


def run_branch(scen: Scenario, eq: str, theta: float, coupling: float) -> dict:
    """All requested quantities for one (equation, theta, coupling); returns CSV payloads."""
    sys_ = SystemParams(scen.omega0, theta)
    bath = scen.bath(coupling)
    k = scen.stride
    files: dict[str, tuple[list[str], list[np.ndarray]]] = {}
    warnings: list[str] = []
    notes: list[str] = []
    tag = branch_tag(eq, theta, coupling)
    violated = False
    need_traj = any(o in scen.outputs for o in ("energy", "ergotropy", "qsl", "coherence", "fidelity", "battery-full"))
    traj = evolve(eq, sys_, bath, scen.initial(), scen.t_end, scen.dt) if need_traj else None
    if traj is not None:
        warnings += [f"{tag}: {w}" for w in traj.warnings]
        if not np.all(np.isfinite(traj.bloch)):
            raise NumericalError(f"{tag}: non-finite state")
        t = traj.times[::k]
        flags = traj.flags[::k]
        violated = traj.positivity_violated
    if "blp" in scen.outputs:
        res = blp_scan(eq, sys_, bath, scen.t_end, scen.dt)
        slope = np.gradient(res.distance, res.times)
        warnings += [f"{tag}: {w}" for w in res.warnings]
        violated = violated or res.positivity_violated
        files["blp"] = (["t", "trace_distance", "increasing"], [res.times[::k], res.distance[::k], (slope > 1e-9)[::k].astype(int)])
    if "rhp" in scen.outputs:
        n = int(round(scen.t_end / scen.dt))
        times = np.linspace(0.0, scen.t_end, n + 1)[::k]
        files["rhp"] = (["t", "g"], [times, rhp_g_series(times, eq, sys_, bath)])
    if "energy" in scen.outputs or "ergotropy" in scen.outputs or "battery-full" in scen.outputs:
        b = battery_series(traj, sys_)
        if "energy" in scen.outputs:
            files["energy"] = (["t", "energy", "inst_power", "flags"], [t, b.energy[::k], b.inst_power[::k], flags])
        if "ergotropy" in scen.outputs:
            files["ergotropy"] = (
                ["t", "ergotropy", "erg_incoh", "erg_coh", "charging_power", "flags"],
                [t, b.ergotropy[::k], b.erg_incoh[::k], b.erg_coh[::k], b.charging_power[::k], flags],
            )
        if "battery-full" in scen.outputs:
            names = ["energy", "inst_power", "ergotropy", "erg_incoh", "erg_coh", "anti_ergotropy", "capacity", "charging_power"]
            files["battery-full"] = (
                ["t"] + names + ["degenerate", "flags"],
                [t] + [getattr(b, f)[::k] for f in names] + [b.degenerate[::k].astype(int), flags],
            )
    if "qsl" in scen.outputs:
        q = qsl_time(traj)
        sel = slice(k - 1, None, k)  # q starts at the first sample after t = 0
        files["qsl"] = (
            ["t", "bures_angle", "lambda_op", "lambda_tr", "lambda_hs", "tau_qsl", "unreliable"],
            [q.t[sel], q.bures_angle[sel], q.lam_op[sel], q.lam_tr[sel], q.lam_hs[sel], q.tau_qsl[sel], q.unreliable[sel].astype(int)],
        )
    if "coherence" in scen.outputs:
        files["coherence"] = (["t", "coherence", "flags"], [t, coherence_series(traj.bloch[::k], scen.entropy_base), flags])
    if "fidelity" in scen.outputs:
        th = thermal_state(sys_, scen.temperature)
        f = np.array([fidelity(QubitState(*map(float, b)), th) for b in traj.bloch[::k]])
        files["fidelity"] = (["t", "fidelity", "flags"], [t, f, flags])
        if Equation.parse(eq) is not Equation.WCSB:
            try:
                ss = pc_steady_state(sys_, bath)
                notes.append(f"{tag}: analytic steady state z = {ss.bloch_z:.12g}, trace distance to thermal {trace_distance(ss, th):.3g}")
            except SteadyStateError as exc:
                notes.append(f"{tag}: {exc}")
    for name, (_, cols) in files.items():
        for c in cols:
            if not np.all(np.isfinite(np.asarray(c, dtype=float))):
                raise NumericalError(f"{tag}: non-finite values in {name}")
    return {"tag": tag, "files": files, "warnings": warnings, "notes": notes, "violated": bool(violated)}


def _run_branch_args(args):
    return run_branch(*args)


def plot_script(scen: Scenario, written: list[tuple[str, str, str]]) -> str:
    """A standalone matplotlib script drawing every CSV of the run."""
    lines = [
        "import csv",
        "from pathlib import Path",
        "",
        "import matplotlib",
        'matplotlib.use("Agg")',
        "import matplotlib.pyplot as plt",
        "",
        "",
        "HERE = Path(__file__).resolve().parent",
        "",
        "",
        "def load(name):",
        "    with open(HERE / name) as fh:",
        "        rows = list(csv.reader(fh))",
        "    head, body = rows[0], rows[1:]",
        "    return {h: [float(r[i]) for r in body] for i, h in enumerate(head)}",
        "",
        "",
        "FILES = [",
    ]
    for quantity, tag, fname in written:
        lines.append(f"    ({quantity!r}, {tag!r}, {fname!r}),")
    lines += [
        "]",
        "",
        "quantities = sorted({q for q, _, _ in FILES})",
        "for q in quantities:",
        "    group = [(tag, f) for qq, tag, f in FILES if qq == q]",
        "    data = [(tag, load(f)) for tag, f in group]",
        '    cols = [c for c in data[0][1] if c not in ("t", "flags", "unreliable", "degenerate", "increasing")]',
        "    fig, axes = plt.subplots(len(cols), 1, figsize=(7, 2.4 * len(cols)), sharex=True, squeeze=False)",
        "    for ax, c in zip(axes[:, 0], cols):",
        "        for tag, d in data:",
        "            ax.plot(d['t'], d[c], label=tag)",
        "        ax.set_ylabel(c)",
        "    axes[0, 0].legend(fontsize='small')",
        "    axes[-1, 0].set_xlabel('t')",
        f"    fig.suptitle({scen.figure!r} + ': ' + q)",
        "    fig.tight_layout()",
        f"    fig.savefig(HERE / ({scen.name!r} + '_' + q + '.png'), dpi=120)",
        "",
    ]
    return "\n".join(lines)


def run_scenario(scen: Scenario, outdir: Path, jobs: int = 1, log=None) -> int:
    log = log or sys.stderr
    scen.validate()
    tasks = [(scen, e, th, c) for e, th, c in scen.branches()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_branch_args, tasks))
    else:
        results = [run_branch(*a) for a in tasks]
    target = outdir / scen.name
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        for quantity, (header, cols) in res["files"].items():
            fname = f"{scen.name}_{quantity}_{res['tag']}.csv"
            write_csv(target / fname, header, cols)
            written.append((quantity, res["tag"], fname))
    (target / f"plot_{scen.name}.py").write_text(plot_script(scen, written))
    for r in results:
        for n in r["notes"]:
            print(f"note: {n}", file=log)
        for w in r["warnings"]:
            print(f"warning: {w}", file=log)
    violated = [r["tag"] for r in results if r["violated"]]
    if violated:
        print(f"warning: positivity violated beyond the clamp in {', '.join(violated)}", file=log)
    print(f"wrote {len(written)} CSV files and plot_{scen.name}.py to {target}", file=log)
    return EXIT_OK


def list_scenarios() -> str:
    rows = []
    for name in sorted(SCENARIOS):
        s = SCENARIOS[name]
        thetas = ",".join(_angle_text(t) for t in s.thetas)
        couplings = ",".join(f"{c:g}" for c in s.couplings)
        rows.append(
            f"{name:<6}  {s.figure:<44}  eq={'+'.join(s.equations):<8} w0={s.omega0:g} T={s.temperature:g} "
            f"Omega={s.cutoff:g} coupling={couplings} theta={thetas} t_end={s.t_end:g} dt={s.dt:g} "
            f"outputs={','.join(s.outputs)}"
        )
    return "\n".join(rows)


def _angle_text(theta: float) -> str:
    for den in (1, 2, 3, 4, 6, 8):
        for num in range(0, 2 * den + 1):
            if abs(theta - num * math.pi / den) < 1e-12:
                if num == 0:
                    return "0"
                head = "pi" if num == 1 else f"{num}pi"
                return head if den == 1 else f"{head}/{den}"
    return f"{theta:g}"


def _resolve(target: str, settings: list[str]) -> Scenario:
    if target in SCENARIOS:
        values: dict = {}
        scen = SCENARIOS[target]
    else:
        path = Path(target)
        if not path.is_file():
            raise ConfigError(f"{target!r} is neither a built-in scenario nor a config file")
        scen = parse_config(path.read_text(), str(path))
        values = {}
    for n, item in enumerate(settings, start=1):
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}", n, "--set")
        key, value = item.split("=", 1)
        apply_setting(values, key, value, n, "--set")
    scen = replace(scen, **values)
    try:
        return scen.validate()
    except ConfigError:
        raise
    except (BathError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinboson", description="Spin-boson TCL2 dynamics, diagnostics and battery metrics.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a built-in scenario or a config file")
    r.add_argument("scenario", help="built-in scenario name or path to a key = value config file")
    r.add_argument("--set", dest="settings", action="append", default=[], metavar="KEY=VALUE", help="override a setting")
    r.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or ./spinboson-out)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for sweep branches")
    sub.add_parser("list", help="list built-in scenarios")
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_scenarios())
        return EXIT_OK
    try:
        if args.command == "validate":
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"no such file: {args.config}")
            scen = parse_config(path.read_text(), str(path))
            print(f"ok: {scen.name} with {len(scen.branches())} branch(es), outputs {', '.join(scen.outputs)}")
            return EXIT_OK
        scen = _resolve(args.scenario, args.settings)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.outdir or os.environ.get(OUTDIR_ENV) or "spinboson-out")
    try:
        return run_scenario(scen, outdir, max(1, args.jobs))
    except (NumericalError, QuadratureError, SteadyStateError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
