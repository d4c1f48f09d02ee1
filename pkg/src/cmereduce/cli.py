"""Command-line front end.

Exit status: 0 on success, 1 on a domain error (bad network, unbounded
state space, numerical failure), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dynamics import compare_full_reduced, integrate, moments
from .faststructure import analyze, condensation_dot
from .io import open_output, write_csv, write_matrix_market
from .network import (
    NetworkError,
    NoFastSubsystem,
    ParseError,
    conservation_basis,
    deficiency,
    fast_invariant_matrix,
    load_network,
    rational_rank,
    structure,
)
from .reduction import reduce_network, reduced_moments
from .ssa import OnTheFlyChain, PrecomputedChain, ensemble, ssa_exact, ssa_slow
from .statespace import DEFAULT_STATE_BUDGET, explore

__all__ = ["RunConfig", "UsageError", "build_parser", "config_from_args", "run", "main"]

log = logging.getLogger(__name__)


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    input: Path
    out: Path | None = None
    states_out: Path | None = None
    fast_out: Path | None = None
    slow_out: Path | None = None
    table_out: Path | None = None
    l_out: Path | None = None
    pi_out: Path | None = None
    dist_out: Path | None = None
    paths_out: Path | None = None
    t_end: float = 10.0
    steps: int = 100
    realizations: int = 1000
    seed: int = 0
    grid: int = 20
    max_states: int = DEFAULT_STATE_BUDGET
    threads: int = 1
    caps: dict[str, int] = field(default_factory=dict)
    p0: str = "state"
    reduced: bool = False
    slow_scale: bool = False
    on_the_fly: bool = False
    full_operators: bool = False
    dot: bool = False

    def __post_init__(self):
        if not self.t_end > 0:
            raise UsageError("--t-end must be positive")
        flags = {"steps": "--steps", "realizations": "--n", "grid": "--grid", "max_states": "--max-states",
                 "threads": "--threads"}
        for name, flag in flags.items():
            if getattr(self, name) < 1:
                raise UsageError(f"{flag} must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if any(v < 1 for v in self.caps.values()):
            raise UsageError("caps must be positive")
        if self.p0 not in ("state", "uniform"):
            raise UsageError("--p0 must be 'state' or 'uniform'")
        if self.on_the_fly and not self.slow_scale:
            raise UsageError("--on-the-fly requires --slow-scale")
        if self.full_operators and self.subcommand != "reduce":
            raise UsageError("--full-operators only applies to reduce")


def _parse_caps(text: str | None) -> dict[str, int]:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = int(value)
        except ValueError:
            raise UsageError(f"bad cap {item!r}; expected NAME=COUNT") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmereduce",
        description="Slow-scale reduction of chemical master equations with fast and slow reactions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for ensemble runs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input", type=Path, help="network file")
        p.add_argument("--cap", dest="caps", help="override caps, e.g. A=30,B=30")
        p.add_argument("--max-states", type=int, default=DEFAULT_STATE_BUDGET)
        return p

    add("netinfo", "stoichiometry, ranks, deficiency and conservation laws")
    p = add("states", "enumerate accessible states and the generator")
    p.add_argument("--out", type=Path, help="K in Matrix Market format")
    p.add_argument("--states", dest="states_out", type=Path, help="state table CSV")
    p.add_argument("--fast-out", type=Path)
    p.add_argument("--slow-out", type=Path)
    p = add("structure", "fast components and strong components")
    p.add_argument("--dot", action="store_true", help="emit the condensation in DOT format")
    p.add_argument("--out", type=Path)
    p = add("reduce", "reduced slow generator")
    p.add_argument("--out", type=Path, help="reduced generator (Matrix Market); default stdout")
    p.add_argument("--table", dest="table_out", type=Path, help="aggregated-state table CSV")
    p.add_argument("--full-operators", action="store_true", help="also write L and Pi")
    p.add_argument("--l-out", type=Path, default=Path("L.mtx"))
    p.add_argument("--pi-out", type=Path, default=Path("Pi.mtx"))
    for name, text in (("solve", "integrate the master equation"), ("compare", "full vs reduced error report")):
        p = add(name, text)
        p.add_argument("--t-end", type=float, required=True)
        p.add_argument("--steps", type=int, required=True)
        p.add_argument("--out", type=Path)
        if name == "solve":
            p.add_argument("--reduced", action="store_true")
            p.add_argument("--p0", default="state", choices=["state", "uniform"])
            p.add_argument("--dist-out", type=Path)
    p = add("ssa", "stochastic simulation ensemble")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--n", dest="realizations", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--slow-scale", action="store_true")
    p.add_argument("--on-the-fly", action="store_true", help="build slow rates lazily per visited simplex")
    p.add_argument("--paths-out", type=Path)
    p.add_argument("--out", type=Path)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    keys = RunConfig.__dataclass_fields__
    values = {k: v for k, v in vars(args).items() if k in keys and v is not None}
    values["caps"] = _parse_caps(getattr(args, "caps", None))
    return RunConfig(**values)


def _load(cfg: RunConfig):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        net = load_network(cfg.input)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if cfg.caps:
        caps = list(net.caps) if net.caps is not None else None
        if caps is None:
            missing = set(net.species_names) - set(cfg.caps)
            if missing:
                raise NetworkError(f"--cap must cover every species; missing {', '.join(sorted(missing))}")
            caps = [0] * net.m
        for name, value in cfg.caps.items():
            try:
                caps[net.species_index(name)] = value
            except KeyError:
                raise NetworkError(f"--cap names unknown species {name!r}") from None
        net = net.with_caps(caps)
    return net


def _cmd_netinfo(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    st = structure(net)
    print(f"species: {', '.join(net.species_names)}", file=out)
    print(f"m={net.m}", file=out)
    print(f"r={net.r}", file=out)
    print(f"p={net.p}", file=out)
    print(f"rank_E={rational_rank(st.incidence)}", file=out)
    print(f"rank_nuE={rational_rank(st.nu_e)}", file=out)
    print(f"deficiency={deficiency(net)}", file=out)
    for row in conservation_basis(st.nu_e):
        print("conservation: " + " ".join(str(x) for x in row), file=out)
    try:
        for row in fast_invariant_matrix(net):
            print("fast_invariant: " + " ".join(str(int(x)) for x in row), file=out)
    except NoFastSubsystem:
        print("fast_invariant: none (no fast reactions)", file=out)


def _cmd_states(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    space, split = explore(net, cfg.max_states)
    if cfg.out is not None:
        write_matrix_market(cfg.out, split.full.matrix)
    if cfg.fast_out is not None:
        write_matrix_market(cfg.fast_out, split.fast.matrix)
    if cfg.slow_out is not None:
        write_matrix_market(cfg.slow_out, split.slow.matrix)
    if cfg.states_out is not None:
        write_csv(cfg.states_out, ["index", *net.species_names], ([i, *space.state(i)] for i in range(space.size)))
    print(f"states={space.size}", file=out)
    print(f"nnz={split.full.matrix.nnz}", file=out)


def _cmd_structure(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    space, split = explore(net, cfg.max_states)
    try:
        a_f = fast_invariant_matrix(net)
    except NoFastSubsystem:
        a_f = None
    fs = analyze(space, split, a_f)
    if cfg.dot:
        with open_output(cfg.out) as fh:
            fh.write(condensation_dot(fs, space))
        return
    labels = {s.absorbing_scc: s.label for s in fs.simplexes}
    rows = []
    for comp in fs.components:
        for scc in comp.sccs:
            label = labels.get(scc.id)
            text = "" if label is None else " ".join(str(x) for x in label)
            rows.append([comp.id, scc.id, scc.kind.value, len(scc.member_states), text])
    write_csv(cfg.out, ["component", "scc", "kind", "size", "ntilde"], rows)


def _cmd_reduce(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    red = reduce_network(net, cfg.max_states)
    write_matrix_market(cfg.out, red.reduced.k_tilde.matrix)
    rows = []
    for a in red.reduced.aggregated_states:
        label = "" if a.ntilde is None else " ".join(str(x) for x in a.ntilde)
        rows.append([a.index, a.scc_id, " ".join(str(x) for x in a.representative_state), label])
    if cfg.table_out is not None:
        write_csv(cfg.table_out, ["index", "scc_id", "representative_state", "ntilde"], rows)
    if cfg.full_operators:
        write_matrix_market(cfg.l_out, red.pair.L)
        write_matrix_market(cfg.pi_out, red.pair.Pi)


def _times(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_end, cfg.steps + 1)


def _cmd_solve(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    times = _times(cfg)
    names = net.species_names
    header = ["time", *(f"mean_{s}" for s in names), *(f"var_{s}" for s in names)]
    if cfg.reduced:
        red = reduce_network(net, cfg.max_states)
        if cfg.p0 == "uniform":
            p0 = np.full(red.space.size, 1.0 / red.space.size)
            pt0 = np.asarray(red.pair.L @ p0).ravel()
        else:
            pt0 = red.initial_reduced()
        traj = integrate(red.reduced.k_tilde, pt0, times)
        stats = [reduced_moments(red.pair, red.space, p) for p in traj.distributions]
    else:
        space, split = explore(net, cfg.max_states)
        p0 = np.zeros(space.size)
        if cfg.p0 == "uniform":
            p0[:] = 1.0 / space.size
        else:
            p0[0] = 1.0
        traj = integrate(split.full, p0, times)
        stats = [moments(space, p) for p in traj.distributions]
    write_csv(cfg.out, header, ([t, *mean, *var] for t, (mean, var) in zip(times, stats)))
    if cfg.dist_out is not None:
        write_csv(
            cfg.dist_out,
            ["time", *(f"p{i}" for i in range(traj.dim))],
            ([t, *p] for t, p in zip(times, traj.distributions)),
        )


def _cmd_compare(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    red = reduce_network(net, cfg.max_states)
    times = _times(cfg)
    p0 = np.zeros(red.space.size)
    p0[0] = 1.0
    full = integrate(red.split.full, p0, times)
    reduced = integrate(red.reduced.k_tilde, red.initial_reduced(), times)
    rep = compare_full_reduced(full, red.pair, reduced, red.space)
    names = net.species_names
    header = ["time", "prob_error", *(f"mean_err_{s}" for s in names), *(f"var_err_{s}" for s in names)]
    write_csv(
        cfg.out,
        header,
        ([t, e, *me, *ve] for t, e, me, ve in zip(times, rep.prob_error, rep.mean_error, rep.var_error)),
    )


def _cmd_ssa(cfg: RunConfig, out) -> None:
    net = _load(cfg)
    grid = np.linspace(0.0, cfg.t_end, cfg.grid)
    chain = None
    if cfg.slow_scale:
        chain = OnTheFlyChain(net) if cfg.on_the_fly else PrecomputedChain(reduce_network(net, cfg.max_states))
    stats = ensemble(
        net, cfg.realizations, grid, cfg.seed, "slow" if cfg.slow_scale else "exact", chain, cfg.threads
    )
    names = net.species_names
    header = ["time"] + [f"{k}_{s}" for s in names for k in ("mean", "std")]
    rows = []
    for g, t in enumerate(grid):
        row = [t]
        for i in range(net.m):
            row += [stats.mean[g, i], stats.std[g, i]]
        rows.append(row)
    write_csv(cfg.out, header, rows)
    if stats.truncated_count:
        print(f"warning: {stats.truncated_count} realizations left the cap box", file=sys.stderr)
    if cfg.paths_out is not None:

        def path_rows():
            for k in range(cfg.realizations):
                if chain is None:
                    path = ssa_exact(net, t_end=cfg.t_end, seed=cfg.seed, index=k)
                else:
                    path = ssa_slow(chain, net.initial_state, cfg.t_end, cfg.seed, index=k)
                for t, s in zip(path.jump_times, path.states):
                    label = " ".join(str(int(x)) for x in s) if chain is None else int(s)
                    yield [k, t, label]

        write_csv(cfg.paths_out, ["realization", "time", "state_index"], path_rows())


_COMMANDS = {
    "netinfo": _cmd_netinfo,
    "states": _cmd_states,
    "structure": _cmd_structure,
    "reduce": _cmd_reduce,
    "solve": _cmd_solve,
    "compare": _cmd_compare,
    "ssa": _cmd_ssa,
}


def run(cfg: RunConfig, out=None) -> int:
    """Execute one subcommand; returns the process exit status."""
    out = sys.stdout if out is None else out
    try:
        _COMMANDS[cfg.subcommand](cfg, out)
    except ParseError as err:
        print(f"error: {cfg.input}: {err}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = config_from_args(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
