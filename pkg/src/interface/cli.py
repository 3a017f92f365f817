import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import typer
from rich import print
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

# --- Core imports ------------------------------------------------------------
from src.core.config import RunConfig, build_config, default_seed
from src.core.errors import InputError, SimulationError
from src.core.exporter import export_records, export_summary, export_trace, save_topology, save_workload
from src.core.loader import load_summary, load_topology, load_workload
from src.core.mepde import SOLVERS, SolveOutcome
from src.core.netmodel import VNRequest
from src.core.simulator import SimSummary, long_term_metrics, run
from src.core.validator import validate
from src.core.workload import WaxmanParams, WorkloadParams, generate_workload, waxman_substrate


EXIT_REJECTED = 1
EXIT_USAGE = 2

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# Typer Application
# -----------------------------------------------------------------------------
app = typer.Typer(
    help="MEPDE-VNE CLI – generate topologies and workloads, embed virtual networks, simulate and report.",
    rich_markup_mode="rich",
    no_args_is_help=True,
)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level")):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
        force=True,
    )


# -----------------------------------------------------------------------------
# Utilities
# -----------------------------------------------------------------------------
def _parse_range(text: str, cast=int) -> Tuple:
    """'50:100' -> (50, 100)."""
    try:
        lo, hi = (cast(part) for part in text.split(":"))
    except ValueError:
        raise typer.BadParameter(f"expected LOW:HIGH, got {text!r}")
    if lo > hi:
        raise typer.BadParameter(f"empty range {text!r}")
    return lo, hi


def _fail(message: str, code: int = EXIT_USAGE):
    print(f"[red]Error:[/red] {escape(message)}")
    raise typer.Exit(code=code)


def _config(config_file: Optional[str], **overrides) -> RunConfig:
    try:
        return build_config(config_file, **overrides)
    except (InputError, FileNotFoundError) as e:
        _fail(str(e))


def _show_df(df: pd.DataFrame, title: str = "Preview"):
    table = Table(title=title)
    for col in df.columns:
        table.add_column(str(col))
    for _, row in df.iterrows():
        table.add_row(*[str(x) for x in row.tolist()])
    print(table)


def _show_mapping(outcome: SolveOutcome):
    mapping = outcome.mapping
    hosts = pd.DataFrame(
        [(v, h) for v, h in sorted(mapping.hosts.items())], columns=["virtual node", "host"]
    )
    _show_df(hosts, "Node mapping")
    routes = pd.DataFrame(
        [
            (link_id, " - ".join(str(n) for n in route.nodes), len(route))
            for link_id, route in sorted(mapping.routes.items())
        ],
        columns=["virtual link", "path", "hops"],
    )
    _show_df(routes, "Link mapping")


# -----------------------------------------------------------------------------
# GENERATION COMMANDS
# -----------------------------------------------------------------------------
@app.command("gen-substrate")
def gen_substrate_cmd(
        nodes: int = typer.Option(..., "--nodes", help="Number of substrate nodes"),
        links: int = typer.Option(..., "--links", help="Exact number of substrate links"),
        out: Path = typer.Option(..., "--out", help="Topology file to write"),
        bw: str = typer.Option("50:100", "--bw", help="Link bandwidth range LOW:HIGH"),
        alpha: float = typer.Option(0.5, "--alpha"),
        beta: float = typer.Option(0.2, "--beta"),
        seed: Optional[int] = typer.Option(None, "--seed", help="Defaults to $MEPDE_SEED or 0"),
        overwrite: bool = typer.Option(False, "--overwrite"),
):
    """Generate a connected Waxman substrate network."""
    bw_range = _parse_range(bw)
    seed = seed if seed is not None else default_seed()
    try:
        params = WaxmanParams(nodes, links, alpha=alpha, beta=beta)
        sn = waxman_substrate(params, np.random.default_rng(seed), bw_range=bw_range)
        save_topology(sn, str(out), overwrite=overwrite)
    except (InputError, FileExistsError) as e:
        _fail(str(e))
    print(f"[green]Saved substrate[/green] ({nodes} nodes, {links} links) to {out} [cyan]seed={seed}[/cyan]")


@app.command("gen-workload")
def gen_workload_cmd(
        out: Path = typer.Option(..., "--out", help="Workload file to write"),
        requests: int = typer.Option(1000, "--requests"),
        size: str = typer.Option("2:20", "--size", help="VN size range LOW:HIGH"),
        connectivity: float = typer.Option(0.5, "--connectivity"),
        bw: str = typer.Option("1:50", "--bw", help="Virtual link bandwidth range LOW:HIGH"),
        rate: float = typer.Option(0.1, "--rate", help="Arrivals per time unit"),
        lifetime: str = typer.Option("300:700", "--lifetime", help="Lifetime range LOW:HIGH"),
        seed: Optional[int] = typer.Option(None, "--seed", help="Defaults to $MEPDE_SEED or 0"),
        overwrite: bool = typer.Option(False, "--overwrite"),
):
    """Generate a timed stream of virtual network requests."""
    size_min, size_max = _parse_range(size)
    bw_min, bw_max = _parse_range(bw)
    life_min, life_max = _parse_range(lifetime, float)
    seed = seed if seed is not None else default_seed()
    try:
        params = WorkloadParams(
            request_count=requests, vn_size_min=size_min, vn_size_max=size_max,
            connectivity=connectivity, bw_min=bw_min, bw_max=bw_max,
            arrival_rate=rate, lifetime_min=life_min, lifetime_max=life_max, seed=seed,
        )
        workload = generate_workload(params, np.random.default_rng(seed))
        save_workload(workload, str(out), seed=seed, overwrite=overwrite)
    except (InputError, FileExistsError) as e:
        _fail(str(e))
    print(f"[green]Saved workload[/green] ({requests} requests) to {out} [cyan]seed={seed}[/cyan]")


# -----------------------------------------------------------------------------
# SOLVE / SIMULATE COMMANDS
# -----------------------------------------------------------------------------
@app.command("solve")
def solve_cmd(
        substrate: Optional[Path] = typer.Option(None, "--substrate", help="Substrate topology file"),
        vn: Path = typer.Option(..., "--vn", help="Virtual network topology file"),
        config: Optional[str] = typer.Option(None, "--config", help="TOML or JSON run configuration"),
        solver: Optional[str] = typer.Option(None, "--solver", help="mepde or greedy"),
        iterations: Optional[int] = typer.Option(None, "--iterations"),
        population: Optional[int] = typer.Option(None, "--population"),
        max_backtrack: Optional[int] = typer.Option(None, "--max-backtrack"),
        hops: Optional[int] = typer.Option(None, "--hops"),
        q: Optional[int] = typer.Option(None, "--q"),
        seed: Optional[int] = typer.Option(None, "--seed"),
):
    """Embed one virtual network and print the mapping; exit 1 when rejected."""
    cfg = _config(
        config, substrate=substrate, solver=solver, iterations_max=iterations,
        population_size=population, max_backtrack=max_backtrack, hops_max=hops, q=q, seed=seed,
    )
    if cfg.substrate is None:
        _fail("a substrate file is required (--substrate or config)")
    try:
        sn = load_topology(str(cfg.substrate), "substrate")
        request = VNRequest(0, load_topology(str(vn), "virtual"), 0.0, 1.0)
        outcome = SOLVERS[cfg.solver](sn, request, cfg.to_solve_params())
    except (InputError, FileNotFoundError) as e:
        _fail(str(e))

    print(f"[cyan]solver[/cyan]: {outcome.solver}  [cyan]seed[/cyan]: {cfg.seed}")
    print(f"[cyan]time[/cyan]: {outcome.stats.duration:.6f}s")
    if not outcome.success:
        print(f"[red]Rejected:[/red] {escape(str(outcome.reason))}")
        raise typer.Exit(code=EXIT_REJECTED)

    print("[green]Accepted[/green]")
    _show_mapping(outcome)
    print(f"[cyan]cost[/cyan]: {outcome.objectives.cost}")
    print(f"[cyan]fragmentation[/cyan]: {outcome.objectives.fragmentation:.6f}")
    report = validate(outcome.mapping, sn)
    if not report:
        _fail("; ".join(report.violations), code=EXIT_REJECTED)


@app.command("simulate")
def simulate_cmd(
        substrate: Optional[Path] = typer.Option(None, "--substrate", help="Substrate topology file"),
        workload: Optional[Path] = typer.Option(None, "--workload", help="Workload file"),
        out_prefix: Optional[str] = typer.Option(None, "--out-prefix",
                                                 help="Writes <prefix>_trace.csv, _records.csv, _summary.txt"),
        config: Optional[str] = typer.Option(None, "--config", help="TOML or JSON run configuration"),
        solver: Optional[str] = typer.Option(None, "--solver", help="mepde or greedy"),
        iterations: Optional[int] = typer.Option(None, "--iterations"),
        population: Optional[int] = typer.Option(None, "--population"),
        max_backtrack: Optional[int] = typer.Option(None, "--max-backtrack"),
        hops: Optional[int] = typer.Option(None, "--hops"),
        q: Optional[int] = typer.Option(None, "--q"),
        seed: Optional[int] = typer.Option(None, "--seed"),
        until: Optional[float] = typer.Option(None, "--until", help="Clamp the averaging horizon T"),
        overwrite: bool = typer.Option(False, "--overwrite"),
):
    """Replay a workload against a substrate and write trace, records and summary."""
    cfg = _config(
        config, substrate=substrate, workload=workload, output=out_prefix, solver=solver,
        iterations_max=iterations, population_size=population, max_backtrack=max_backtrack,
        hops_max=hops, q=q, seed=seed,
    )
    if cfg.substrate is None or cfg.workload is None:
        _fail("substrate and workload files are required (flags or config)")
    try:
        sn = load_topology(str(cfg.substrate), "substrate")
        requests, _ = load_workload(str(cfg.workload))
        trace = run(sn, requests, SOLVERS[cfg.solver], cfg.to_solve_params(), solver_name=cfg.solver)
        summary = long_term_metrics(trace, until)
    except (InputError, FileNotFoundError) as e:
        _fail(str(e))
    except SimulationError as e:
        _fail(f"{e}: {'; '.join(e.violations)}", code=EXIT_REJECTED)

    if cfg.output is not None:
        prefix = str(cfg.output)
        try:
            export_trace(trace, f"{prefix}_trace.csv", overwrite=overwrite)
            export_records(trace, f"{prefix}_records.csv", overwrite=overwrite)
            export_summary(summary, f"{prefix}_summary.txt", overwrite=overwrite)
        except FileExistsError as e:
            _fail(str(e))
        print(f"[green]Saved[/green] {prefix}_trace.csv, {prefix}_records.csv, {prefix}_summary.txt")

    _show_summaries([summary])


# -----------------------------------------------------------------------------
# REPORT COMMAND
# -----------------------------------------------------------------------------
REPORT_ROWS = [
    ("long_term_avg_revenue", "Long-term avg revenue"),
    ("acceptance_ratio", "Acceptance ratio"),
    ("revenue_cost_ratio", "Revenue/cost ratio"),
    ("long_term_avg_snf", "Long-term avg SNF"),
    ("resource_acceptance_ratio", "Resource acceptance"),
    ("cpu_acceptance_ratio", "CPU acceptance"),
    ("bw_acceptance_ratio", "BW acceptance"),
    ("long_term_cpu_utilization", "CPU utilization"),
    ("long_term_bw_utilization", "BW utilization"),
    ("avg_active_nodes", "Avg active nodes"),
    ("mean_solve_time", "Mean solve time (s)"),
    ("accepted_count", "Accepted"),
    ("request_count", "Requests"),
    ("total_time", "T"),
]


def _show_summaries(summaries: List[SimSummary]):
    frame = pd.DataFrame([vars(s) for s in summaries])
    table = Table(title="Simulation summary")
    table.add_column("metric")
    for _, row in frame.iterrows():
        table.add_column(f"{row['solver']} (seed {row['seed']})", justify="right")
    for key, label in REPORT_ROWS:
        cells = [f"{v:.6f}" if isinstance(v, float) else str(v) for v in frame[key].tolist()]
        table.add_row(label, *cells)
    print(table)


@app.command("report")
def report_cmd(summaries: List[Path] = typer.Argument(..., help="Summary files to compare")):
    """Compare one or more simulation summaries side by side."""
    try:
        loaded = [load_summary(str(path)) for path in summaries]
    except (InputError, FileNotFoundError) as e:
        _fail(str(e))
    _show_summaries(loaded)


# -----------------------------------------------------------------------------
# ENTRY POINT
# -----------------------------------------------------------------------------
def runCLI():
    app()
