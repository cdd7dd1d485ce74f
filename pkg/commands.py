import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import circulant
import lattice
import star
from errors import ValidationError
from plot_generator import PlotGenerator, PlotSeries, PlotSpec, load_plot_settings, padded_range
from utils import create_result_payload, get_thread_count, log_command_usage, render_csv, render_json

logger = logging.getLogger(__name__)

BAND_HEADER = ["mu", "ell", "branch", "k_lo", "k_hi", "edge_lo", "edge_hi"]
OUTPUT_FORMATS = ("csv", "json")
COUPLINGS = ("shift", "delta", "perm-invariant", "custom")

Mapper = Callable[..., Iterable]


@dataclass
class RunConfig:
    command: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    output_format: str = "json"
    output_path: Optional[str] = None
    plot_path: Optional[str] = None
    threads: Optional[int] = None

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> "RunConfig":
        reserved = {"command", "handler", "format", "output_path", "plot", "threads", "log_level"}
        parameters = {k: v for k, v in vars(args).items() if k not in reserved}
        return cls(
            command=args.command,
            parameters=parameters,
            output_format=args.format,
            output_path=args.output_path,
            plot_path=getattr(args, "plot", None),
            threads=args.threads,
        )

    def get(self, name: str, default: Any = None) -> Any:
        value = self.parameters.get(name)
        return default if value is None else value


@dataclass
class CommandResult:
    header: List[str]
    rows: List[List[Any]]
    plot: Optional[PlotSpec] = None


class CommandRegistry:
    """Holds the argparse sub-commands and the handler behind each"""

    def __init__(self, subparsers):
        self.subparsers = subparsers
        self.handlers: Dict[str, Callable[[RunConfig, Mapper], CommandResult]] = {}
        self.parents: List[argparse.ArgumentParser] = []

    def command(self, name: str, help: str, options: Sequence[Callable[[argparse.ArgumentParser], None]] = (),
                plot: bool = False):
        def decorator(handler):
            parser = self.subparsers.add_parser(name, help=help, description=help, parents=self.parents)
            for add_options in options:
                add_options(parser)
            if plot:
                parser.add_argument("--plot", metavar="PATH", help="write a figure (SVG, or PNG for .png paths)")
            parser.set_defaults(handler=handler)
            self.handlers[name] = handler
            return handler
        return decorator


def add_output_options(parser: argparse.ArgumentParser):
    parser.add_argument("--format", choices=OUTPUT_FORMATS, default="json", help="output format")
    parser.add_argument("--output-path", help="write results here instead of stdout")
    parser.add_argument("--threads", type=int, help="worker threads for parameter sweeps")
    parser.add_argument("--log-level", help="logging level (default from QGRAPH_LOG_LEVEL or INFO)")


def add_coupling_options(parser: argparse.ArgumentParser):
    parser.add_argument("--coupling", choices=COUPLINGS, default="shift", help="vertex coupling family")
    parser.add_argument("--n", type=int, default=3, help="vertex degree")
    parser.add_argument("--mu", type=float, default=0.0, help="phase of the shift coupling exp(i mu) R")
    parser.add_argument("--negate", action="store_true", help="use -U instead of U")
    parser.add_argument("--alpha", type=float, default=0.0, help="delta coupling strength")
    parser.add_argument("--u", type=complex, help="diagonal part u of U = uI + vJ")
    parser.add_argument("--v", type=complex, help="all-ones part v of U = uI + vJ")
    parser.add_argument("--first-row", help='JSON first row, e.g. "[0, 1, 0]" or "[[0, 0], [1, 0], [0, 0]]"')
    parser.add_argument("--ell", type=float, default=1.0, help="vertex length scale")


def add_lattice_options(parser: argparse.ArgumentParser):
    parser.add_argument("--mu", type=float, required=True, help="phase mu in [0, pi/2]")
    parser.add_argument("--ell", type=float, required=True, help="lattice edge length")
    parser.add_argument("--grid", type=int, help="sample count for root scans")


def _parse_first_row(text: str) -> circulant.CirculantUnitary:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"--first-row is not valid JSON: {e}") from e
    if isinstance(data, dict):
        return circulant.CirculantUnitary.from_json(text)
    if not isinstance(data, list):
        raise ValidationError("--first-row must be a JSON array")
    row = []
    for entry in data:
        if isinstance(entry, list) and len(entry) == 2:
            row.append(complex(float(entry[0]), float(entry[1])))
        elif isinstance(entry, (int, float)):
            row.append(complex(entry))
        elif isinstance(entry, str):
            row.append(complex(entry.replace(" ", "")))
        else:
            raise ValidationError(f"cannot read first-row entry {entry!r}")
    return circulant.from_first_row(row)


def build_coupling(config: RunConfig) -> circulant.CirculantUnitary:
    kind = config.get("coupling", "shift")
    n = config.get("n", 3)
    negate = bool(config.get("negate", False))

    if kind == "shift":
        return circulant.scaled_shift(n, config.get("mu", 0.0), sign=-1 if negate else 1)
    if kind == "delta":
        u = circulant.delta_coupling(n, config.get("alpha", 0.0))
    elif kind == "perm-invariant":
        if config.get("u") is None or config.get("v") is None:
            raise ValidationError("perm-invariant coupling needs --u and --v")
        u = circulant.permutation_invariant(n, config.get("u"), config.get("v"))
    elif kind == "custom":
        if not config.get("first_row"):
            raise ValidationError("custom coupling needs --first-row")
        u = _parse_first_row(config.get("first_row"))
    else:
        raise ValidationError(f"unknown coupling {kind!r}")
    return circulant.from_first_row(-u.first_row) if negate else u


def band_rows(bands: lattice.BandSet, negate_axis: bool = False) -> List[List[Any]]:
    rows = []
    for b in bands.intervals:
        if negate_axis:
            rows.append([bands.mu, bands.ell, bands.branch, -b.hi, -b.lo, b.edge_hi, b.edge_lo])
        else:
            rows.append([bands.mu, bands.ell, bands.branch, b.lo, b.hi, b.edge_lo, b.edge_hi])
    for x in bands.flat_points:
        rows.append([bands.mu, bands.ell, bands.branch, x, x, "flat", "flat"])
    return rows


def spectrum_vs_mu(ell: float, mu_grid: int, k_range: Tuple[float, float], kappa_max: Optional[float] = None,
                   mapper: Mapper = map) -> Tuple[List[List[Any]], PlotSpec]:
    """Positive and negative bands on a mu grid over [0, pi/2]; negative bands sit at k = -kappa"""
    if mu_grid < 2:
        raise ValidationError(f"mu grid needs at least 2 points, got {mu_grid}")
    if not 0 < k_range[0] < k_range[1]:
        raise ValidationError(f"invalid k range {k_range}")
    mus = np.linspace(0.0, math.pi / 2, int(mu_grid))

    def bands_at(mu: float) -> Tuple[lattice.BandSet, lattice.BandSet]:
        m = lattice.LatticeModel(float(mu), ell)
        negative_range = lattice.default_range(m, "negative")
        if kappa_max is not None:
            negative_range = (negative_range[0], kappa_max)
        return (lattice.band_structure(m, "positive", k_range),
                lattice.band_structure(m, "negative", negative_range))

    logger.info(f"🔄 Scanning {len(mus)} mu values for ell={ell}")
    sweep = list(mapper(bands_at, mus))

    half_step = 0.5 * (mus[1] - mus[0])
    blocks: List[Tuple[float, List[List[Any]]]] = []
    positive_rects, negative_rects, flat = [], [], []
    for positive, negative in sweep:
        blocks.append((positive.mu, band_rows(negative, negate_axis=True) + band_rows(positive)))
        for b in positive.intervals:
            positive_rects.append((positive.mu - half_step, positive.mu + half_step, b.lo, b.hi))
        for b in negative.intervals:
            negative_rects.append((negative.mu - half_step, negative.mu + half_step, -b.hi, -b.lo))
        flat.extend((positive.mu, x) for x in positive.flat_points)

    # the k = 1 flat band lives at a single mu that the grid generally misses
    mu_flat = lattice.flat_band_mu(ell)
    already = any(abs(mu - mu_flat) < 1e-12 and abs(x - 1.0) < 1e-12 for mu, x in flat)
    if k_range[0] <= 1.0 <= k_range[1] and not already:
        m = lattice.LatticeModel(mu_flat, ell)
        if lattice.membership(m, 1.0).status == "flat_band":
            blocks.append((mu_flat, band_rows(lattice.BandSet("positive", mu_flat, ell, (), (1.0,)))))
            flat.append((mu_flat, 1.0))
    blocks.sort(key=lambda block: block[0])
    rows = [row for _, block in blocks for row in block]

    y_lo = -(kappa_max if kappa_max is not None else max((-r[2] for r in negative_rects), default=1.0))
    spec = PlotSpec(
        kind="spectrum-vs-mu",
        x_range=(0.0, math.pi / 2),
        y_range=(min(y_lo, -0.1), k_range[1]),
        series=(
            PlotSeries("positive bands", "rects", tuple(positive_rects)),
            PlotSeries("negative bands", "rects", tuple(negative_rects)),
            PlotSeries("flat bands", "points", tuple(flat)),
        ),
        title=f"spectrum vs mu, ell = {ell:g}",
        x_label="mu",
        y_label="k  (negative: -kappa)",
    )
    return rows, spec


def resolve_output_path(path: str) -> str:
    base = os.getenv("QGRAPH_OUTPUT_DIR", ".")
    return path if os.path.isabs(path) else os.path.join(base, path)


def write_outputs(config: RunConfig, result: CommandResult) -> List[str]:
    """Serialize results (CSV or JSON) and the optional figure; returns written paths"""
    if config.output_format == "csv":
        text = render_csv(result.header, result.rows)
    else:
        results = [dict(zip(result.header, row)) for row in result.rows]
        text = render_json(create_result_payload(config.command, config.parameters, results))

    written = []
    if config.output_path:
        path = resolve_output_path(config.output_path)
        with open(path, "w") as f:
            f.write(text)
        logger.info(f"📝 Wrote {len(result.rows)} rows to {path}")
        written.append(path)
    else:
        sys.stdout.write(text)

    if config.plot_path:
        if result.plot is None:
            logger.warning(f"⚠️ Command '{config.command}' has no figure; ignoring --plot")
        else:
            settings = load_plot_settings(os.getenv("QGRAPH_PLOT_SETTINGS", "plot_settings.json"))
            written.append(PlotGenerator(settings).save(result.plot, resolve_output_path(config.plot_path)))
    return written


def execute(config: RunConfig, handler: Callable[[RunConfig, Mapper], CommandResult]) -> List[str]:
    """Run a handler with a thread pool for its sweeps, then write everything serially"""
    log_command_usage(config.command, config.parameters)
    threads = get_thread_count(config.threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            result = handler(config, pool.map)
    else:
        result = handler(config, map)
    return write_outputs(config, result)


def emit_spectrum_vs_mu(ell: float, mu_grid: int, k_range: Tuple[float, float], out: str,
                        kappa_max: Optional[float] = None, output_format: str = "csv",
                        plot_path: Optional[str] = None, threads: Optional[int] = None) -> List[str]:
    config = RunConfig(
        command="spectrum",
        parameters={"ell": ell, "mu_grid": mu_grid, "k_min": k_range[0], "k_max": k_range[1], "kappa_max": kappa_max},
        output_format=output_format,
        output_path=out,
        plot_path=plot_path,
        threads=threads,
    )
    return execute(config, spectrum_command)


def spectrum_command(config: RunConfig, mapper: Mapper) -> CommandResult:
    rows, spec = spectrum_vs_mu(
        config.get("ell"),
        config.get("mu_grid", 200),
        (config.get("k_min", lattice.POSITIVE_K_MIN), config.get("k_max", 20.0)),
        config.get("kappa_max"),
        mapper,
    )
    return CommandResult(BAND_HEADER, rows, spec)


def setup_commands(registry: CommandRegistry):
    """Set up all commands"""

    @registry.command("symmetry", help="time-reversal and PT symmetry of a circulant coupling",
                      options=(add_coupling_options,))
    def symmetry(config: RunConfig, mapper: Mapper) -> CommandResult:
        u = build_coupling(config)
        report = circulant.symmetry_report(u)
        dnr = circulant.dnr_decomposition(u)
        phases = ";".join(f"{g:.12g}" for g in circulant.eigenvalues(u).gamma)
        header = ["time_reversal", "pt_symmetric", "nontrivial_pt", "parity_fixed_edges",
                  "dirichlet", "neumann", "robin", "eigenphases"]
        row = [report.time_reversal, report.pt_symmetric, report.nontrivial_pt,
               ";".join(str(e) for e in report.parity_fixed_edges),
               dnr.dirichlet, dnr.neumann, dnr.robin, phases]
        return CommandResult(header, [row])

    @registry.command("smatrix", help="on-shell scattering matrix S(k) of a star graph",
                      options=(add_coupling_options, _add_momentum_option))
    def smatrix(config: RunConfig, mapper: Mapper) -> CommandResult:
        coupling = star.VertexCoupling(build_coupling(config), config.get("ell", 1.0))
        scattering = star.s_matrix(coupling, config.get("k"))
        probabilities = star.transmission_probabilities(scattering)
        rows = []
        for i in range(scattering.n):
            for j in range(scattering.n):
                z = scattering.s[i, j]
                rows.append([i + 1, j + 1, z.real, z.imag, probabilities[i, j]])
        if not scattering.is_unitary():
            logger.warning(f"⚠️ S({config.get('k')}) deviates from unitarity")
        return CommandResult(["row", "col", "re", "im", "abs2"], rows)

    @registry.command("bound-states", help="bound and antibound states of a star graph",
                      options=(add_coupling_options,))
    def bound_states(config: RunConfig, mapper: Mapper) -> CommandResult:
        coupling = star.VertexCoupling(build_coupling(config), config.get("ell", 1.0))
        states = star.bound_states(coupling)
        rows = [["bound", kappa, energy] for kappa, energy in zip(states.kappas, states.energies)]
        rows.extend(["antibound", kappa, None] for kappa in states.antibound_kappas)
        return CommandResult(["kind", "kappa", "energy"], rows)

    @registry.command("bands", help="band structure of the square lattice with U = exp(i mu) R",
                      options=(add_lattice_options, _add_band_range_options), plot=True)
    def bands(config: RunConfig, mapper: Mapper) -> CommandResult:
        m = lattice.LatticeModel(config.get("mu"), config.get("ell"))
        grid = config.get("grid", 1000)
        tol = config.get("tol", 1e-12)
        branch = config.get("branch", "both")
        rows: List[List[Any]] = []
        series = []
        x_values = [0.0]
        if branch in ("both", "negative"):
            lo, hi = lattice.default_range(m, "negative")
            negative = lattice.band_structure(m, "negative", (lo, config.get("kappa_max", hi)), grid, tol)
            rows.extend(band_rows(negative))
            series.append(PlotSeries("negative bands (-kappa)", "rects",
                                     tuple((-b.hi, -b.lo, 0.0, 1.0) for b in negative.intervals)))
            x_values.append(-config.get("kappa_max", hi))
        if branch in ("both", "positive"):
            k_max = config.get("k_max", 20.0)
            positive = lattice.band_structure(m, "positive", (lattice.POSITIVE_K_MIN, k_max), grid, tol)
            rows.extend(band_rows(positive))
            series.append(PlotSeries("positive bands", "rects",
                                     tuple((b.lo, b.hi, 0.0, 1.0) for b in positive.intervals)))
            series.append(PlotSeries("flat bands", "points", tuple((x, 0.5) for x in positive.flat_points)))
            x_values.append(k_max)
        spec = PlotSpec("band-diagram", (min(x_values), max(x_values)), (0.0, 1.0), tuple(series),
                        title=f"bands, mu = {m.mu:g}, ell = {m.ell:g}", x_label="k  (negative: -kappa)")
        return CommandResult(BAND_HEADER, rows, spec)

    @registry.command("fermi", help="Fermi contour in the Brillouin zone at momentum k",
                      options=(add_lattice_options, _add_momentum_option), plot=True)
    def fermi(config: RunConfig, mapper: Mapper) -> CommandResult:
        m = lattice.LatticeModel(config.get("mu"), config.get("ell"))
        surface = lattice.fermi_surface(m, config.get("k"), config.get("grid", 200))
        rows = [[p.theta1, p.theta2] for p in surface.points]
        lines = tuple(
            (surface.points[a].theta1, surface.points[a].theta2, surface.points[b].theta1, surface.points[b].theta2)
            for a, b in surface.segments
        )
        series = (PlotSeries("contour", "lines", lines),) if lines else (
            PlotSeries("contour", "points", tuple((p.theta1, p.theta2) for p in surface.points)),)
        spec = PlotSpec("fermi-contour", (-math.pi, math.pi), (-math.pi, math.pi), series,
                        title=f"Fermi contour, k = {surface.k:g}, Q = {surface.q_star:.6g}",
                        x_label="theta1", y_label="theta2")
        return CommandResult(["theta1", "theta2"], rows, spec)

    @registry.command("psigma", help="fraction of [0, K] on the energy axis covered by the spectrum",
                      options=(add_lattice_options, _add_psigma_options))
    def psigma(config: RunConfig, mapper: Mapper) -> CommandResult:
        m = lattice.LatticeModel(config.get("mu"), config.get("ell"))
        k_max = config.get("k_max", 100.0)
        value = lattice.p_sigma_estimate(m, k_max, config.get("grid", 1000))
        return CommandResult(["mu", "ell", "K", "p_sigma"], [[m.mu, m.ell, k_max ** 2, value]])

    @registry.command("dirac", help="gap closings (Dirac points) found by a mu sweep",
                      options=(_add_dirac_options,), plot=True)
    def dirac(config: RunConfig, mapper: Mapper) -> CommandResult:
        ell = config.get("ell")
        mu_range = (config.get("mu_min", 0.01), config.get("mu_max", math.pi / 2 - 0.01))
        k_range = (config.get("k_min", 0.5), config.get("k_max", 12.0))
        logger.info(f"🔄 Sweeping {config.get('mu_grid', 200)} mu values for gap closings")
        points = lattice.dirac_points(ell, mu_range, config.get("mu_grid", 200), k_range, mapper=mapper)
        rows = [[p.mu, p.k, p.location] for p in points]
        series = tuple(
            PlotSeries(location, "points", tuple((p.mu, p.k) for p in points if p.location == location))
            for location in ("center", "corner")
        )
        spec = PlotSpec("dirac-points", mu_range, padded_range([p.k for p in points], fallback=k_range), series,
                        title=f"gap closings, ell = {ell:g}", x_label="mu", y_label="k")
        return CommandResult(["mu", "k", "location"], rows, spec)

    registry.command("spectrum", help="bands of both signs on a mu grid (spectrum vs mu)",
                     options=(_add_spectrum_options,), plot=True)(spectrum_command)


def _add_momentum_option(parser: argparse.ArgumentParser):
    parser.add_argument("--k", type=float, required=True, help="momentum k > 0")


def _add_psigma_options(parser: argparse.ArgumentParser):
    parser.add_argument("--k-max", type=float, help="K = k_max^2 is the energy cutoff")


def _add_band_range_options(parser: argparse.ArgumentParser):
    parser.add_argument("--branch", choices=("both", "positive", "negative"), default="both")
    parser.add_argument("--k-max", type=float, help="upper end of the positive k range")
    parser.add_argument("--kappa-max", type=float, help="upper end of the negative kappa range")
    parser.add_argument("--tol", type=float, help="band edge tolerance")


def _add_dirac_options(parser: argparse.ArgumentParser):
    parser.add_argument("--ell", type=float, required=True, help="lattice edge length")
    parser.add_argument("--mu-min", type=float)
    parser.add_argument("--mu-max", type=float)
    parser.add_argument("--mu-grid", type=int)
    parser.add_argument("--k-min", type=float)
    parser.add_argument("--k-max", type=float)


def _add_spectrum_options(parser: argparse.ArgumentParser):
    parser.add_argument("--ell", type=float, required=True, help="lattice edge length")
    parser.add_argument("--mu-grid", type=int, default=200)
    parser.add_argument("--k-min", type=float)
    parser.add_argument("--k-max", type=float, default=20.0)
    parser.add_argument("--kappa-max", type=float)
