"""Command line front end: tile, skeleton, nash, heat, gauss and report.

Exit codes: 0 if every non-degenerate check passes, 1 if a check fails,
2 for invalid input. Nothing is written on exit code 2.
"""

import argparse
import json
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import yaml  # type: ignore

from tileheat import __version__
from tileheat.bounds import (BoundsReport, ClearanceError, beta2, build_report,
                             gaussian_check, gaussian_stability,
                             gaussian_targets, locate_point, nash_suite,
                             sample_functions, tiling_of, ultra_series_csv)
from tileheat.checks import failing
from tileheat.config import ConfigError, RunConfig
from tileheat.euler_lift import SupportError
from tileheat.functions import Mesh
from tileheat.geometry import TilingError, save_tiling, tiling_to_dict
from tileheat.global_helpers import apply_overrides, write_atomic
from tileheat.logger import configure, logger
from tileheat.mapping import kind_mapping, scheme_mapping
from tileheat.semigroup import (TRUNCATIONS, KrylovConvergenceError, assemble,
                                core_sources, heat_kernel_column)
from tileheat.skeleton import (GraphPoint, MetricGraph, SkeletonError,
                               build_skeleton, graph_to_dict, load_graph,
                               save_graph)

INPUT_ERRORS = (
    ConfigError,
    FileNotFoundError,
    IsADirectoryError,
    yaml.YAMLError,
    json.JSONDecodeError,
    TilingError,
    SkeletonError,
    SupportError,
    ClearanceError,
)

KRYLOV_CHECK = "krylov_convergence"


def parse_source(graph: MetricGraph, text: str) -> GraphPoint:
    """Graph point from ``vertex:17``, ``edge:5:0.25`` or ``point:x,y``.

    The edge offset is the distance from the lower numbered end.
    """
    kind, _, rest = text.partition(":")
    try:
        if kind == "vertex":
            vertex = int(rest)
            if not 0 <= vertex < graph.n_vertices:
                raise ValueError(f"unknown vertex {vertex}")
            return graph.vertex_point(vertex)
        if kind == "edge":
            edge, _, offset = rest.partition(":")
            point = GraphPoint(int(edge), float(offset or 0.0))
            graph.check_point(point)
            return point
        if kind == "point":
            x, y = (float(part) for part in rest.split(","))
            return locate_point(graph, (x, y))
    except (ValueError, SkeletonError) as exception:
        raise ConfigError("sources", f"{text!r}: {exception}") from exception
    raise ConfigError("sources", f"{text!r}: expected vertex:, edge: or point:")


def _graph_of(config: RunConfig) -> MetricGraph:
    if config.graph is not None:
        return load_graph(config.graph)
    return build_skeleton(tiling_of(config))


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _dumps(document: Any) -> str:
    return json.dumps(document, sort_keys=True, indent=1) + "\n"


def _finish(records_failing: List[str]) -> int:
    if records_failing:
        sys.stderr.write("failing checks: " + ", ".join(sorted(set(records_failing))) + "\n")
        return 1
    return 0


def run_tile(config: RunConfig, args: argparse.Namespace) -> int:
    tiling = tiling_of(config)
    if config.output is not None:
        save_tiling(tiling, config.output)
    if args.json:
        sys.stdout.write(_dumps(tiling_to_dict(tiling)))
    else:
        sys.stdout.write(
            f"{tiling.tiling_id}: {len(tiling.polygons)} polygons, {tiling.constants.as_dict()}\n"
        )
    return 0


def run_skeleton(config: RunConfig, args: argparse.Namespace) -> int:
    graph = build_skeleton(tiling_of(config))
    if config.output is not None:
        save_graph(graph, config.output)
    if args.json:
        sys.stdout.write(_dumps(graph_to_dict(graph)))
    else:
        sys.stdout.write(
            f"{graph.n_vertices} vertices, {graph.n_edges} edges, "
            f"{int(graph.boundary.sum())} on the boundary\n"
        )
    return 0


def run_nash(config: RunConfig, args: argparse.Namespace) -> int:
    graph = _graph_of(config)
    mesh = Mesh(graph, config.mesh_size)
    functions = sample_functions(graph, config.report_n_functions(), config.seed, mesh)
    report = BoundsReport(
        graph.tiling.tiling_id if graph.tiling else "",
        graph.constants,
        beta2(graph.constants),
        nash_suite(functions),
        config=config.to_dict(),
    )
    document = report.to_dict()
    del document["generated_at"]
    if config.dump_function is not None:
        write_atomic(config.dump_function, functions[0].to_csv())
    _emit(_dumps(document) if args.json or config.output else report.to_table(), config.output)
    if config.output is not None and not args.json:
        sys.stdout.write(report.to_table())
    return _finish(report.failing)


def run_heat(config: RunConfig, args: argparse.Namespace) -> int:
    graph = _graph_of(config)
    if len(config.times) != 1 or len(config.sources) != 1:
        raise ConfigError("times", "heat needs exactly one time and one source")
    source = parse_source(graph, config.sources[0])
    laplacian = assemble(graph, config.mesh_size, truncation=config.truncation)
    column = heat_kernel_column(laplacian, source, config.times[0], scheme_mapping[config.scheme]())
    if config.output is not None:
        write_atomic(config.output, column.to_csv())
    if args.json:
        sys.stdout.write(
            _dumps(
                {
                    "t": config.times[0],
                    "source": {"edge": source.edge, "offset": source.offset},
                    "mass": column.integrals.integral,
                    "peak": float(np.max(column.values)),
                    "min": float(np.min(column.values)),
                }
            )
        )
    elif config.output is None:
        sys.stdout.write(column.to_csv())
    return 0


def run_gauss(config: RunConfig, args: argparse.Namespace) -> int:
    graph = _graph_of(config)
    scheme = scheme_mapping[config.scheme]()
    laplacian = assemble(graph, config.mesh_size, truncation=config.truncation)
    times = config.report_gauss_times()
    if config.sources:
        sources = [parse_source(graph, text) for text in config.sources]
    else:
        sources = core_sources(graph)
    targets = gaussian_targets(graph, sources[0], max(times))
    fit = gaussian_check(laplacian, sources, targets, times, scheme)
    records = list(fit.records)
    document: Dict[str, Any] = {"eta_fit": fit.eta_fit, "min_kernel": fit.min_kernel}
    if config.stability and graph.tiling is not None:
        stability = gaussian_stability(
            graph.tiling,
            [graph.point_coordinates(source) for source in sources],
            [graph.point_coordinates(target) for target in targets],
            times,
            laplacian.mesh.mesh_size,
            scheme,
            config.truncation,
        )
        records.append(stability.record)
        document["eta_refined"] = stability.eta_refined
        document["eta_grown"] = stability.eta_grown
    document["records"] = [record.as_dict() for record in records]
    document["passed"] = not failing(records)
    if args.json or config.output is not None:
        _emit(_dumps(document), config.output)
    if not args.json:
        sys.stdout.write(f"eta fit {fit.eta_fit:.6g} over {len(fit.samples)} samples\n")
    return _finish(failing(records))


def run_report(config: RunConfig, args: argparse.Namespace) -> int:
    report = build_report(config)
    if config.output is not None:
        write_atomic(config.output, report.to_json())
    if args.ultra_csv is not None:
        write_atomic(args.ultra_csv, ultra_series_csv(report.records))
    sys.stdout.write(report.to_json() if args.json else report.to_table())
    return _finish(report.failing)


RUNNERS: Dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "tile": run_tile,
    "skeleton": run_skeleton,
    "nash": run_nash,
    "heat": run_heat,
    "gauss": run_gauss,
    "report": run_report,
}


def build_parser() -> argparse.ArgumentParser:
    """Parser of all subcommands. Flags left out keep the configuration value."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--json", action="store_true", help="machine readable output")
    common.add_argument("--out", dest="output", help="artifact path")
    common.add_argument("--kind", choices=sorted(kind_mapping))
    common.add_argument("--side", type=float)
    common.add_argument("--window", help="x0,y0,x1,y1 or a single size")
    common.add_argument("--tiling", "--in", dest="tiling_path", help="tiling document")
    common.add_argument("--graph", help="graph document")
    common.add_argument("--mesh", dest="mesh_size", type=float)
    common.add_argument("--scheme", choices=sorted(scheme_mapping))
    common.add_argument("--truncation", choices=TRUNCATIONS)
    common.add_argument("--seed", type=int)
    common.add_argument("--n", dest="n_functions", type=int)
    common.add_argument("--t", dest="times", type=float, action="append")
    common.add_argument("--source", dest="sources", action="append")
    common.add_argument("--dump-function", dest="dump_function")
    common.add_argument("--no-stability", dest="stability", action="store_false", default=None)

    parser = argparse.ArgumentParser(prog="tileheat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("tile", parents=[common], help="generate a tiling")
    commands.add_parser("skeleton", parents=[common], help="build the metric graph")
    commands.add_parser("nash", parents=[common], help="Nash inequalities on random functions")
    commands.add_parser("heat", parents=[common], help="heat kernel column as CSV")
    gauss = commands.add_parser("gauss", parents=[common], help="fit the Gaussian bound")
    gauss.add_argument("--gauss-t", dest="gauss_times", type=float, action="append")
    report = commands.add_parser("report", parents=[common], help="complete bounds report")
    report.add_argument("--gauss-t", dest="gauss_times", type=float, action="append")
    report.add_argument("--dilation", dest="dilations", type=float, action="append")
    report.add_argument("--ultra-csv", dest="ultra_csv", help="write t,bound,estimate,regime")
    return parser


def config_of(args: argparse.Namespace) -> RunConfig:
    """Configuration file merged with the flags given on the command line."""
    config = RunConfig.from_yaml(args.config) if args.config else RunConfig()
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "output",
            "graph",
            "mesh_size",
            "scheme",
            "truncation",
            "seed",
            "n_functions",
            "times",
            "sources",
            "dump_function",
            "stability",
            "gauss_times",
            "dilations",
        )
    }
    overrides.update(
        {
            "command": args.command,
            "tiling.kind": args.kind,
            "tiling.side": args.side,
            "tiling.window": args.window,
            "tiling.path": args.tiling_path,
        }
    )
    return config.merged(overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the tileheat command."""
    args = build_parser().parse_args(argv)
    if not hasattr(args, "ultra_csv"):
        args.ultra_csv = None
    configure(args.verbose)
    try:
        config = config_of(args)
        apply_overrides(config.tolerances)
        return RUNNERS[config.command](config, args)
    except INPUT_ERRORS as exception:
        logger().error("%s", exception)
        sys.stderr.write(f"tileheat: {exception}\n")
        return 2
    except KrylovConvergenceError as exception:
        logger().error("%s", exception)
        return _finish([KRYLOV_CHECK])
    finally:
        apply_overrides({})


if __name__ == "__main__":
    sys.exit(main())
