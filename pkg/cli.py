"""
WawPart - Command Line Interface
generate | analyze | partition | rewrite | run | compare
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from benchmark_generator import GeneratorError
from config import ConfigError, PipelineConfig, Strategy, configure_logging, load_config
from execution_simulator import ExecutionError, compare_reports, run_workload
from feature_extractor import FeatureExtractionError
from partition_engine import PartitioningError
from pipeline import (DATASET_FILE, REPORT_FILE, WORKLOAD_FILE, WawPartPipeline, load_shards,
                      load_workload, read_partition, write_analysis, write_benchmark, write_partition)
from query_clustering import ClusteringError, Linkage
from query_rewriter import RewriteError
from rdf_store import NTriplesSyntaxError, load_ntriples
from sparql_query import MissingEndpointError, QuerySyntaxError

logger = logging.getLogger(__name__)

MODULE_ERRORS = (NTriplesSyntaxError, QuerySyntaxError, MissingEndpointError, FeatureExtractionError,
                 ClusteringError, PartitioningError, RewriteError, ExecutionError, GeneratorError,
                 ConfigError, OSError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wawpart", description="Workload-aware knowledge graph partitioning")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", default=".", help="directory for inputs and outputs (default: .)")
    common.add_argument("--dataset", help=f"N-Triples dataset (default: <out>/{DATASET_FILE})")
    common.add_argument("--workload", help=f"workload file (default: <out>/{WORKLOAD_FILE})")
    common.add_argument("--k", type=int, help="number of shards")
    common.add_argument("--linkage", choices=[l.value for l in Linkage])
    common.add_argument("--cut-distance", type=float, dest="cut_distance")
    common.add_argument("--seed", type=int)
    common.add_argument("--strategy", choices=[s.value for s in Strategy])
    common.add_argument("--benchmark", choices=["lubm", "bsbm"])
    common.add_argument("--scale", type=int, help="triple-count target for generate")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="emit dataset.nt and workload.rq")
    sub.add_parser("analyze", parents=[common], help="emit matrix.json and dendrogram.txt")
    sub.add_parser("partition", parents=[common], help="emit partition.json and shard-<i>.nt")
    sub.add_parser("rewrite", parents=[common], help="print federated SPARQL per query")
    sub.add_parser("run", parents=[common], help="execute the workload against the shards")
    sub.add_parser("compare", parents=[common], help="centralized, WawPart and random side by side")
    return parser


def _config(args: argparse.Namespace) -> PipelineConfig:
    return load_config(args.config, k=args.k, linkage=args.linkage, cut_distance=args.cut_distance,
                       seed=args.seed, strategy=args.strategy, benchmark=args.benchmark, scale=args.scale)


def _dataset(args: argparse.Namespace) -> Path:
    return Path(args.dataset) if args.dataset else Path(args.out) / DATASET_FILE


def _workload(args: argparse.Namespace) -> Path:
    return Path(args.workload) if args.workload else Path(args.out) / WORKLOAD_FILE


def _dispatch(args: argparse.Namespace) -> int:
    config = _config(args)
    pipeline = WawPartPipeline(config)
    out = Path(args.out)

    if args.command == "generate":
        benchmark = pipeline.generate()
        for path in write_benchmark(benchmark, out):
            print(path)
        print(f"{benchmark.triple_count} triples, {len(benchmark.queries)} queries")
        return 0

    queries = load_workload(_workload(args))

    if args.command == "analyze":
        analysis = pipeline.analyze(queries)
        write_analysis(analysis, out)
        if analysis.matrix is not None:
            print(analysis.matrix.to_json())
        for i, cluster in enumerate(analysis.cut.clusters):
            print(f"cluster {i}: {' '.join(cluster)}")
        return 0

    if args.command == "rewrite":
        meta = read_partition(out)
        for query_id, text in pipeline.rewrite(queries, meta).items():
            print(f"# id: {query_id}\n{text}")
        return 0

    if args.command == "run":
        meta = read_partition(out)
        report = run_workload(queries, meta, load_shards(out, meta.k), config.cost_model())
        (out / REPORT_FILE).write_text(report.to_json(), encoding="utf-8")
        print(report.to_text(), end="")
        return 0

    graph = load_ntriples(_dataset(args))

    if args.command == "partition":
        result = pipeline.partition(graph, queries)
        write_partition(graph, result.partitioning, out)
        if result.analysis is not None:
            write_analysis(result.analysis, out)
        balance = result.partitioning.balance
        for shard, size in sorted(result.partitioning.sizes.items()):
            print(f"shard {shard}: {size} triples ({balance.deviations[shard]:+.2%})")
        print(f"within epsilon {balance.epsilon}: {balance.within_epsilon}")
        return 0

    reports = pipeline.compare(graph, queries)
    (out / REPORT_FILE).write_text(
        json.dumps([r.model_dump(mode="json") for r in reports], indent=2, sort_keys=True), encoding="utf-8"
    )
    print(compare_reports(reports), end="")
    return 0


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand. Returns 0 on success, 1 on a pipeline error and 2
    on a usage error.
    """
    parser = build_parser()
    try:
        args, unknown = parser.parse_known_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return int(e.code or 0)
    if unknown:
        print(f"wawpart: unrecognized arguments: {' '.join(unknown)}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return 2

    try:
        return _dispatch(args)
    except MODULE_ERRORS as e:
        logger.debug("Command failed", exc_info=True)
        print(f"wawpart {args.command}: {e}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> None:
    configure_logging("WARNING")
    sys.exit(cli(argv))


if __name__ == "__main__":
    main()
