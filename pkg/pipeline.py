"""
WawPart - Pipeline
End-to-end orchestration shared by the CLI, the Celery tasks and the API:
featurize, cluster, partition, rewrite, execute
"""

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

from benchmark_generator import GeneratedBenchmark, generate, random_partition
from config import PipelineConfig, Strategy
from execution_simulator import WorkloadReport, run_centralized, run_workload
from feature_extractor import FeatureCatalog, QueryFeatures, extract_dataset_features, extract_query_features
from partition_engine import (Partitioning, PartitionTrace, WorkloadPartitioner, build_shards,
                              load_metadata, metadata_json, write_shards)
from query_clustering import ClusterCut, Dendrogram, DistanceMatrix, build_distance_matrix, cut, hac
from query_rewriter import rewrite
from rdf_store import KnowledgeGraph, load_ntriples, write_ntriples
from sparql_query import Query, parse_workload

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.nt"
WORKLOAD_FILE = "workload.rq"
MATRIX_FILE = "matrix.json"
DENDROGRAM_FILE = "dendrogram.txt"
DENDROGRAM_DOT_FILE = "dendrogram.dot"
PARTITION_FILE = "partition.json"
REPORT_FILE = "report.json"

ProgressCallback = Callable[[str, Dict], None]


class PipelineStage:
    FEATURIZING = 'FEATURIZING'
    CLUSTERING = 'CLUSTERING'
    PARTITIONING = 'PARTITIONING'
    EXECUTING = 'EXECUTING'


@dataclass
class WorkloadAnalysis:
    features: List[QueryFeatures]
    matrix: Optional[DistanceMatrix]
    dendrogram: Optional[Dendrogram]
    cut: ClusterCut


@dataclass
class PartitionResult:
    partitioning: Partitioning
    analysis: Optional[WorkloadAnalysis] = None
    trace: Optional[PartitionTrace] = None
    catalog: Optional[FeatureCatalog] = None


def load_workload(path: Union[str, Path]) -> List[Query]:
    return parse_workload(Path(path).read_text(encoding="utf-8"))


def load_shards(directory: Union[str, Path], k: int) -> Dict[int, KnowledgeGraph]:
    return {shard: load_ntriples(Path(directory) / f"shard-{shard}.nt") for shard in range(k)}


class WawPartPipeline:
    """Runs the pipeline stages under one configuration."""

    def __init__(self, config: Optional[PipelineConfig] = None,
                 progress: Optional[ProgressCallback] = None):
        self.config = config or PipelineConfig()
        self._progress = progress

    def _report(self, stage: str, **meta) -> None:
        if self._progress is not None:
            self._progress(stage, meta)

    def generate(self) -> GeneratedBenchmark:
        return generate(self.config.generator_spec())

    def analyze(self, queries: Sequence[Query]) -> WorkloadAnalysis:
        """Featurize the workload, cluster it and cut the dendrogram."""
        self._report(PipelineStage.FEATURIZING, queries=len(queries))
        features = [extract_query_features(q) for q in queries]
        if not features:
            return WorkloadAnalysis(features, None, None, ClusterCut(Fraction(0), ()))

        self._report(PipelineStage.CLUSTERING, queries=len(features))
        matrix = build_distance_matrix(features)
        dendrogram = hac(matrix, self.config.linkage)
        if self.config.cut_distance is not None:
            clusters = cut(dendrogram, distance=self.config.cut_distance)
        else:
            clusters = cut(dendrogram, k=min(self.config.k, len(features)))
        logger.info(f"Cut at {float(clusters.cut_distance):.4f}: {len(clusters.clusters)} clusters")
        return WorkloadAnalysis(features, matrix, dendrogram, clusters)

    def partition(self, graph: KnowledgeGraph, queries: Sequence[Query],
                  strategy: Optional[Strategy] = None) -> PartitionResult:
        strategy = Strategy(strategy or self.config.strategy)
        if strategy is Strategy.RANDOM:
            self._report(PipelineStage.PARTITIONING, strategy=strategy.value)
            return PartitionResult(random_partition(graph, self.config.baseline_spec()))

        analysis = self.analyze(queries)
        catalog = extract_dataset_features(graph, analysis.features)
        self._report(PipelineStage.PARTITIONING, strategy=strategy.value,
                     clusters=len(analysis.cut.clusters))
        partitioner = WorkloadPartitioner(catalog, graph, self.config.k,
                                          self.config.weights(), self.config.epsilon)
        partitioning = partitioner.partition(analysis.cut)
        return PartitionResult(partitioning, analysis, partitioner.trace, catalog)

    def rewrite(self, queries: Sequence[Query], meta: Partitioning) -> Dict[str, str]:
        """Federated SPARQL text per query id."""
        endpoints = self.config.endpoint_map(meta.k)
        return {q.id: rewrite(q, meta).to_sparql(endpoints) for q in queries}

    def run(self, graph: KnowledgeGraph, queries: Sequence[Query], meta: Partitioning) -> WorkloadReport:
        self._report(PipelineStage.EXECUTING, strategy=meta.strategy, queries=len(queries))
        return run_workload(queries, meta, build_shards(graph, meta), self.config.cost_model())

    def compare(self, graph: KnowledgeGraph, queries: Sequence[Query]) -> List[WorkloadReport]:
        """Local centralized, remote centralized, WawPart and random-predicate runs."""
        cm = self.config.cost_model()
        reports = [run_centralized(queries, graph, cm), run_centralized(queries, graph, cm, remote=True)]
        for strategy in (Strategy.WAWPART, Strategy.RANDOM):
            meta = self.partition(graph, queries, strategy).partitioning
            reports.append(self.run(graph, queries, meta))
        return reports


def write_analysis(analysis: WorkloadAnalysis, out_dir: Union[str, Path]) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if analysis.matrix is not None:
        (out / MATRIX_FILE).write_text(analysis.matrix.to_json(), encoding="utf-8")
        written.append(out / MATRIX_FILE)
    if analysis.dendrogram is not None:
        (out / DENDROGRAM_FILE).write_text(analysis.dendrogram.to_text(), encoding="utf-8")
        (out / DENDROGRAM_DOT_FILE).write_text(analysis.dendrogram.to_dot(), encoding="utf-8")
        written.extend([out / DENDROGRAM_FILE, out / DENDROGRAM_DOT_FILE])
    return written


def write_partition(graph: KnowledgeGraph, meta: Partitioning, out_dir: Union[str, Path]) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / PARTITION_FILE).write_text(metadata_json(meta), encoding="utf-8")
    return [out / PARTITION_FILE] + write_shards(build_shards(graph, meta), out)


def read_partition(out_dir: Union[str, Path]) -> Partitioning:
    return load_metadata(json.loads((Path(out_dir) / PARTITION_FILE).read_text(encoding="utf-8")))


def write_benchmark(benchmark: GeneratedBenchmark, out_dir: Union[str, Path]) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ntriples(benchmark.graph, out / DATASET_FILE)
    (out / WORKLOAD_FILE).write_text(benchmark.workload_text, encoding="utf-8")
    return [out / DATASET_FILE, out / WORKLOAD_FILE]
