"""
WawPart - Asynchronous Task Definitions
Partitioning and workload execution jobs run by Master-node workers
"""

import logging
import shutil
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from celery import Task

from celery_app import TaskStates, app
from config import DATA_DIR, load_config
from execution_simulator import compare_reports, run_workload
from partition_engine import build_shards, emit_metadata, load_metadata
from pipeline import WawPartPipeline, write_partition
from rdf_store import parse_ntriples
from sparql_query import parse_workload

logger = logging.getLogger(__name__)


class PipelineTask(Task):
    """
    Celery task base that reports pipeline stages as task states
    """

    def update_task_state(self, state: str, meta: Optional[Dict[str, Any]] = None):
        """Update task state with metadata"""
        self.update_state(state=state, meta=meta or {})

    def progress(self, stage: str, meta: Dict[str, Any]) -> None:
        current = TaskStates.ORDER.index(stage) + 1 if stage in TaskStates.ORDER else 0
        self.update_task_state(stage, {
            'current': current,
            'total': len(TaskStates.ORDER),
            'status': f'{stage.title()}...',
            **meta,
        })

    def pipeline(self, overrides: Optional[Dict[str, Any]]) -> WawPartPipeline:
        config = load_config(None, **(overrides or {}))
        return WawPartPipeline(config, progress=self.progress)


def _failure(self: PipelineTask, result: Dict[str, Any], e: Exception) -> None:
    logger.error(f"Job {self.request.id} failed: {str(e)}")
    result['status'] = 'failed'
    result['errors'].append({
        'type': type(e).__name__,
        'message': str(e),
        'timestamp': datetime.utcnow().isoformat()
    })
    self.update_task_state(
        state=TaskStates.FAILURE,
        meta={'exc_type': type(e).__name__, 'exc_message': str(e)}
    )


@app.task(bind=True, base=PipelineTask, name='tasks.partition_workload')
def partition_workload(self, dataset: str, workload: str,
                       overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Partition a dataset for a workload and store the shard dumps under the
    job's data directory.

    Args:
        dataset: N-Triples text
        workload: workload text (`---`-separated queries)
        overrides: PipelineConfig fields

    Returns:
        Partition metadata, cluster cut and output location
    """
    result: Dict[str, Any] = {'job_id': self.request.id, 'status': 'processing', 'errors': []}
    try:
        pipeline = self.pipeline(overrides)
        graph = parse_ntriples(dataset)
        queries = parse_workload(workload)
        partitioned = pipeline.partition(graph, queries)

        out_dir = DATA_DIR / str(self.request.id)
        write_partition(graph, partitioned.partitioning, out_dir)

        result.update({
            'status': 'success',
            'triples': len(graph),
            'queries': len(queries),
            'partition': emit_metadata(partitioned.partitioning),
            'clusters': [list(c) for c in partitioned.analysis.cut.clusters] if partitioned.analysis else [],
            'output_dir': str(out_dir),
            'completed_at': datetime.utcnow().isoformat(),
        })
        logger.info(f"Job {self.request.id}: partitioned {len(graph)} triples into {partitioned.partitioning.k} shards")
        return result
    except ValueError as e:
        _failure(self, result, e)
        raise


@app.task(bind=True, base=PipelineTask, name='tasks.execute_workload')
def execute_workload(self, dataset: str, workload: str, partition: Dict[str, Any],
                     overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Run a workload against the shards described by partition metadata.

    Returns:
        The workload report as JSON-ready data
    """
    result: Dict[str, Any] = {'job_id': self.request.id, 'status': 'processing', 'errors': []}
    try:
        pipeline = self.pipeline(overrides)
        graph = parse_ntriples(dataset)
        queries = parse_workload(workload)
        meta = load_metadata(partition, graph)
        self.progress(TaskStates.EXECUTING, {'queries': len(queries)})
        report = run_workload(queries, meta, build_shards(graph, meta), pipeline.config.cost_model())
        result.update({
            'status': 'success',
            'report': report.model_dump(mode='json'),
            'completed_at': datetime.utcnow().isoformat(),
        })
        return result
    except ValueError as e:
        _failure(self, result, e)
        raise


@app.task(bind=True, base=PipelineTask, name='tasks.compare_strategies')
def compare_strategies(self, dataset: str, workload: str,
                       overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Centralized, WawPart and random-predicate runs of one workload."""
    result: Dict[str, Any] = {'job_id': self.request.id, 'status': 'processing', 'errors': []}
    try:
        pipeline = self.pipeline(overrides)
        reports = pipeline.compare(parse_ntriples(dataset), parse_workload(workload))
        result.update({
            'status': 'success',
            'reports': [r.model_dump(mode='json') for r in reports],
            'table': compare_reports(reports),
            'completed_at': datetime.utcnow().isoformat(),
        })
        return result
    except ValueError as e:
        _failure(self, result, e)
        raise


@app.task(name='tasks.cleanup_old_jobs')
def cleanup_old_jobs(days_old: int = 7, data_dir: Optional[str] = None) -> Dict[str, int]:
    """
    Remove job output directories older than `days_old` days

    Returns:
        Cleanup statistics
    """
    root = Path(data_dir) if data_dir else DATA_DIR
    logger.info(f"Cleaning up job outputs older than {days_old} days in {root}")
    if not root.is_dir():
        return {'cleaned_jobs': 0}

    current_time = time.time()
    cleaned = 0
    for job_dir in root.iterdir():
        if not job_dir.is_dir():
            continue
        try:
            age_days = (current_time - job_dir.stat().st_mtime) / 86400
            if age_days > days_old:
                shutil.rmtree(job_dir)
                cleaned += 1
        except OSError as e:
            logger.warning(f"Failed to clean up {job_dir}: {str(e)}")
    return {'cleaned_jobs': cleaned}
