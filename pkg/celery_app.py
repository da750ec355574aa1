"""
WawPart - Celery Configuration
Master-node job queue for long partitioning and execution runs
"""

from celery import Celery

from config import REDIS_URL
from pipeline import PipelineStage

# Create Celery instance
app = Celery(
    'wawpart',
    broker=REDIS_URL,
    backend=REDIS_URL,
    include=['tasks']
)

# Celery configuration
app.conf.update(
    # Task configuration
    task_serializer='json',
    accept_content=['json'],
    result_serializer='json',
    timezone='UTC',
    enable_utc=True,

    # Partitioning is CPU bound; one job per worker process at a time
    worker_prefetch_multiplier=1,
    worker_max_tasks_per_child=100,

    # Task routing
    task_routes={
        'tasks.partition_workload': {'queue': 'partitioning'},
        'tasks.execute_workload': {'queue': 'execution'},
        'tasks.compare_strategies': {'queue': 'execution'},
    },

    # Result backend settings
    result_expires=86400,

    # Task execution settings
    task_acks_late=True,
    task_reject_on_worker_lost=True,

    # Monitoring
    worker_send_task_events=True,
    task_send_sent_event=True
)


# Task state definitions
class TaskStates:
    PENDING = 'PENDING'
    FEATURIZING = PipelineStage.FEATURIZING
    CLUSTERING = PipelineStage.CLUSTERING
    PARTITIONING = PipelineStage.PARTITIONING
    EXECUTING = PipelineStage.EXECUTING
    SUCCESS = 'SUCCESS'
    FAILURE = 'FAILURE'

    ORDER = (FEATURIZING, CLUSTERING, PARTITIONING, EXECUTING)


app.conf.beat_schedule = {
    'cleanup-old-job-outputs': {
        'task': 'tasks.cleanup_old_jobs',
        'schedule': 3600.0,  # Every hour
    },
}
