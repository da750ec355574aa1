"""
WawPart - FastAPI Application
Master-node HTTP API: partitioning and execution jobs, synchronous workload
analysis and query rewriting
"""

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import Dict, Any, Optional, List
from datetime import datetime
import uuid
import logging

from celery_app import app as celery_app, TaskStates
from config import PipelineConfig, configure_logging, load_config
from partition_engine import load_metadata
from pipeline import WawPartPipeline
from sparql_query import parse_workload
from tasks import compare_strategies, execute_workload, partition_workload

# Configure logging
configure_logging("INFO")
logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="WawPart API",
    description="Workload-aware knowledge graph partitioning master node",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models for API
class PartitionJobRequest(BaseModel):
    dataset: str = Field(description="Knowledge graph as N-Triples text")
    workload: str = Field(description="Workload queries separated by --- lines")
    config: Dict[str, Any] = Field(default_factory=dict, description="PipelineConfig overrides")


class ExecutionJobRequest(PartitionJobRequest):
    partition: Dict[str, Any] = Field(description="Partition metadata from a finished partition job")


class JobResponse(BaseModel):
    job_id: str = Field(description="Unique job identifier for tracking")
    kind: str = Field(description="Job type")
    status: str = Field(description="Initial job status")
    created_at: datetime = Field(description="Job creation timestamp")


class JobStatusResponse(BaseModel):
    job_id: str
    state: str = Field(description="Current job state")
    progress: Dict[str, Any] = Field(description="Progress information")
    result: Optional[Dict[str, Any]] = Field(description="Final results if complete")
    error: Optional[Dict[str, Any]] = Field(description="Error details if failed")


class HealthCheckResponse(BaseModel):
    status: str
    timestamp: datetime
    services: Dict[str, str]


class AnalyzeRequest(BaseModel):
    workload: str = Field(description="Workload queries separated by --- lines")
    config: Dict[str, Any] = Field(default_factory=dict)


class AnalyzeResponse(BaseModel):
    ids: List[str]
    distances: List[List[float]]
    dendrogram: str = Field(description="One merge per line: new left right height")
    clusters: List[List[str]]


class RewriteRequest(BaseModel):
    workload: str
    partition: Dict[str, Any] = Field(description="Partition metadata")
    config: Dict[str, Any] = Field(default_factory=dict)


class RewriteResponse(BaseModel):
    queries: Dict[str, str] = Field(description="Federated SPARQL per query id")


def _config(overrides: Dict[str, Any]) -> PipelineConfig:
    try:
        return load_config(None, **overrides)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


def _queue(task, kind: str, args: List[Any]) -> JobResponse:
    job_id = str(uuid.uuid4())
    task.apply_async(args=args, task_id=job_id)
    logger.info(f"Queued {kind} job: {job_id}")
    return JobResponse(job_id=job_id, kind=kind, status="queued", created_at=datetime.utcnow())


# API Endpoints
@app.get("/", response_model=Dict[str, str])
async def root():
    """Root endpoint"""
    return {
        "message": "WawPart API",
        "version": "1.0.0",
        "docs": "/docs"
    }


@app.get("/health", response_model=HealthCheckResponse)
async def health_check():
    """Health check endpoint"""
    celery_status = "healthy"
    try:
        stats = celery_app.control.inspect().stats()
        if not stats:
            celery_status = "no workers"
    except Exception as e:
        celery_status = f"error: {str(e)}"

    return HealthCheckResponse(
        status="healthy",
        timestamp=datetime.utcnow(),
        services={
            "api": "healthy",
            "celery": celery_status
        }
    )


@app.post("/partition-jobs/", response_model=JobResponse)
async def create_partition_job(request: PartitionJobRequest):
    """
    Queue a partitioning run

    Stages: FEATURIZING, CLUSTERING, PARTITIONING
    """
    _config(request.config)
    try:
        return _queue(partition_workload, "partition", [request.dataset, request.workload, request.config])
    except Exception as e:
        logger.error(f"Error queuing partition job: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/upload-partition-job/", response_model=JobResponse)
async def upload_partition_job(workload: str = Form(...), file: UploadFile = File(...)):
    """Queue a partitioning run for an uploaded N-Triples file"""
    content = await file.read()
    try:
        dataset = content.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail=f"{file.filename} is not UTF-8 N-Triples")
    try:
        return _queue(partition_workload, "partition", [dataset, workload, {}])
    except Exception as e:
        logger.error(f"Error queuing uploaded dataset: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/execution-jobs/", response_model=JobResponse)
async def create_execution_job(request: ExecutionJobRequest):
    """Queue a workload run against partition metadata"""
    _config(request.config)
    try:
        return _queue(execute_workload, "execution",
                      [request.dataset, request.workload, request.partition, request.config])
    except Exception as e:
        logger.error(f"Error queuing execution job: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/compare-jobs/", response_model=JobResponse)
async def create_compare_job(request: PartitionJobRequest):
    """Queue centralized, WawPart and random-predicate runs of one workload"""
    _config(request.config)
    try:
        return _queue(compare_strategies, "compare", [request.dataset, request.workload, request.config])
    except Exception as e:
        logger.error(f"Error queuing compare job: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/results/{job_id}", response_model=JobStatusResponse)
async def get_job_results(job_id: str):
    """
    Get the status and results of a job

    States: PENDING, FEATURIZING, CLUSTERING, PARTITIONING, EXECUTING,
    SUCCESS, FAILURE
    """
    total = len(TaskStates.ORDER)
    try:
        result = celery_app.AsyncResult(job_id)

        if result.state == TaskStates.PENDING:
            return JobStatusResponse(
                job_id=job_id,
                state=TaskStates.PENDING,
                progress={'current': 0, 'total': total, 'status': 'Job is queued and waiting to start'},
                result=None,
                error=None
            )

        if result.state == TaskStates.SUCCESS:
            return JobStatusResponse(
                job_id=job_id,
                state=TaskStates.SUCCESS,
                progress={'current': total, 'total': total, 'status': 'Processing complete'},
                result=result.result,
                error=None
            )

        if result.state == TaskStates.FAILURE:
            return JobStatusResponse(
                job_id=job_id,
                state=TaskStates.FAILURE,
                progress={'current': 0, 'total': total, 'status': 'Processing failed'},
                result=None,
                error={'type': 'PipelineError', 'message': str(result.info)}
            )

        return JobStatusResponse(
            job_id=job_id,
            state=result.state,
            progress=result.info or {'current': 1, 'total': total, 'status': f'Processing: {result.state}'},
            result=None,
            error=None
        )

    except Exception as e:
        logger.error(f"Error getting job results: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.delete("/jobs/{job_id}")
async def cancel_job(job_id: str):
    """Cancel a running job"""
    try:
        celery_app.control.revoke(job_id, terminate=True)
        return {"message": f"Job {job_id} cancelled"}
    except Exception as e:
        logger.error(f"Error cancelling job: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/jobs/active", response_model=List[Dict[str, Any]])
async def get_active_jobs():
    """Get list of active jobs"""
    try:
        active = celery_app.control.inspect().active()
        if not active:
            return []
        return [
            {'job_id': task['id'], 'name': task['name'], 'worker': worker}
            for worker, tasks in active.items()
            for task in tasks
        ]
    except Exception as e:
        logger.error(f"Error getting active jobs: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/analyze", response_model=AnalyzeResponse)
async def analyze_workload(request: AnalyzeRequest):
    """Distance matrix, dendrogram and cut for a workload"""
    pipeline = WawPartPipeline(_config(request.config))
    try:
        analysis = pipeline.analyze(parse_workload(request.workload))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    if analysis.matrix is None:
        return AnalyzeResponse(ids=[], distances=[], dendrogram="", clusters=[])
    return AnalyzeResponse(
        ids=list(analysis.matrix.ids),
        distances=analysis.matrix.as_array().tolist(),
        dendrogram=analysis.dendrogram.to_text(),
        clusters=[list(c) for c in analysis.cut.clusters],
    )


@app.post("/rewrite", response_model=RewriteResponse)
async def rewrite_workload(request: RewriteRequest):
    """Federated SPARQL for every workload query under the given metadata"""
    pipeline = WawPartPipeline(_config(request.config))
    try:
        meta = load_metadata(request.partition)
        return RewriteResponse(queries=pipeline.rewrite(parse_workload(request.workload), meta))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
