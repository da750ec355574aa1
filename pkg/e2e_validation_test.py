from types import SimpleNamespace

import httpx
import pytest
import pytest_asyncio

import api
from benchmark_generator import BaselineSpec, random_partition
from conftest import QUERY_2, QUERY_7, QUERY_9, UNIVERSITY_GRAPH
from partition_engine import emit_metadata
from rdf_store import parse_ntriples

pytestmark = pytest.mark.asyncio


@pytest_asyncio.fixture
async def client():
    transport = httpx.ASGITransport(app=api.app)
    async with httpx.AsyncClient(transport=transport, base_url="http://test") as c:
        yield c


@pytest.fixture
def queued(monkeypatch):
    calls = []
    monkeypatch.setattr(api.partition_workload, "apply_async", lambda args, task_id: calls.append((args, task_id)))
    return calls


async def test_api_is_alive(client):
    response = await client.get("/docs")
    assert response.status_code == 200
    assert (await client.get("/")).json()["message"] == "WawPart API"


async def test_health_without_workers(client, monkeypatch):
    monkeypatch.setattr(api.celery_app.control, "inspect", lambda: SimpleNamespace(stats=lambda: None))
    body = (await client.get("/health")).json()
    assert body["services"] == {"api": "healthy", "celery": "no workers"}


async def test_partition_job_is_queued(client, queued):
    response = await client.post("/partition-jobs/", json={
        "dataset": UNIVERSITY_GRAPH, "workload": QUERY_2, "config": {"k": 2},
    })
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "queued"
    assert queued == [([UNIVERSITY_GRAPH, QUERY_2, {"k": 2}], body["job_id"])]


async def test_partition_job_rejects_bad_config(client, queued):
    response = await client.post("/partition-jobs/", json={
        "dataset": UNIVERSITY_GRAPH, "workload": QUERY_2, "config": {"k": 0},
    })
    assert response.status_code == 400
    assert queued == []


async def test_upload_partition_job(client, queued):
    files = {"file": ("data.nt", UNIVERSITY_GRAPH.encode(), "application/n-triples")}
    response = await client.post("/upload-partition-job/", data={"workload": QUERY_2}, files=files)
    assert response.status_code == 200
    assert queued[0][0][0] == UNIVERSITY_GRAPH

    bad = {"file": ("data.nt", b"\xff\xfe", "application/n-triples")}
    assert (await client.post("/upload-partition-job/", data={"workload": QUERY_2}, files=bad)).status_code == 400


async def test_results_of_finished_job(client, monkeypatch):
    finished = SimpleNamespace(state="SUCCESS", result={"status": "success"}, info=None)
    monkeypatch.setattr(api.celery_app, "AsyncResult", lambda job_id: finished)
    body = (await client.get("/results/job-1")).json()
    assert body["state"] == "SUCCESS"
    assert body["progress"]["current"] == body["progress"]["total"] == 4
    assert body["result"] == {"status": "success"}


async def test_results_while_clustering(client, monkeypatch):
    running = SimpleNamespace(state="CLUSTERING", result=None, info={"current": 2, "total": 4})
    monkeypatch.setattr(api.celery_app, "AsyncResult", lambda job_id: running)
    body = (await client.get("/results/job-1")).json()
    assert body["state"] == "CLUSTERING"
    assert body["progress"]["current"] == 2


async def test_analyze(client):
    workload = f"# id: Q7\n{QUERY_7}\n---\n# id: Q9\n{QUERY_9}\n"
    body = (await client.post("/analyze", json={"workload": workload})).json()
    assert body["ids"] == ["Q7", "Q9"]
    assert body["distances"][0][1] == pytest.approx(1 / 3)
    assert body["dendrogram"] == "2 0 1 0.333333\n"
    assert sorted(body["clusters"]) == [["Q7"], ["Q9"]]


async def test_analyze_empty_and_invalid(client):
    assert (await client.post("/analyze", json={"workload": ""})).json()["ids"] == []
    assert (await client.post("/analyze", json={"workload": "SELECT ?x WHERE { ?x ?p ?y }"})).status_code == 400


async def test_rewrite(client):
    meta = random_partition(parse_ntriples(UNIVERSITY_GRAPH), BaselineSpec(seed=1, k=2))
    response = await client.post("/rewrite", json={"workload": QUERY_2, "partition": emit_metadata(meta)})
    assert response.status_code == 200
    assert "SELECT ?X ?Y ?Z" in response.json()["queries"]["Q1"]

    broken = await client.post("/rewrite", json={"workload": "SELECT ?x WHERE { ?x <http://nowhere> ?y }",
                                                 "partition": emit_metadata(meta)})
    assert broken.status_code == 400
