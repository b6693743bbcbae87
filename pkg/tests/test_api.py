import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from app import __version__
from app.main import app

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_document(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


@pytest.fixture
def test_client():
    """Create test client."""
    return TestClient(app)


@pytest.fixture
def m1_document():
    return fixture_document("micro_m1")


class TestRootEndpoints:
    """Test service metadata endpoints"""

    def test_root(self, test_client):
        """Test root endpoint reports name and version"""
        response = test_client.get("/")

        assert response.status_code == 200
        assert response.json() == {"message": "Probabilistic TAP Planner API", "version": __version__}

    def test_health(self, test_client):
        """Test health check endpoint"""
        response = test_client.get("/health")

        assert response.status_code == 200
        assert response.json()["status"] == "healthy"


class TestValidateEndpoint:
    """Test POST /knowledge-bases/validate"""

    def test_valid_document(self, test_client, m1_document):
        """Test validating a well-formed knowledge base"""
        response = test_client.post("/knowledge-bases/validate", json=m1_document)

        assert response.status_code == 200
        assert response.json() == {"valid": True, "violations": []}

    def test_semantic_violations_listed(self, test_client, m1_document):
        """Test overlapping sets come back as violations, not errors"""
        m1_document["temporal_sets"].append({"pre": {}, "members": []})

        response = test_client.post("/knowledge-bases/validate", json=m1_document)

        data = response.json()
        assert response.status_code == 200
        assert data["valid"] is False
        assert data["violations"][0]["kind"] == "overlapping_sets"

    def test_unknown_value(self, test_client, m1_document):
        """Test unknown goal value is rejected with 422"""
        m1_document["goal"] = {"ALT": "high"}

        response = test_client.post("/knowledge-bases/validate", json=m1_document)

        assert response.status_code == 422
        assert response.json()["detail"]["error"] == "reference_error"

    def test_malformed_document(self, test_client, m1_document):
        """Test validation for missing features"""
        del m1_document["features"]

        response = test_client.post("/knowledge-bases/validate", json=m1_document)

        assert response.status_code == 422


class TestPlanEndpoints:
    """Test POST /plans and POST /plans/dot"""

    def test_plan_m1(self, test_client, m1_document):
        """Test planning and scheduling the single-state domain"""
        response = test_client.post("/plans", json={"knowledge_base": m1_document})

        data = response.json()
        assert response.status_code == 200
        assert data["plan"]["goal_path"] == [{"ALT": "low"}, {"ALT": "ok"}]
        assert data["plan"]["goal_path_prob"] == pytest.approx(0.99)
        assert data["schedule"]["taps"][0]["period"] == pytest.approx(3.95)
        assert data["schedule"]["feasible"] is True

    def test_plan_with_config(self, test_client):
        """Test request config overrides the expansion order"""
        response = test_client.post(
            "/plans",
            json={"knowledge_base": fixture_document("flight_fix3_fix4"),
                  "config": {"order": "depth_first"}},
        )

        data = response.json()
        assert response.status_code == 200
        assert data["plan"]["config"]["order"] == "depth_first"
        assert data["plan"]["goal_path_prob"] < 0.1945

    def test_escalation_reported(self, test_client):
        """Test P1 escalation steps appear in the schedule"""
        response = test_client.post("/plans", json={"knowledge_base": fixture_document("flight_tornado")})

        escalations = response.json()["schedule"]["escalations"]
        assert response.status_code == 200
        assert escalations == [{"p1": pytest.approx(0.04), "removed": 1}]

    def test_planning_failure_is_conflict(self, test_client):
        """Test planning failure maps to 409"""
        response = test_client.post(
            "/plans",
            json={"knowledge_base": fixture_document("micro_diamond"), "config": {"initial_p1": 0.7}},
        )

        assert response.status_code == 409
        assert response.json()["detail"]["error"] == "planning_failure"

    def test_invalid_knowledge_base_is_unprocessable(self, test_client, m1_document):
        """Test invalid knowledge base maps to 422"""
        m1_document["temporal_sets"][0]["members"][0]["curve"]["knots"] = [[5.0, 0.0], [10.0, 0.4]]

        response = test_client.post("/plans", json={"knowledge_base": m1_document})

        assert response.status_code == 422
        assert response.json()["detail"]["error"] == "validation_error"

    def test_dot(self, test_client, m1_document):
        """Test DOT export content type and body"""
        response = test_client.post("/plans/dot", json={"knowledge_base": m1_document})

        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/vnd.graphviz")
        assert "digraph" in response.text
        assert "doublecircle" in response.text


class TestSimulationEndpoint:
    """Test POST /simulations"""

    def test_simulation(self, test_client, m1_document):
        """Test simulation report for a guarded domain"""
        response = test_client.post(
            "/simulations", json={"knowledge_base": m1_document, "trials": 50, "seed": 2}
        )

        data = response.json()
        assert response.status_code == 200
        assert data["trials"] == 50
        assert data["frequencies"]["goal"]["frequency"] == 1.0
        assert data["planner_goal_prob"] == pytest.approx(0.99)

    def test_simulation_is_reproducible(self, test_client):
        """Test same seed gives the same report"""
        payload = {"knowledge_base": fixture_document("micro_chain"), "trials": 100, "seed": 8}

        first = test_client.post("/simulations", json=payload).json()
        second = test_client.post("/simulations", json=payload).json()

        assert first == second

    def test_trials_out_of_range(self, test_client, m1_document):
        """Test validation for zero trials"""
        response = test_client.post("/simulations", json={"knowledge_base": m1_document, "trials": 0})

        assert response.status_code == 422
