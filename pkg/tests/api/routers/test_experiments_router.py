import os
import tempfile
from unittest import IsolatedAsyncioTestCase
from unittest.mock import patch

from fastapi.testclient import TestClient

from app import app
from api.services.experiment_service import ExperimentService
from core.exceptions import NumericalFailure
from schemas.experiments import EXPERIMENTS, SYSTEMS


class TestExperimentsRouter(IsolatedAsyncioTestCase):
    async def asyncSetUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.out_dir = os.path.join(self.tmpdir.name, "run")
        self.client = TestClient(app)

    async def asyncTearDown(self):
        self.client.close()
        self.tmpdir.cleanup()

    async def test_catalog(self):
        r = self.client.get("/api/v1/experiments/")
        self.assertEqual(r.status_code, 200, r.text)
        body = r.json()
        self.assertEqual(body["experiments"], EXPERIMENTS)
        self.assertEqual(body["systems"], SYSTEMS)
        self.assertEqual(body["default_eps"]["magnus-linear-order"], [0.2, 0.1, 0.05, 0.025])

    async def test_run_oracle_crosscheck(self):
        payload = {"experiment": "oracle-crosscheck", "order": 2, "out_dir": self.out_dir}
        r = self.client.post("/api/v1/experiments/", json=payload)
        self.assertEqual(r.status_code, 200, r.text)
        body = r.json()
        self.assertEqual(body["experiment"], "oracle-crosscheck")
        self.assertTrue(body["passed"], body["diagnostics"])
        self.assertTrue(os.path.exists(os.path.join(self.out_dir, "summary.json")))

    async def test_unknown_key_is_rejected(self):
        payload = {"experiment": "magnus-linear-order", "bogus": 1, "out_dir": self.out_dir}
        r = self.client.post("/api/v1/experiments/", json=payload)
        self.assertEqual(r.status_code, 422)

    async def test_unknown_experiment_is_rejected(self):
        r = self.client.post("/api/v1/experiments/", json={"experiment": "nope"})
        self.assertEqual(r.status_code, 422)

    async def test_non_positive_eps_is_rejected(self):
        payload = {"experiment": "magnus-nonlinear", "eps": [0.1, -0.1], "out_dir": self.out_dir}
        r = self.client.post("/api/v1/experiments/", json=payload)
        self.assertEqual(r.status_code, 422)

    async def test_wrong_system_is_a_bad_request(self):
        payload = {"experiment": "magnus-nonlinear", "system": "nls1d", "out_dir": self.out_dir}
        r = self.client.post("/api/v1/experiments/", json=payload)
        self.assertEqual(r.status_code, 400, r.text)

    async def test_numerical_failure_is_a_server_error(self):
        payload = {"experiment": "vdp-averaging", "out_dir": self.out_dir}
        with patch.object(
            ExperimentService, "run_experiment", side_effect=NumericalFailure("step size underflow")
        ):
            r = self.client.post("/api/v1/experiments/", json=payload)
        self.assertEqual(r.status_code, 500)
        self.assertIn("step size underflow", r.json()["detail"])
