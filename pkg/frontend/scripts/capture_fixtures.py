"""Capture console test fixtures from a live analysis service.

Runs the full analyst flow against the real job service in-process and
dumps every payload the console consumes, so the TypeScript tests render
and replay exactly what the backend produces. Re-run after backend changes:

    python3 scripts/capture_fixtures.py
"""

import json
import sys
import time
from pathlib import Path

from fastapi.testclient import TestClient

import kpa
from kpa.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
DATA_DIR = Path(kpa.__file__).resolve().parent / "data"

RENAME_TEXT = "Improve road maintenance citywide."


def wait_done(client, job_id):
    deadline = time.monotonic() + 15
    while time.monotonic() < deadline:
        doc = client.get(f"/v1/jobs/{job_id}").json()
        if doc["status"] in ("done", "failed"):
            assert doc["status"] == "done", doc
            return doc
        time.sleep(0.01)
    raise RuntimeError("job did not finish")


def dump(name, payload):
    path = FIXTURES / name
    if isinstance(payload, bytes):
        path.write_bytes(payload)
    else:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(FIXTURES.parent)}")


def main(store_dir):
    records = [
        json.loads(line)
        for line in (DATA_DIR / "mini_corpus.jsonl").read_text().splitlines()
        if line.strip()
    ]
    payload = {
        "dataset": records,
        "config": {
            "domain": "survey",
            "selection_threshold": 0.5,
            "max_kps": 10,
            "policy": "bm+th",
            "threshold": 0.5,
            "seed": 7,
            "scorer": f"table:{DATA_DIR / 'mini_scores.json'}",
        },
    }
    FIXTURES.mkdir(exist_ok=True)
    with TestClient(create_app(store_dir, workers=2)) as client:
        job_id = client.post("/v1/jobs", json=payload).json()["job_id"]
        dump("job_done.json", wait_done(client, job_id))
        dump("keypoints_v0.json", client.get(f"/v1/jobs/{job_id}/versions/0/keypoints").json())
        dump(
            "drilldown_kp_c1_page1.json",
            client.get(
                f"/v1/jobs/{job_id}/versions/0/keypoints/kp_c1/comments",
                params={"page": 1, "size": 2},
            ).json(),
        )
        dump(
            "drilldown_kp_c1_page2.json",
            client.get(
                f"/v1/jobs/{job_id}/versions/0/keypoints/kp_c1/comments",
                params={"page": 2, "size": 2},
            ).json(),
        )
        dump("version0_before.json", client.get(f"/v1/jobs/{job_id}/versions/0").content)

        dump(
            "revise_rename.json",
            client.patch(
                f"/v1/jobs/{job_id}/keypoints/kp_c1", json={"text": RENAME_TEXT}
            ).json(),
        )
        dump(
            "revise_delete.json",
            client.patch(
                f"/v1/jobs/{job_id}/keypoints/kp_c6", json={"deleted": True}
            ).json(),
        )
        dump("rematch.json", client.post(f"/v1/jobs/{job_id}/rematch").json())
        dump("job_after_rematch.json", client.get(f"/v1/jobs/{job_id}").json())
        dump("keypoints_v1.json", client.get(f"/v1/jobs/{job_id}/versions/1/keypoints").json())
        dump("version0_after.json", client.get(f"/v1/jobs/{job_id}/versions/0").content)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        main(Path(tmp) / "store")
    sys.exit(0)
