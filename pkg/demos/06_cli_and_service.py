"""The application surface: train/sample/repaint/eval via the CLI entry
points, then the same generation through the HTTP service used by the
browser UI.

Run:  python3 demos/06_cli_and_service.py [workdir]
"""

import json
import os
import sys
import time

from fastapi.testclient import TestClient

from diffdesign.appshell.cli import main as cli
from diffdesign.appshell.service import create_app

work = sys.argv[1] if len(sys.argv) > 1 else "demo_out/cli"
os.makedirs(work, exist_ok=True)
ckpt = os.path.join(work, "ckpt")

cfg_path = os.path.join(work, "train_config.json")
with open(cfg_path, "w") as fh:
    json.dump({"T": 80, "train_rows": 800, "width": 64, "blocks": 1, "embed_dim": 32,
               "epochs": 80, "guidance_epochs": 60, "predictor_width": 64,
               "lr_final": 1e-4, "seed": 0}, fh)

print("== train ==")
cli(["train", "--problem", "synthetic-16", "--config", cfg_path, "--out", ckpt])

print("\n== sample ==")
gen_csv = os.path.join(work, "generated.csv")
cli(["sample", "--ckpt", ckpt, "--target", "0.15", "--n", "32", "--seed", "1",
     "--out", gen_csv])

print("\n== repaint (fix the first four parameters of a generated row) ==")
rep_csv = os.path.join(work, "completed.csv")
cli(["repaint", "--ckpt", ckpt, "--reference", gen_csv, "--mask", "0-3",
     "--target", "0.15", "--n", "16", "--resample", "10", "--seed", "2",
     "--out", rep_csv])

print("\n== eval ==")
cli(["eval", "mape", "--a", rep_csv, "--target", "0.15",
     "--out", os.path.join(work, "mape.json")])
cli(["eval", "mmd", "--a", gen_csv, "--b", rep_csv,
     "--out", os.path.join(work, "mmd.json")])

print("\n== HTTP service (in-process test client; `diffdesign serve` runs it) ==")
client = TestClient(create_app(work))
models = client.get("/api/models").json()
print("models:", [m["id"] for m in models])

job = client.post("/api/generate", json={
    "model": "ckpt", "condition": {"target": 0.15}, "mask_spec": "first-2/8",
    "reference": [0.5] * 16, "n": 4, "seed": 3, "resample_u": 5,
}).json()
while True:
    status = client.get(f"/api/jobs/{job['job_id']}").json()
    if status["state"] in ("done", "failed"):
        break
    time.sleep(0.1)
result = client.get(f"/api/jobs/{job['job_id']}/result").json()
first = result["designs"][0]
print(f"job {status['state']}: {len(result['designs'])} designs, "
      f"first predicted performance {first['predicted_performance']:.4f}, "
      f"feasible {first['feasible']}")
