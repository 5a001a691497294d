import json
import subprocess
import sys


def test_backend_benchmark_smoke(tmp_path):
    out = tmp_path / "bench.json"
    subprocess.run([sys.executable, "benchmarks/bench_backends.py", "--repeat", "1", "--n", "2", "--json", str(out)], check=True, capture_output=True)
    rows = json.loads(out.read_text())
    assert len(rows) == 5 and all(r["agree"] for r in rows)
