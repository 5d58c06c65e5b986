"""Smoke test for the vortexlab Python extension.

Install with `pip install --no-build-isolation -e crates/python`, then run
`python python/smoke_test.py` from the repository root.
"""

import json
import math
import pathlib
import tempfile

import vortexlab

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def check_law():
    text = (CONFIGS / "law_radial.json").read_text()
    t_star, reason, rows = vortexlab.integrate_law(text)
    assert reason == "horizon" and t_star == 1.0, (t_star, reason)
    x0, y0 = rows[0][3], rows[0][4]
    worst = 0.0
    for _, _, t, x, y in rows:
        decay = math.exp(-2.0 * t)
        worst = max(worst, math.hypot(x - (1.0 + (x0 - 1.0) * decay), y - (1.0 + (y0 - 1.0) * decay)))
    assert worst < 1e-6, worst


def check_hash():
    cfg = json.loads((CONFIGS / "law_radial.json").read_text())
    permuted = json.dumps(dict(reversed(list(cfg.items()))))
    assert vortexlab.config_hash(json.dumps(cfg)) == vortexlab.config_hash(permuted)
    cfg["pinning"]["b"] = "exp((x - 1)^2 + * y)"
    try:
        vortexlab.config_hash(json.dumps(cfg))
    except ValueError as e:
        assert "pinning.b" in str(e), e
    else:
        raise AssertionError("malformed expression accepted")


def check_commands():
    with tempfile.TemporaryDirectory() as out:
        outcome = json.loads(vortexlab.run("law", str(CONFIGS / "law_radial.json"), out))
        assert outcome["passed"], outcome
        rows = vortexlab.read_trajectories((pathlib.Path(out) / "law.csv").read_text())
        assert rows[0][:3] == (0, 1, 0.0), rows[0]
        envelope = json.loads((pathlib.Path(out) / "law.json").read_text())
        assert envelope["config_hash"] == outcome["config_hash"]
        assert envelope["version"] == vortexlab.__version__

        outcome = json.loads(vortexlab.run("critical", str(CONFIGS / "critical.json"), out))
        estimate = outcome["results"]["report"]["estimate"]
        assert estimate["kind"] == "bracket" and abs(estimate["lambda0"] - 0.4) < 2e-3, estimate


def check_snapshot():
    cfg = json.loads((CONFIGS / "fields.json").read_text())
    cfg["domain"].update(nx=33, ny=33)
    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "fields.json"
        path.write_text(json.dumps(cfg))
        json.loads(vortexlab.run("fields", str(path), tmp))
        kind, nx, ny, lx, ly, values = vortexlab.load_snapshot(str(pathlib.Path(tmp) / "Z.vxf"))
        assert (kind, nx, ny, lx, ly) == ("vector", 33, 33, 1.0, 1.0)
        assert len(values) == 2 * nx * ny and all(math.isfinite(v) for v in values)


if __name__ == "__main__":
    check_law()
    check_hash()
    check_commands()
    check_snapshot()
    print("python smoke test passed")
