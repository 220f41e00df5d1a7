import json

import jsonschema
import numpy as np
import pytest
import yaml

from artifact import cli_io as ci
from artifact import fluid_models as fm

SMALL = """
regime: A
epsilon: 0.5
grid: {nx: 8, nv: 8, vmax: 5.0}
time: {tmax: 0.01, policy: fixed, dt: 0.002}
"""


def _cfg(tmp_path, text=SMALL, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_config_gives_defaults():
    cfg = ci.parse_config("")
    assert cfg == ci.RunConfig()
    assert cfg.regime == "A" and cfg.grid.nx == 64 and cfg.time.policy == "cfl"


@pytest.mark.parametrize("text, where", [
    ("species: {m_plus: -1}", "species.m_plus"),
    ("grid: {nx: 32, bogus: 1}", "grid.bogus"),
    ("regime: Q", "regime"),
    ("grid: {nv: 9}", "grid.nv"),
    ("time: {cfl: fast}", "time.cfl"),
])
def test_invalid_config_names_the_key(text, where):
    with pytest.raises(ci.ConfigError) as ei:
        ci.parse_config(text)
    assert ei.value.path == where and where in str(ei.value)


def test_serialize_roundtrip_is_byte_identical():
    cfg = ci.parse_config(SMALL)
    text = ci.serialize_config(cfg)
    again = ci.serialize_config(ci.parse_config(text))
    assert again == text and ci.parse_config(text) == cfg


def test_report_and_timeseries_writers(tmp_path):
    rows = [{"t": 0.1 * k, "step": k} for k in range(4)]
    p = ci.write_timeseries(rows, tmp_path / "a" / "ts.csv", ["t", "step", "mass"])
    head, data = ci.read_timeseries(p)
    assert head == ["t", "step", "mass"] and data.shape == (4, 3) and np.isnan(data[:, 2]).all()
    r = ci.write_report({"command": "relax", "x": float("nan"), "steps": 1}, tmp_path / "r.json")
    doc = json.loads(r.read_text())
    assert doc["x"] is None and doc["schema_version"] == 1


def test_unwritable_output_is_reported(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ci.OutputError):
        ci.write_report({}, blocker / "sub" / "r.json")


def test_checkpoint_restore_is_bit_exact(tmp_path):
    s = fm.make_state("NSFMaxwell", 8, 8, coeffs=fm.FluidCoefficients(eta=0.3, nu=0.1))
    rng = np.random.default_rng(1)
    s.theta = rng.standard_normal((8, 8))
    s.em.B[2] = rng.standard_normal((8, 8))
    s.t = 0.1 + 1e-17 * 3
    back, meta = ci.restore(ci.checkpoint(s, tmp_path / "c.npz", {"k": 1}))
    assert meta == {"k": 1} and back.t == s.t and back.model is s.model and back.coeffs == s.coeffs
    for a, b in ((back.theta, s.theta), (back.em.B, s.em.B), (back.u, s.u)):
        assert np.array_equal(a, b)


def test_kinetic_command_outputs_and_resume(tmp_path, capsys):
    c = _cfg(tmp_path)
    out = tmp_path / "k"
    assert ci.main(["--config", str(c), "--out-dir", str(out), "kinetic"]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["command"] == "kinetic" and summary["steps"] == 5
    head, data = ci.read_timeseries(out / "timeseries.csv")
    assert head == list(ci.KINETIC_COLUMNS) and data.shape[0] == 5 + 1
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, ci.report_schema())
    assert rep["mass_drift"] < 1e-12
    assert ci.main(["--config", str(c), "--out-dir", str(tmp_path / "k2"), "kinetic",
                    "--resume", str(out / "checkpoint.npz")]) == 0
    st, _ = ci.restore(tmp_path / "k2" / "checkpoint.npz")
    assert st.step == 10


def test_same_config_and_seed_is_deterministic(tmp_path):
    c = _cfg(tmp_path, "grid: {nv: 8, vmax: 5.0}\ntime: {tmax: 0.2, dt: 0.05, policy: fixed}\n")
    for d in ("r1", "r2"):
        assert ci.main(["--config", str(c), "--out-dir", str(tmp_path / d), "--seed", "7", "relax"]) == 0
    for f in ("timeseries.csv", "report.json"):
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()
    c1, c2 = (ci.load_config(tmp_path / d / "config.resolved.yaml") for d in ("r1", "r2"))
    c2.out_dir = c1.out_dir
    assert c1 == c2
    jsonschema.validate(json.loads((tmp_path / "r1" / "report.json").read_text()), ci.report_schema())
    assert yaml.safe_load((tmp_path / "r1" / "config.resolved.yaml").read_text())["seed"] == 7


def test_fluid_and_transport_commands(tmp_path):
    c = _cfg(tmp_path, "model: ResistiveMHD\ngrid: {nx: 16, nv: 8}\ntime: {tmax: 0.02}\nfluid: {eta: 0.5}\n")
    assert ci.main(["--config", str(c), "--out-dir", str(tmp_path / "f"), "fluid"]) == 0
    rep = json.loads((tmp_path / "f" / "report.json").read_text())
    head, data = ci.read_timeseries(tmp_path / "f" / "timeseries.csv")
    assert data.shape[0] == rep["steps"] + 1 and head == list(ci.FLUID_COLUMNS)
    c2 = _cfg(tmp_path, "grid: {nv: 12}\ncollision: {nu0: 2.0}\n", "t.yaml")
    assert ci.main(["--config", str(c2), "--out-dir", str(tmp_path / "t"), "transport"]) == 0
    jsonschema.validate(json.loads((tmp_path / "t" / "report.json").read_text()), ci.report_schema())


def test_sweep_and_compare_commands(tmp_path):
    c = _cfg(tmp_path, "regime: B\ngrid: {nx: 16, nv: 8}\ntime: {tmax: 0.005}\n")
    assert ci.main(["--config", str(c), "--out-dir", str(tmp_path / "s"), "sweep"]) == 0
    rep = json.loads((tmp_path / "s" / "report.json").read_text())
    jsonschema.validate(rep, ci.report_schema())
    assert "runtimes" not in rep and (tmp_path / "s" / "timing.json").exists()
    _, data = ci.read_timeseries(tmp_path / "s" / "sweep.csv")
    assert data.shape[0] == 3
    c2 = _cfg(tmp_path, "grid: {nx: 16}\ntime: {tmax: 0.01}\nsweep: {epsilons: [0.1, 0.01, 0.001]}\n", "ch.yaml")
    assert ci.main(["--config", str(c2), "--out-dir", str(tmp_path / "ch"), "compare", "--chain"]) == 0
    ch = json.loads((tmp_path / "ch" / "report.json").read_text())
    assert len(ch["distances"]) == 3
    assert ci.main(["--config", str(c), "--out-dir", str(tmp_path / "x"), "compare"]) == 2


def test_bad_config_exits_with_code_2(tmp_path, capsys):
    c = _cfg(tmp_path, "species: {m_plus: -1}\n")
    assert ci.main(["--config", str(c), "relax"]) == 2
    assert "species.m_plus" in capsys.readouterr().err
    assert ci.main(["--config", str(tmp_path / "missing.yaml"), "relax"]) == 2
