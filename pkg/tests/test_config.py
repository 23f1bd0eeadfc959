import json

import pytest

from contact_fronts.config import AuditConfig, PolicyConfig, RunConfig, SweepConfig, load_config
from contact_fronts.errors import ConfigError
from contact_fronts.lattice import ProcessKind
from contact_fronts.renewal import CertificateConstants, PolicyMode


def test_defaults_validate():
    config = RunConfig().validate()
    assert config.kind == "spont"
    assert config.retain == "full"
    assert config.process_kinds == [ProcessKind.SPONT]
    assert RunConfig(kind="coupled").process_kinds == list(ProcessKind)


def test_round_trip_through_dict(small_config):
    data = small_config.to_dict()
    assert data["lambda"] == 4.0
    assert "lambda_" not in data
    assert data["audit"]["lambda"] == 4.0
    assert RunConfig.from_dict(data) == small_config


def test_unknown_keys_are_named():
    with pytest.raises(ConfigError, match="'speed'"):
        RunConfig.from_dict({"speed": 1})
    with pytest.raises(ConfigError, match="'audit.budget'"):
        RunConfig.from_dict({"audit": {"budget": 10}})


@pytest.mark.parametrize(
    "data, key",
    [
        ({"kind": "voter"}, "kind"),
        ({"lambda": 0}, "lambda"),
        ({"p": 1.5}, "p"),
        ({"horizon": -1}, "horizon"),
        ({"trials": 0}, "trials"),
        ({"trials": 2.5}, "trials"),
        ({"seed": -1}, "seed"),
        ({"retain": "some"}, "retain"),
        ({"initial": "single:x"}, "initial"),
        ({"progress": "maybe"}, "progress"),
        ({"horizons": 4.0}, "horizons"),
        ({"policy": {"mode": "guess"}}, "policy.mode"),
        ({"policy": {"family_size": 1}}, "policy.family_size"),
        ({"policy": {"L1": 5, "L2": 4}}, "policy.L2"),
        ({"sweep": {"kinds": ["coupled"]}}, "sweep.kinds"),
        ({"sweep": {"ps": []}}, "sweep.ps"),
        ({"audit": {"truncation_radii": [5]}}, "audit.truncation_radii"),
        ({"audit": {"coupling_horizon": 0}}, "audit.coupling_horizon"),
    ],
)
def test_bad_values(data, key):
    with pytest.raises(ConfigError, match=f"'{key}'"):
        RunConfig.from_dict(data)


def test_sections_must_be_tables():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"sweep": [1, 2]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict([("kind", "spont")])


def test_load_toml(tmp_path):
    path = tmp_path / "sim.toml"
    path.write_text('kind = "is"\nlambda = 3.5\n\n[policy]\nfamily_size = 4\n\n[sweep]\nps = [0.5, 1.0]\n')
    config = load_config(str(path))
    assert config.kind == "is"
    assert config.lambda_ == 3.5
    assert config.policy.family_size == 4
    assert config.sweep.cells() == [(4.0, 0.5), (4.0, 1.0)]


def test_load_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"kind": "cp", "p": 1.0, "audit": {"lambda": 2.0}}))
    config = load_config(str(path))
    assert config.kind == "cp"
    assert config.audit.lambda_ == 2.0


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(str(tmp_path / "missing.toml"))
    broken = tmp_path / "broken.json"
    broken.write_text("{kind: ")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(str(broken))


def test_defaults_without_a_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("SIM_SEED", "SIM_OUTPUT_DIR", "SIM_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    assert load_config() == RunConfig()


def test_environment_fills_unset_fields(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SIM_SEED", "77")
    monkeypatch.setenv("SIM_WORKERS", "3")
    monkeypatch.setenv("SIM_OUTPUT_DIR", "elsewhere")
    (tmp_path / "sim.toml").write_text("seed = 5\n")
    config = load_config()
    assert config.seed == 5
    assert config.workers == 3
    assert config.output_dir == "elsewhere"


def test_override_revalidates(small_config):
    small_config.override(seed=9, trials=2, output_dir="out")
    assert (small_config.seed, small_config.trials, small_config.output_dir) == (9, 2, "out")
    with pytest.raises(ConfigError):
        small_config.override(trials=0)


def test_audit_trials_in_one_go():
    audit = AuditConfig()
    audit.set_trials(3)
    counts = {key: value for key, value in audit.to_dict().items() if key.endswith("_trials")}
    assert len(counts) == 8
    assert set(counts.values()) == {3}
    assert audit.search_budget == 100_000


def test_policy_modes_and_constants():
    policy = PolicyConfig()
    assert policy.resolve_mode("spont") == PolicyMode.SPONT_EXTREMAL
    assert policy.resolve_mode("is") == PolicyMode.IS_SAMPLED_FAMILY
    assert policy.constants() is None

    certificate = PolicyConfig(mode="certificate", L1=2, L2=3, alpha_hat=1.5)
    assert certificate.constants() == CertificateConstants(2, 3, 1.5)
    assert not certificate.needs_calibration("spont")
    assert PolicyConfig(mode="certificate").needs_calibration("spont")
    assert certificate.build("spont").mode == PolicyMode.CERTIFICATE


def test_sweep_defaults():
    sweep = SweepConfig()
    sweep.validate()
    assert sweep.cells() == [(4.0, 0.9)]
    assert sweep.kinds == ["spont", "is", "cp"]
