import pytest

from tsdrive.config import RunConfig
from tsdrive.synthesis import load_artifact, save_artifact, synthesize_from_config


@pytest.fixture(scope="session")
def default_config() -> RunConfig:
    return RunConfig.from_dict({})


@pytest.fixture(scope="session")
def artifact_path(tmp_path_factory, default_config):
    """Default-config synthesis artifact, built once per session."""
    path = tmp_path_factory.mktemp("artifact") / "artifact.json"
    result = synthesize_from_config(default_config)
    save_artifact(path, result["config_hash"],
                  (result["kinematic"], result["terminal"], result["kinematic_certification"]),
                  (result["dynamic"], result["dynamic_certification"]),
                  result["dynamic_meta"])
    return path


@pytest.fixture(scope="session")
def artifact(artifact_path, default_config):
    return load_artifact(artifact_path, default_config.config_hash())
