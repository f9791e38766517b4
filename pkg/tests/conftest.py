import pytest

from nibox.harness.config import EvalProtocol, ExperimentConfig
from nibox.network import NetworkConfig


def tiny_config(environment="mountain_car", **kw):
    """A few-neuron experiment that runs in well under a second."""
    inputs = {"xor": 2, "pattern_stream": 100, "runner": 100}.get(environment, 20)
    net = dict(n_input=inputs, n_noise=3, n_hidden=12, n_output=3, connection_scale=0.7,
               init_strength_scale=1.5, memory_mode="decay_accumulation")
    net.update(kw.pop("network", {}))
    defaults = dict(name="tiny", environment=environment, episodes=3, max_steps=40, seeds=[0, 1],
                    reward_source="novelty_firing" if environment != "xor" else "env_reward")
    if environment == "xor":
        defaults["encoding"] = "direct"
    if environment in ("pattern_stream", "runner"):
        defaults["encoding"] = "pixels"
        net.setdefault("input_shape", [10, 10])
    defaults.update(kw)
    if "eval" in defaults and isinstance(defaults["eval"], dict):
        defaults["eval"] = EvalProtocol(**defaults["eval"])
    return ExperimentConfig(network=NetworkConfig(**net), **defaults)


@pytest.fixture
def tiny():
    return tiny_config


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criteria lines together, in order, after the run."""
    import sys
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
