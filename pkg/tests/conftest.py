import contextlib
import time

import numpy as np
import pytest

from mssnn.filters import FilterBank
from mssnn.network import ModelParams, Network, Topology, init_params

from oracles import TinyNet


def tiny_network(num_hidden=1, syn=((1.0, 0.5), (0.3, 1.0)), soma=((1.0, 0.4),)):
    """2 inputs, ``num_hidden`` hidden, 1 visible, short hand-made kernels."""
    top = Topology.default(2, num_hidden, 1)
    return Network(top, FilterBank(np.array(syn)), FilterBank(np.array(soma)))


def oracle_for(net: Network) -> TinyNet:
    top = net.topology
    edges = [(int(i), int(j)) for i, j in zip(*np.nonzero(top.connectivity))]
    return TinyNet(top.num_inputs, top.num_hidden, top.num_visible, edges,
                   net.synaptic_bank.kernels.tolist(), net.somatic_bank.kernels.tolist())


def to_theta(params: ModelParams, oracle: TinyNet) -> dict:
    theta = {}
    for key in oracle.keys():
        if key[0] == "syn":
            theta[key] = float(params.synaptic[key[1], key[2], key[3]])
        elif key[0] == "soma":
            theta[key] = float(params.somatic[key[1], key[2]])
        else:
            theta[key] = float(params.bias[key[1]])
    return theta


def pick(delta: ModelParams, oracle: TinyNet) -> np.ndarray:
    return np.array(list(to_theta(delta, oracle).values()))


@pytest.fixture
def tiny():
    net = tiny_network()
    params = init_params(net, seed=3, scale=0.7)
    params.bias[:] = [0.2, -0.3]
    return net, params


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Context manager that times a block and logs one PASS/FAIL line for it."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    @contextlib.contextmanager
    def record(number: int, title: str, time_limit: float):
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            if status == "PASS" and elapsed >= time_limit:
                status = "FAIL"
            line = (f"[{status}] criterion {number}: {title} "
                    f"({elapsed:.2f}s, limit {time_limit:g}s)")
            lines.append((number, line))
            print(line)
        assert elapsed < time_limit, f"criterion {number} took {elapsed:.2f}s"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
