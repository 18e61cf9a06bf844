import socket
import time

import pytest

from flexctl.agent import Agent
from flexctl.broker import Broker


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_until(predicate, timeout=10.0, interval=0.02, message="condition never became true"):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return
        time.sleep(interval)
    raise AssertionError(message)


class Cluster:
    """A broker plus any number of agents, torn down in one place."""

    def __init__(self):
        self.pub_port = free_port()
        self.sub_port = free_port()
        self.admin_port = free_port()
        self.pub_uri = f"tcp://127.0.0.1:{self.pub_port}"
        self.sub_uri = f"tcp://127.0.0.1:{self.sub_port}"
        self.admin_uri = f"tcp://127.0.0.1:{self.admin_port}"
        self.broker = Broker(self.pub_uri, self.sub_uri, admin=self.admin_uri)
        self.broker.start()
        self.agents = []

    def agent(self, name="agent", hello_interval=0.2, hello_timeout=2.0, **kwargs) -> Agent:
        a = Agent(
            name=name,
            pub_uri=self.pub_uri,
            sub_uri=self.sub_uri,
            hello_interval=hello_interval,
            hello_timeout=hello_timeout,
            **kwargs,
        )
        self.agents.append(a)
        return a

    def start_all(self):
        for a in self.agents:
            a.start()

    def wait_mesh(self, timeout=10.0):
        """Wait until every agent knows every other agent."""
        def full():
            return all(
                a.has_node(b.uuid) for a in self.agents for b in self.agents if a is not b
            )

        wait_until(full, timeout=timeout, message="agents never fully discovered each other")

    def stop(self):
        for a in self.agents:
            a.stop()
        self.broker.stop()


@pytest.fixture
def cluster():
    c = Cluster()
    yield c
    c.stop()
