"""Hierarchical wireless topology monitoring.

A LocalNeighborAggregator runs next to each device and condenses raw neighbor
observations into per-window mean reports; the central TopologyMonitor
consumes only those reports (never raw observations) and maintains the
network-wide hearing-map graph, one logical graph per radio channel.
"""
from __future__ import annotations

import logging

from flexctl.entities import ControlApplication, bind_function, on_event
from flexctl.simwifi import NEIGHBOR_OBSERVATION_EVENT
from flexctl.wire import canonical_json

log = logging.getLogger(__name__)

NEIGHBOR_REPORT_EVENT = "NeighborReportEvent"
TOPOLOGY_CHANGED_EVENT = "TopologyChangedEvent"


def aggregate_observations(observations) -> list:
    """Arithmetic-mean aggregation of one window's observations.

    Groups by (transmitter mac, channel); output is sorted for determinism.
    """
    groups: dict = {}
    for obs in observations:
        key = (obs["transmitter"], obs["channel"])
        bucket = groups.setdefault(key, {"rssi_sum": 0.0, "bitrate_sum": 0.0, "count": 0})
        bucket["rssi_sum"] += obs["rssi_dbm"]
        bucket["bitrate_sum"] += obs.get("bitrate_mbps", 0)
        bucket["count"] += 1
    aggregates = []
    for (mac, channel), bucket in sorted(groups.items()):
        aggregates.append(
            {
                "mac": mac,
                "mean_rssi_dbm": bucket["rssi_sum"] / bucket["count"],
                "mean_bitrate_mbps": bucket["bitrate_sum"] / bucket["count"],
                "sample_count": bucket["count"],
                "channel": channel,
            }
        )
    return aggregates


def build_graph(reports, mac_to_node, metric: str = "rssi", min_rssi_dbm=None) -> dict:
    """Hearing-map graph from a set of neighbor reports.

    One directed edge reporter -> transmitter per aggregate, placed in the
    graph of the aggregate's channel. Transmitters whose mac maps to a known
    node are keyed by node uuid, unknown ones by mac. With min_rssi_dbm the
    result is a connectivity map: edges below the threshold are dropped.
    """
    if metric not in ("rssi", "bitrate"):
        raise ValueError(f"unknown topology metric {metric!r}")
    nodes = set()
    edges = []
    window_end = 0
    for report in reports:
        reporter = report["reporter"]
        nodes.add(reporter)
        window_end = max(window_end, report.get("window_end", 0))
        for agg in report["aggregates"]:
            if min_rssi_dbm is not None and agg["mean_rssi_dbm"] < min_rssi_dbm:
                continue
            target = mac_to_node.get(agg["mac"], agg["mac"])
            nodes.add(target)
            weight = agg["mean_rssi_dbm"] if metric == "rssi" else agg["mean_bitrate_mbps"]
            edges.append({"from": reporter, "to": target, "weight": weight, "channel": agg["channel"]})
    edges.sort(key=lambda e: (e["channel"], e["from"], e["to"]))
    return {
        "nodes": sorted(nodes),
        "edges": edges,
        "metadata": {"metric": metric, "min_rssi_dbm": min_rssi_dbm, "generated_at": window_end},
    }


def graph_channels(graph: dict) -> dict:
    """Split a flat graph document into its per-channel graph set."""
    channels: dict = {}
    for edge in graph["edges"]:
        channels.setdefault(edge["channel"], []).append(edge)
    return channels


def graph_to_json(graph: dict) -> bytes:
    return canonical_json(graph)


def diff_graphs(prev: dict, next_: dict, weight_threshold_db: float = 3.0) -> dict | None:
    """Topology change summary, or None when nothing noteworthy changed.

    Weight drifts below the threshold are ignored; added/removed nodes and
    edges always count.
    """

    def edge_key(edge):
        return (edge["channel"], edge["from"], edge["to"])

    prev_edges = {edge_key(e): e for e in prev["edges"]}
    next_edges = {edge_key(e): e for e in next_["edges"]}
    added_edges = [next_edges[k] for k in sorted(set(next_edges) - set(prev_edges))]
    removed_edges = [prev_edges[k] for k in sorted(set(prev_edges) - set(next_edges))]
    weight_changes = []
    for key in sorted(set(prev_edges) & set(next_edges)):
        delta = next_edges[key]["weight"] - prev_edges[key]["weight"]
        if abs(delta) > weight_threshold_db:
            weight_changes.append(
                {
                    "channel": key[0],
                    "from": key[1],
                    "to": key[2],
                    "old_weight": prev_edges[key]["weight"],
                    "new_weight": next_edges[key]["weight"],
                }
            )
    diff = {
        "added_nodes": sorted(set(next_["nodes"]) - set(prev["nodes"])),
        "removed_nodes": sorted(set(prev["nodes"]) - set(next_["nodes"])),
        "added_edges": added_edges,
        "removed_edges": removed_edges,
        "weight_changes": weight_changes,
    }
    if not any(diff.values()):
        return None
    return diff


class LocalNeighborAggregator(ControlApplication):
    """Per-node condenser: raw observations in, one report per window out.

    Windows are assigned by the observation's virtual timestamp so that the
    report stream is a pure function of the observation stream.
    """

    def __init__(self, name: str | None = None, window_ms: int = 1000):
        super().__init__(name=name)
        self.window_ms = int(window_ms)
        self._windows: dict = {}  # src device uuid -> (window_id, [observations])

    @on_event(NEIGHBOR_OBSERVATION_EVENT, mode="node-broadcast")
    def _on_observation(self, payload, src_node, src_entity):
        window_id = payload["vts_ms"] // self.window_ms
        current = self._windows.get(src_entity)
        if current is None:
            self._windows[src_entity] = (window_id, [payload])
            return
        open_id, observations = current
        if window_id == open_id:
            observations.append(payload)
            return
        self._emit_report(src_entity, open_id, observations)
        self._windows[src_entity] = (window_id, [payload])

    def _emit_report(self, device_uuid: str, window_id: int, observations) -> None:
        report = {
            "reporter": self._runtime.uuid,
            "device": device_uuid,
            "window_start": window_id * self.window_ms,
            "window_end": (window_id + 1) * self.window_ms,
            "aggregates": aggregate_observations(observations),
        }
        self.send_event(NEIGHBOR_REPORT_EVENT, report, mode="global-broadcast")


class TopologyMonitor(ControlApplication):
    """Central hearing-map builder over aggregated neighbor reports."""

    def __init__(
        self,
        name: str | None = None,
        metric: str = "rssi",
        change_threshold_db: float = 3.0,
        min_rssi_dbm=None,
    ):
        super().__init__(name=name)
        self.metric = metric
        self.change_threshold_db = float(change_threshold_db)
        self.min_rssi_dbm = min_rssi_dbm
        self._latest_reports: dict = {}  # (reporter node, device uuid) -> report
        self._mac_to_node: dict = {}
        self._graph = build_graph([], {}, metric=metric, min_rssi_dbm=min_rssi_dbm)

    def on_start(self) -> None:
        self._map_node(self.get_local_node())

    @on_event("NewNodeEvent")
    def _on_new_node(self, payload, src_node, src_entity):
        self._map_node(self.get_node(payload["uuid"]))

    def _map_node(self, node) -> None:
        for device in node.get_devices():
            if "get_interface_info" not in device.capabilities:
                continue
            try:
                for iface in device.get_interface_info():
                    self._mac_to_node[iface["mac"].lower()] = node.uuid
            except Exception as exc:
                log.warning("could not map interfaces of %s: %s", node.uuid, exc)

    @on_event(NEIGHBOR_REPORT_EVENT)
    def _on_report(self, payload, src_node, src_entity):
        self._latest_reports[(payload["reporter"], payload["device"])] = payload
        self._rebuild()

    def _rebuild(self) -> None:
        reports = [self._latest_reports[k] for k in sorted(self._latest_reports)]
        graph = build_graph(reports, self._mac_to_node, metric=self.metric, min_rssi_dbm=self.min_rssi_dbm)
        diff = diff_graphs(self._graph, graph, weight_threshold_db=self.change_threshold_db)
        self._graph = graph
        if diff is not None:
            self.send_event(TOPOLOGY_CHANGED_EVENT, diff, mode="global-broadcast")

    @bind_function("get_topology")
    def get_topology(self) -> dict:
        return self._graph

    @property
    def mac_to_node(self) -> dict:
        return dict(self._mac_to_node)
