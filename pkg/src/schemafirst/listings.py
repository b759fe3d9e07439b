"""Bundled example schemas.

======================  ===================================  =============================
name                    file                                 root
======================  ===================================  =============================
request_counter_v1      request_counter_v1.tsch              observability.RequestCounter
request_counter         request_counter.tsch                 observability.RequestCounter
host_resource           host_resource.tsch                   infra.resource.HostResource
host_resource_typed     host_resource_typed.tsch             infra.resource.HostResource
hosts                   hosts.tsch                           infra.HostNames
rpc                     rpc.tsch                             canopy.core.RPC
service_log             service_log.tsch                     canopy.logs.ServiceLog
host_events             host_events.tsch                     infra.events.HostEvent
======================  ===================================  =============================
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .idl import read_sources
from .model import ResolvedSchema, resolve_text

LISTINGS = {
    "request_counter_v1": ("request_counter_v1.tsch", "observability.RequestCounter"),
    "request_counter": ("request_counter.tsch", "observability.RequestCounter"),
    "host_resource": ("host_resource.tsch", "infra.resource.HostResource"),
    "host_resource_typed": ("host_resource_typed.tsch", "infra.resource.HostResource"),
    "hosts": ("hosts.tsch", "infra.HostNames"),
    "rpc": ("rpc.tsch", "canopy.core.RPC"),
    "service_log": ("service_log.tsch", "canopy.logs.ServiceLog"),
    "host_events": ("host_events.tsch", "infra.events.HostEvent"),
}


def listing_path(name: str) -> Path:
    return Path(str(resources.files("schemafirst.data").joinpath(LISTINGS[name][0])))


def listing_root(name: str) -> str:
    return LISTINGS[name][1]


def listing_sources(name: str) -> tuple[str, dict[str, str]]:
    """Main text and included texts of a bundled listing."""
    return read_sources(listing_path(name))


def listing_schema(name: str) -> ResolvedSchema:
    main, includes = listing_sources(name)
    return resolve_text(main, listing_root(name), includes, str(listing_path(name)))
