"""Versioned schema registry: file store, HTTP service and client."""

import os

from .client import RegistryClient
from .http import BackgroundServer, make_server
from .store import LATEST, AssetSummary, SchemaStore, SemanticHit, VersionEntry

STORE_ENV = "SCHEMAFIRST_STORE"


def default_store_path():
    return os.environ.get(STORE_ENV)


__all__ = [
    "LATEST",
    "STORE_ENV",
    "AssetSummary",
    "BackgroundServer",
    "RegistryClient",
    "SchemaStore",
    "SemanticHit",
    "VersionEntry",
    "default_store_path",
    "make_server",
]
