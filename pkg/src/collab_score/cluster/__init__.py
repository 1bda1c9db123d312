"""Multi-site runtime with in-process and socket transports."""

from collab_score.cluster.models import (
    ClusterSettings,
    CommStats,
    LocalStatReply,
    SiteInfo,
    TransportKind,
    VarianceReply,
)
from collab_score.cluster.service import Cluster, release_sites
from collab_score.cluster.transport import InProcessSite, SiteHandle, SiteServer, SocketSite
from collab_score.cluster.worker import SiteWorker

__all__ = [
    "Cluster",
    "ClusterSettings",
    "CommStats",
    "InProcessSite",
    "LocalStatReply",
    "SiteHandle",
    "SiteInfo",
    "SiteServer",
    "SiteWorker",
    "SocketSite",
    "TransportKind",
    "VarianceReply",
    "release_sites",
]
