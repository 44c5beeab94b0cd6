"""Turn MediaWiki full-revision-history XML dumps into temporal link datasets.

Pipeline stages (each also available as a CLI subcommand):

1. extract  - stream dumps; emit raw per-revision link records and the
              per-revision redirect history;
2. snapshot - per date, select the last revision of each page strictly
              before the instant, resolve redirect chains, and emit the
              links that existed at that moment;
3. graph    - resolve and deduplicate active links into an edge list;
4. analytics - node/edge counts, growth series, PageRank rankings.
"""

from .analytics import GraphStats, PageRankResult, RankedArticle, pagerank
from .dump import PageHistory, PageMeta, Revision, filter_namespace, open_dump
from .errors import ConfigurationError, DataFormatError, DumpFormatError
from .graph import EdgeRecord, build_graph, emit_edges
from .pipeline import RawLinkRecord, RedirectEvent, RunSummary, extract_all, extract_redirect_history
from .snapshot import (
    ResolvedPage,
    SnapshotDate,
    SnapshotLink,
    build_link_snapshot,
    build_redirect_map,
    resolve_chains,
    select_snapshot_revisions,
)
from .wikitext import (
    ExtractedLink,
    LanguageProfile,
    RedirectDecl,
    detect_redirect,
    extract_links,
    get_profile,
    normalize_title,
    section_scan,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataFormatError",
    "DumpFormatError",
    "EdgeRecord",
    "ExtractedLink",
    "GraphStats",
    "LanguageProfile",
    "PageHistory",
    "PageMeta",
    "PageRankResult",
    "RankedArticle",
    "RawLinkRecord",
    "RedirectDecl",
    "RedirectEvent",
    "ResolvedPage",
    "Revision",
    "RunSummary",
    "SnapshotDate",
    "SnapshotLink",
    "build_graph",
    "build_link_snapshot",
    "build_redirect_map",
    "detect_redirect",
    "emit_edges",
    "extract_all",
    "extract_links",
    "extract_redirect_history",
    "filter_namespace",
    "get_profile",
    "normalize_title",
    "open_dump",
    "pagerank",
    "resolve_chains",
    "section_scan",
    "select_snapshot_revisions",
]
