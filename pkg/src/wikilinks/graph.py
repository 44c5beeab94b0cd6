"""Build the deduplicated article-to-article edge list of one snapshot.

Rules applied to the snapshot's active links:

* links whose target is a resolved redirect point at the chain's final
  target instead; links into a redirect cycle use that redirect's fallback
  target; links to dangling redirects are dropped;
* body links of redirect pages are ignored entirely: a redirect contributes
  exactly one edge, to its final target, so acyclic redirects are orphan
  nodes with out-degree 1 and in-degree 0;
* repeated page pairs collapse to one edge;
* a page linking itself directly contributes nothing; self-loops that arise
  from redirect resolution are kept unless ``drop_self_loops`` is set.

The node list is every page of the snapshot, redirects included, so pages
without a single active link still appear in the graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import DataFormatError
from .extsort import external_sort, unique_justseen
from .snapshot import RESOLUTION_DANGLING, ResolvedPage, SnapshotLink
from .storage import DatasetWriter, iter_rows

EDGE_FIELDS = ("page_id_from", "page_title_from", "page_id_to", "page_title_to")
NODE_FIELDS = ("page_id", "page_title")


@dataclass(frozen=True, slots=True)
class EdgeRecord:
    page_id_from: int
    page_title_from: str
    page_id_to: int
    page_title_to: str


def _edge_target(
    link_target: str, resolved: Mapping[str, ResolvedPage]
) -> ResolvedPage | None:
    """Map an active link target to the page that receives the edge."""
    page = resolved.get(link_target)
    if page is None:
        raise DataFormatError(
            f"snapshot link targets {link_target!r} which is missing from the "
            "resolved pages dataset; inputs are inconsistent"
        )
    if not page.is_redirect:
        return page
    if page.resolution == RESOLUTION_DANGLING:
        return None
    # resolved chains and cycle fallbacks both name an existing page
    final = resolved.get(page.final_target)
    if final is None:
        raise DataFormatError(
            f"redirect {page.title!r} resolves to {page.final_target!r} which is "
            "missing from the resolved pages dataset; inputs are inconsistent"
        )
    return final


def iter_candidate_edges(
    links: Iterable[SnapshotLink],
    resolved: Mapping[str, ResolvedPage],
    *,
    drop_self_loops: bool = False,
) -> Iterator[EdgeRecord]:
    """Pre-dedup edge stream: resolved article links plus redirect edges."""
    for link in links:
        if not link.is_active:
            continue
        source = resolved.get(link.page_title)
        if source is None:
            raise DataFormatError(
                f"snapshot link source {link.page_title!r} is missing from the "
                "resolved pages dataset; inputs are inconsistent"
            )
        if source.is_redirect:
            continue  # a redirect's body contributes nothing beyond its target
        target = _edge_target(link.link, resolved)
        if target is None:
            continue
        if target.page_id == link.page_id:
            direct_self_link = link.link == link.page_title
            if direct_self_link or drop_self_loops:
                continue
        yield EdgeRecord(link.page_id, link.page_title, target.page_id, target.title)
    for page in resolved.values():
        if not page.is_redirect or page.resolution == RESOLUTION_DANGLING:
            continue
        final = resolved.get(page.final_target)
        if final is None:
            raise DataFormatError(
                f"redirect {page.title!r} resolves to {page.final_target!r} which is "
                "missing from the resolved pages dataset; inputs are inconsistent"
            )
        if drop_self_loops and final.page_id == page.page_id:
            continue
        yield EdgeRecord(page.page_id, page.title, final.page_id, final.title)


def build_graph(
    links: Iterable[SnapshotLink],
    resolved: Mapping[str, ResolvedPage],
    *,
    drop_self_loops: bool = False,
    tmpdir: str | None = None,
) -> tuple[Iterator[EdgeRecord], list[tuple[int, str]]]:
    """Return (deduplicated sorted edge stream, node list) for one snapshot."""
    nodes = sorted((p.page_id, p.title) for p in resolved.values())

    def pair_key(row):
        return int(row[0]), int(row[2])

    def edges() -> Iterator[EdgeRecord]:
        candidates = (
            (str(e.page_id_from), e.page_title_from, str(e.page_id_to), e.page_title_to)
            for e in iter_candidate_edges(
                links, resolved, drop_self_loops=drop_self_loops
            )
        )
        deduped = unique_justseen(
            external_sort(candidates, pair_key, tmpdir=tmpdir), pair_key
        )
        for row in deduped:
            yield EdgeRecord(int(row[0]), row[1], int(row[2]), row[3])

    return edges(), nodes


def emit_edges(edges: Iterable[EdgeRecord], path: str | Path) -> int:
    """Write the edge dataset (sorted, deduplicated) with its checksum."""
    with DatasetWriter(path, EDGE_FIELDS) as writer:
        for edge in edges:
            writer.write_row(
                (
                    str(edge.page_id_from),
                    edge.page_title_from,
                    str(edge.page_id_to),
                    edge.page_title_to,
                )
            )
        return writer.rows_written


def emit_nodes(nodes: Iterable[tuple[int, str]], path: str | Path) -> int:
    with DatasetWriter(path, NODE_FIELDS) as writer:
        for page_id, title in nodes:
            writer.write_row((str(page_id), title))
        return writer.rows_written


def read_edges(path: str | Path) -> Iterator[EdgeRecord]:
    for row in iter_rows(path, EDGE_FIELDS):
        yield EdgeRecord(int(row[0]), row[1], int(row[2]), row[3])
