"""Materialize the state of the wiki at a fixed instant.

A page belongs to a snapshot iff it has at least one revision strictly
before the snapshot instant; its state is its latest such revision (ties on
timestamp go to the higher revision id). From the selected revisions we
derive the redirect map of that instant, resolve redirect chains to their
final targets, and filter the raw link records down to the links that
existed at that moment, flagging each as active (target page exists) or
not.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .dump import parse_timestamp
from .pipeline import RawLinkRecord, RedirectEvent
from .storage import DatasetWriter, iter_rows
from .wikitext import normalize_title

RESOLUTION_ARTICLE = "article"
RESOLUTION_RESOLVED = "resolved"
RESOLUTION_DANGLING = "dangling-target"
RESOLUTION_CYCLE = "cycle"

MAX_CHAIN_DEPTH = 32

RESOLVED_FIELDS = (
    "page_id",
    "title",
    "is_redirect",
    "immediate_target",
    "final_target",
    "resolution",
)

SNAPSHOT_LINK_FIELDS = (
    "page_id",
    "page_title",
    "link",
    "tosection",
    "anchor",
    "section_name",
    "section_level",
    "section_number",
    "is_active",
)


@dataclass(frozen=True, slots=True)
class SnapshotDate:
    """A snapshot instant; revisions strictly before it belong to the snapshot."""

    instant: datetime

    def __post_init__(self) -> None:
        if self.instant.tzinfo is None:
            object.__setattr__(self, "instant", self.instant.replace(tzinfo=timezone.utc))

    @classmethod
    def of(cls, value: str) -> "SnapshotDate":
        """Accept YYYY-MM-DD (midnight UTC) or a full ISO instant."""
        if len(value) == 10:
            return cls(datetime.strptime(value, "%Y-%m-%d").replace(tzinfo=timezone.utc))
        return cls(parse_timestamp(value))

    @classmethod
    def march_first(cls, year: int) -> "SnapshotDate":
        return cls(datetime(year, 3, 1, tzinfo=timezone.utc))

    @property
    def label(self) -> str:
        return self.instant.strftime("%Y-%m-%d")

    def includes(self, timestamp: datetime) -> bool:
        return timestamp < self.instant


def yearly_snapshot_dates(first: int = 2001, last: int = 2018) -> list[SnapshotDate]:
    return [SnapshotDate.march_first(year) for year in range(first, last + 1)]


@dataclass(slots=True)
class SnapshotPage:
    """The selected revision of one page at the snapshot instant."""

    page_id: int
    title: str
    revision_id: int
    timestamp: datetime
    target: str | None  # normalized redirect target title, None for articles
    target_fragment: str | None

    @property
    def is_redirect(self) -> bool:
        return self.target is not None


def select_snapshot_revisions(
    events: Iterable[RedirectEvent], date: SnapshotDate
) -> dict[int, SnapshotPage]:
    """Latest revision strictly before ``date`` for every page that has one.

    ``events`` is the per-revision redirect history, which doubles as the
    complete revision index. Events for one page must arrive in
    (timestamp, revision_id) order, which the extract stage guarantees.
    """
    selected: dict[int, SnapshotPage] = {}
    for event in events:
        if not date.includes(event.timestamp):
            continue
        current = selected.get(event.page_id)
        if current is not None and (current.timestamp, current.revision_id) >= (
            event.timestamp,
            event.revision_id,
        ):
            continue
        target = normalize_title(event.target) if event.target is not None else None
        selected[event.page_id] = SnapshotPage(
            page_id=event.page_id,
            title=event.page_title,
            revision_id=event.revision_id,
            timestamp=event.timestamp,
            target=target,
            target_fragment=event.tosection,
        )
    return selected


def build_redirect_map(selected: Mapping[int, SnapshotPage]) -> dict[str, str]:
    """title -> immediate (normalized) target for pages that are redirects."""
    return {
        page.title: page.target for page in selected.values() if page.target is not None
    }


@dataclass(frozen=True, slots=True)
class ResolvedPage:
    """A snapshot page with its redirect chain resolved.

    ``resolution`` is one of: article (not a redirect), resolved (chain ends
    at an existing non-redirect page), dangling-target (chain leaves the
    snapshot's page set), cycle (chain revisits a title or exceeds the depth
    cap; final_target falls back to the immediate target so the page keeps
    exactly one outgoing edge).
    """

    page_id: int
    title: str
    is_redirect: bool
    immediate_target: str | None
    final_target: str | None
    resolution: str
    target_fragment: str | None = None


def resolve_chains(
    redirects: Mapping[str, str],
    pages: Mapping[str, int],
    *,
    fragments: Mapping[str, str | None] | None = None,
    max_depth: int = MAX_CHAIN_DEPTH,
) -> dict[str, ResolvedPage]:
    """Resolve every page title to a :class:`ResolvedPage`.

    ``redirects`` maps redirect titles to their immediate targets;
    ``pages`` maps every existing title to its page id.
    """
    fragments = fragments or {}
    resolved: dict[str, ResolvedPage] = {}
    for title, page_id in pages.items():
        if title not in redirects:
            resolved[title] = ResolvedPage(
                page_id, title, False, None, None, RESOLUTION_ARTICLE
            )
            continue
        immediate = redirects[title]
        current = title
        seen = {title}
        resolution = RESOLUTION_CYCLE
        final = immediate
        for _ in range(max_depth):
            current = redirects[current]
            if current not in redirects:
                final = current
                resolution = (
                    RESOLUTION_RESOLVED if current in pages else RESOLUTION_DANGLING
                )
                break
            if current in seen:
                break  # cycle; fall back to the immediate target
            seen.add(current)
        # Falling out of the loop (depth cap) is treated like a cycle.
        if resolution == RESOLUTION_CYCLE:
            final = immediate
        resolved[title] = ResolvedPage(
            page_id,
            title,
            True,
            immediate,
            final,
            resolution,
            target_fragment=fragments.get(title),
        )
    return resolved


def resolve_snapshot(selected: Mapping[int, SnapshotPage]) -> dict[str, ResolvedPage]:
    """Build and fully resolve the redirect map of a snapshot."""
    redirects = build_redirect_map(selected)
    pages = {page.title: page.page_id for page in selected.values()}
    fragments = {
        page.title: page.target_fragment
        for page in selected.values()
        if page.target is not None
    }
    return resolve_chains(redirects, pages, fragments=fragments)


@dataclass(frozen=True, slots=True)
class SnapshotLink:
    """One link of a selected revision, with its normalized target."""

    page_id: int
    page_title: str
    link: str
    tosection: str | None
    anchor: str | None
    section_name: str
    section_level: int
    section_number: int
    is_active: bool

    def to_row(self) -> tuple[str, ...]:
        return (
            str(self.page_id),
            self.page_title,
            self.link,
            self.tosection or "",
            self.anchor or "",
            self.section_name,
            str(self.section_level),
            str(self.section_number),
            "1" if self.is_active else "0",
        )

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "SnapshotLink":
        return cls(
            page_id=int(row[0]),
            page_title=row[1],
            link=row[2],
            tosection=row[3] or None,
            anchor=row[4] or None,
            section_name=row[5],
            section_level=int(row[6]),
            section_number=int(row[7]),
            is_active=row[8] == "1",
        )


def build_link_snapshot(
    records: Iterable[RawLinkRecord],
    selected: Mapping[int, SnapshotPage],
    existing_titles: frozenset[str] | set[str],
) -> Iterator[SnapshotLink]:
    """Filter raw link records down to the snapshot's selected revisions.

    Targets are normalized; links whose target normalizes to nothing (pure
    fragment links like ``[[#top]]``) are dropped. ``is_active`` records
    whether the target title existed at the instant; redirect pages count
    as existing.
    """
    selected_revisions = {
        (page.page_id, page.revision_id) for page in selected.values()
    }
    for record in records:
        if (record.page_id, record.revision_id) not in selected_revisions:
            continue
        target = normalize_title(record.link)
        if target is None:
            continue
        yield SnapshotLink(
            page_id=record.page_id,
            page_title=record.page_title,
            link=target,
            tosection=record.tosection,
            anchor=record.anchor,
            section_name=record.section_name,
            section_level=record.section_level,
            section_number=record.section_number,
            is_active=target in existing_titles,
        )


def _target_with_fragment(page: ResolvedPage) -> str:
    if page.immediate_target is None:
        return ""
    if page.target_fragment:
        return f"{page.immediate_target}#{page.target_fragment}"
    return page.immediate_target


def write_resolved_redirects(path: str | Path, resolved: Mapping[str, ResolvedPage]) -> int:
    """Write the resolved pages dataset sorted by page id; returns row count."""
    with DatasetWriter(path, RESOLVED_FIELDS) as writer:
        for page in sorted(resolved.values(), key=lambda p: p.page_id):
            writer.write_row(
                (
                    str(page.page_id),
                    page.title,
                    "1" if page.is_redirect else "0",
                    _target_with_fragment(page),
                    page.final_target or "",
                    page.resolution,
                )
            )
        return writer.rows_written


def read_resolved_redirects(path: str | Path) -> dict[str, ResolvedPage]:
    resolved = {}
    for row in iter_rows(path, RESOLVED_FIELDS):
        immediate, _, fragment = row[3].partition("#")
        resolved[row[1]] = ResolvedPage(
            page_id=int(row[0]),
            title=row[1],
            is_redirect=row[2] == "1",
            immediate_target=immediate or None,
            final_target=row[4] or None,
            resolution=row[5],
            target_fragment=fragment or None,
        )
    return resolved


def write_snapshot_links(path: str | Path, links: Iterable[SnapshotLink]) -> int:
    with DatasetWriter(path, SNAPSHOT_LINK_FIELDS) as writer:
        for link in links:
            writer.write_row(link.to_row())
        return writer.rows_written


def read_snapshot_links(path: str | Path) -> Iterator[SnapshotLink]:
    for row in iter_rows(path, SNAPSHOT_LINK_FIELDS):
        yield SnapshotLink.from_row(row)
