"""Command line interface: one resumable subcommand per pipeline stage.

Every stage consumes and produces only files, so any stage can be rerun in
isolation. Progress and counters go to standard error as JSON lines;
standard output stays free for data (pass ``-`` as an output path to use
it). Exit codes: 0 success, 1 fatal processing error, 2 usage error or
missing input.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import analytics, graph, pipeline, snapshot
from .dump import filter_namespace, open_dump
from .errors import ConfigurationError, DataFormatError, DumpFormatError
from .extsort import external_sort
from .snapshot import SnapshotDate, yearly_snapshot_dates
from .storage import (
    CHECKSUM_SUFFIX,
    CODECS,
    DEFAULT_SEVENZIP,
    PARTIAL_SUFFIX,
    DatasetWriter,
    iter_rows,
    verify_checksum,
)
from .wikitext import LanguageProfile, get_profile, load_profiles

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2

ARTICLE_NAMESPACE = 0


def _event(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}, sort_keys=True), file=sys.stderr)


@dataclass
class RunConfig:
    """Validated settings shared by the subcommands."""

    language: str
    output_dir: Path
    inputs: list[Path] = field(default_factory=list)
    dates: list[SnapshotDate] = field(default_factory=yearly_snapshot_dates)
    jobs: int = 1
    codec: str | None = None
    strip_inert_spans: bool = False
    drop_self_loops: bool = False
    sevenzip_command: tuple[str, ...] = DEFAULT_SEVENZIP
    profiles_path: Path | None = None

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise ConfigurationError(f"--jobs must be >= 1, got {self.jobs}")
        labels = [d.label for d in self.dates]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate snapshot dates: {labels}")
        self.dates = sorted(self.dates, key=lambda d: d.instant)
        if self.codec is not None and self.codec not in CODECS:
            raise ConfigurationError(
                f"unknown codec {self.codec!r}; expected one of {CODECS}"
            )

    def profile(self) -> LanguageProfile:
        if self.profiles_path is not None:
            profiles = load_profiles(self.profiles_path)
            if self.language in profiles:
                return profiles[self.language]
        return get_profile(self.language)

    def path(self, kind: str, date: str | None = None, shard: int | None = None,
             plain: bool = False) -> Path:
        name = f"{self.language}wiki.{kind}"
        if shard is not None:
            name += f".{shard:04d}"
        if date is not None:
            name += f".{date}"
        name += ".csv" if plain else ".csv.gz"
        return self.output_dir / name

    def manifest_path(self) -> Path:
        return self.output_dir / f"{self.language}wiki.extract.manifest.json"


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    dates = (
        [SnapshotDate.of(d) for d in args.date]
        if getattr(args, "date", None)
        else yearly_snapshot_dates()
    )
    return RunConfig(
        language=args.lang,
        output_dir=Path(args.output_dir),
        inputs=[Path(p) for p in getattr(args, "inputs", [])],
        dates=dates,
        jobs=getattr(args, "jobs", 1),
        codec=getattr(args, "codec", None),
        strip_inert_spans=getattr(args, "strip_inert_spans", False),
        drop_self_loops=getattr(args, "drop_self_loops", False),
        sevenzip_command=(
            tuple(shlex.split(args.sevenzip_command))
            if getattr(args, "sevenzip_command", None)
            else DEFAULT_SEVENZIP
        ),
        profiles_path=Path(args.profiles) if getattr(args, "profiles", None) else None,
    )


def cmd_extract(config: RunConfig) -> int:
    missing = [str(p) for p in config.inputs if not p.is_file()]
    if missing:
        _event("missing-input", paths=missing)
        return EXIT_USAGE
    if not config.inputs:
        _event("missing-input", detail="no dump files given")
        return EXIT_USAGE
    profile = config.profile()
    config.output_dir.mkdir(parents=True, exist_ok=True)

    issues: Counter = Counter()
    totals = pipeline.RunSummary()
    shards = []
    started = time.perf_counter()
    for shard_index, input_path in enumerate(sorted(config.inputs, key=str)):
        raw_path = config.path("rawwikilinks", shard=shard_index)
        redirect_path = config.path("redirecthistory", shard=shard_index)
        _event("extract-shard-start", input=str(input_path), shard=shard_index)
        pages = open_dump(
            input_path,
            config.codec,
            sevenzip_command=config.sevenzip_command,
            on_issue=lambda issue: issues.update([issue.kind]),
        )
        # Mark the final outputs incomplete for the whole shard build; the
        # sorting writer removes the markers only after a clean close.
        for target in (raw_path, redirect_path):
            Path(str(target) + PARTIAL_SUFFIX).touch()
        tmp_raw = Path(str(raw_path) + ".unsorted")
        tmp_redirect = Path(str(redirect_path) + ".unsorted")
        try:
            with DatasetWriter(tmp_raw, pipeline.RAW_LINK_FIELDS, sidecar=False) as sink, \
                    DatasetWriter(tmp_redirect, pipeline.REDIRECT_FIELDS, sidecar=False) as redirect_sink:
                summary = pipeline.extract_all(
                    filter_namespace(pages, ARTICLE_NAMESPACE),
                    profile,
                    sink,
                    redirect_sink=redirect_sink,
                    jobs=config.jobs,
                    strip_inert_spans=config.strip_inert_spans,
                )
            _sort_into(tmp_raw, raw_path, pipeline.RAW_LINK_FIELDS, pipeline.raw_sort_key)
            _sort_into(
                tmp_redirect, redirect_path, pipeline.REDIRECT_FIELDS,
                pipeline.redirect_sort_key,
            )
        finally:
            tmp_raw.unlink(missing_ok=True)
            tmp_redirect.unlink(missing_ok=True)
        totals.merge(summary)
        shards.append(
            {
                "input": str(input_path),
                "shard": shard_index,
                "pages": summary.pages,
                "revisions": summary.revisions,
                "links": summary.links,
                "files": [raw_path.name, redirect_path.name],
            }
        )
        _event(
            "extract-shard-done",
            shard=shard_index,
            pages=summary.pages,
            revisions=summary.revisions,
            links=summary.links,
        )
    totals.errors = issues["page-skipped"]
    manifest = {
        "language": config.language,
        "pages": totals.pages,
        "revisions": totals.revisions,
        "links": totals.links,
        "errors": totals.errors,
        "diagnostics": dict(sorted((totals.diagnostics + issues).items())),
        "flags": {"strip_inert_spans": config.strip_inert_spans},
        "shards": shards,
    }
    config.manifest_path().write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _event(
        "extract-done",
        seconds=round(time.perf_counter() - started, 3),
        **{k: manifest[k] for k in ("pages", "revisions", "links", "errors")},
    )
    return EXIT_OK


def _sort_into(tmp_path: Path, final_path: Path, fields, key) -> None:
    with DatasetWriter(final_path, fields) as writer:
        writer.write_rows(external_sort(iter_rows(tmp_path, fields), key))


def _shard_files(config: RunConfig, kind: str) -> list[Path]:
    return sorted(config.output_dir.glob(f"{config.language}wiki.{kind}.[0-9]*.csv.gz"))


def cmd_snapshot(config: RunConfig) -> int:
    raw_shards = _shard_files(config, "rawwikilinks")
    redirect_shards = _shard_files(config, "redirecthistory")
    if not raw_shards or not redirect_shards:
        _event(
            "missing-input",
            detail="run extract first",
            patterns=[
                str(config.output_dir / f"{config.language}wiki.rawwikilinks.*.csv.gz"),
                str(config.output_dir / f"{config.language}wiki.redirecthistory.*.csv.gz"),
            ],
        )
        return EXIT_USAGE
    for date in config.dates:
        label = date.label
        selected = snapshot.select_snapshot_revisions(
            pipeline.read_redirect_events(redirect_shards), date
        )
        resolved = snapshot.resolve_snapshot(selected)
        pages = snapshot.write_resolved_redirects(
            config.path("resolvedredirects", date=label), resolved
        )
        cycles = [p for p in resolved.values() if p.resolution == snapshot.RESOLUTION_CYCLE]
        with DatasetWriter(
            config.path("redirectcycles", date=label, plain=True),
            ("title", "immediate_target"),
        ) as writer:
            for page in sorted(cycles, key=lambda p: p.page_id):
                writer.write_row((page.title, page.immediate_target or ""))
        existing = frozenset(page.title for page in selected.values())
        links = snapshot.build_link_snapshot(
            pipeline.read_raw_records(raw_shards), selected, existing
        )
        link_count = snapshot.write_snapshot_links(
            config.path("wikilinksnapshot", date=label), links
        )
        _event(
            "snapshot-done", date=label, pages=pages, links=link_count,
            redirect_cycles=len(cycles),
        )
    return EXIT_OK


def cmd_graph(config: RunConfig) -> int:
    for date in config.dates:
        label = date.label
        resolved_path = config.path("resolvedredirects", date=label)
        links_path = config.path("wikilinksnapshot", date=label)
        for needed in (resolved_path, links_path):
            if not needed.is_file():
                _event("missing-input", path=str(needed), detail="run snapshot first")
                return EXIT_USAGE
        resolved = snapshot.read_resolved_redirects(resolved_path)
        links = snapshot.read_snapshot_links(links_path)
        edges, nodes = graph.build_graph(
            links, resolved, drop_self_loops=config.drop_self_loops
        )
        edge_count = graph.emit_edges(edges, config.path("wikilinkgraph", date=label))
        node_count = graph.emit_nodes(nodes, config.path("wikilinkgraph.nodes", date=label))
        _event("graph-done", date=label, nodes=node_count, edges=edge_count)
    return EXIT_OK


def cmd_pagerank(config: RunConfig, args: argparse.Namespace) -> int:
    if args.output and len(config.dates) > 1:
        raise ConfigurationError("--output needs exactly one --date")
    for date in config.dates:
        label = date.label
        edge_path = config.path("wikilinkgraph", date=label)
        node_path = config.path("wikilinkgraph.nodes", date=label)
        if not edge_path.is_file():
            _event("missing-input", path=str(edge_path), detail="run graph first")
            return EXIT_USAGE
        edges, titles = analytics.load_graph_file(
            edge_path, node_path if node_path.is_file() else None
        )
        result = analytics.pagerank(
            edges,
            titles.keys(),
            damping=args.damping,
            tolerance=args.tolerance,
            max_iter=args.max_iter,
        )
        ranked = analytics.rank_articles(result, titles)
        out = args.output if args.output else config.path("pagerank", date=label)
        analytics.write_rankings(ranked, out)
        _event(
            "pagerank-done",
            date=label,
            nodes=len(titles),
            converged=result.converged,
            iterations=result.iterations,
            top=[(a.title, float(f"{a.score:.6g}")) for a in ranked[:3]],
        )
    return EXIT_OK


def cmd_stats(config: RunConfig, args: argparse.Namespace) -> int:
    collected = []
    for date in config.dates:
        label = date.label
        edge_path = config.path("wikilinkgraph", date=label)
        node_path = config.path("wikilinkgraph.nodes", date=label)
        for needed in (edge_path, node_path):
            if not needed.is_file():
                _event("missing-input", path=str(needed), detail="run graph first")
                return EXIT_USAGE
        stats = analytics.compute_stats(
            edge_path, node_path, language=config.language, date=label
        )
        collected.append(stats)
        _event("stats", date=label, nodes=stats.node_count, edges=stats.edge_count)
    out = args.output if args.output else config.output_dir / f"{config.language}wiki.growth.csv"
    analytics.write_growth_series(collected, out)
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    failures = 0
    checked = 0
    markers = sorted(config.output_dir.glob(f"*{PARTIAL_SUFFIX}"))
    for marker in markers:
        _event("verify-partial-output", path=str(marker))
        failures += 1
    for sidecar in sorted(config.output_dir.glob(f"*{CHECKSUM_SUFFIX}")):
        target = Path(str(sidecar)[: -len(CHECKSUM_SUFFIX)])
        checked += 1
        if not target.is_file():
            _event("verify-missing-file", path=str(target))
            failures += 1
            continue
        if verify_checksum(target):
            _event("verify-ok", path=str(target))
        else:
            _event("verify-mismatch", path=str(target))
            failures += 1
    _event("verify-done", files=checked, failures=failures)
    return EXIT_OK if failures == 0 else EXIT_FATAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikilinks",
        description="Build temporal article link datasets from MediaWiki history dumps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, dates: bool = True) -> None:
        p.add_argument("--lang", required=True, help="language code, e.g. en")
        p.add_argument("--output-dir", required=True, help="directory for datasets")
        if dates:
            p.add_argument(
                "--date",
                action="append",
                metavar="YYYY-MM-DD",
                help="snapshot date, repeatable (default: every March 1st 2001-2018)",
            )

    p = sub.add_parser("extract", help="parse dumps into raw link and redirect datasets")
    common(p, dates=False)
    p.add_argument("inputs", nargs="+", metavar="DUMP", help="dump file(s)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--codec", choices=CODECS, help="force input codec (default: by extension)")
    p.add_argument(
        "--strip-inert-spans",
        action="store_true",
        help="ignore links inside HTML comments and <nowiki> spans",
    )
    p.add_argument(
        "--sevenzip-command",
        metavar="CMD",
        help='external decompressor command for 7z inputs (default: "7z e -so")',
    )
    p.add_argument("--profiles", help="JSON file overriding language redirect keywords")

    p = sub.add_parser("snapshot", help="select revisions and resolve redirects per date")
    common(p)

    p = sub.add_parser("graph", help="build deduplicated edge lists per date")
    common(p)
    p.add_argument(
        "--drop-self-loops",
        action="store_true",
        help="also drop self-loops that arise from redirect resolution",
    )

    p = sub.add_parser("pagerank", help="rank articles of each snapshot graph")
    common(p)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--output", help="rankings CSV path, or - for stdout")

    p = sub.add_parser("stats", help="count nodes/edges and emit the growth series")
    common(p)
    p.add_argument("--output", help="growth CSV path, or - for stdout")

    p = sub.add_parser("verify", help="recompute and compare all output checksums")
    common(p, dates=False)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return EXIT_USAGE if exit_.code not in (0, None) else EXIT_OK
    try:
        config = _config_from_args(args)
        if args.command == "extract":
            return cmd_extract(config)
        if args.command == "snapshot":
            return cmd_snapshot(config)
        if args.command == "graph":
            return cmd_graph(config)
        if args.command == "pagerank":
            return cmd_pagerank(config, args)
        if args.command == "stats":
            return cmd_stats(config, args)
        if args.command == "verify":
            return cmd_verify(config)
        parser.error(f"unknown command {args.command!r}")
    except ConfigurationError as err:
        _event("configuration-error", detail=str(err))
        return EXIT_USAGE
    except (DumpFormatError, DataFormatError) as err:
        _event("fatal", detail=str(err))
        return EXIT_FATAL
    except OSError as err:
        _event("fatal", detail=str(err))
        return EXIT_FATAL
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
