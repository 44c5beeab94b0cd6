from __future__ import annotations

import io

import pytest

from wikilinks.dump import filter_namespace, read_pages
from wikilinks.pipeline import (
    RAW_LINK_FIELDS,
    REDIRECT_FIELDS,
    RawLinkRecord,
    RedirectEvent,
    extract_all,
    extract_redirect_history,
    raw_sort_key,
    read_raw_records,
    read_redirect_events,
    redirect_sort_key,
    sort_dataset,
)
from wikilinks.storage import DatasetWriter, iter_rows, sha256_of
from wikilinks.wikitext import get_profile

from test_dump import BASIC_REV, dump_bytes, page_xml

EN = get_profile("en")


def pages_from(*page_xmls):
    return list(read_pages(io.BytesIO(dump_bytes(*page_xmls))))


def run_extract(tmp_path, pages, jobs=1, strip=False):
    tmp_path.mkdir(parents=True, exist_ok=True)
    raw = tmp_path / "raw.csv.gz"
    redirects = tmp_path / "redirects.csv.gz"
    with DatasetWriter(raw, RAW_LINK_FIELDS) as sink, \
            DatasetWriter(redirects, REDIRECT_FIELDS) as redirect_sink:
        summary = extract_all(
            iter(pages), EN, sink, redirect_sink=redirect_sink, jobs=jobs,
            strip_inert_spans=strip,
        )
    return summary, raw, redirects


class TestExtractAll:
    def test_two_links_two_records(self, tmp_path):
        pages = pages_from(page_xml("P", 1, [dict(BASIC_REV, text="[[A]] [[B]]")]))
        summary, raw, _ = run_extract(tmp_path, pages)
        rows = list(iter_rows(raw, RAW_LINK_FIELDS))
        assert summary.pages == 1
        assert summary.revisions == 1
        assert summary.links == 2
        assert [r[9] for r in rows] == ["A", "B"]

    def test_history_is_cumulative_not_diffed(self, tmp_path):
        revs = [
            {"id": 1, "timestamp": "2016-01-01T00:00:00Z", "text": "[[A]]"},
            {"id": 2, "timestamp": "2016-02-01T00:00:00Z", "text": "[[A]] [[B]]"},
        ]
        pages = pages_from(page_xml("P", 1, revs))
        summary, raw, _ = run_extract(tmp_path, pages)
        # oracle: manual count, 1 + 2 records
        assert summary.links == 3
        assert len(list(iter_rows(raw, RAW_LINK_FIELDS))) == 3

    def test_empty_dump(self, tmp_path):
        summary, raw, redirects = run_extract(tmp_path, [])
        assert (summary.pages, summary.revisions, summary.links, summary.errors) == (0, 0, 0, 0)
        assert list(iter_rows(raw, RAW_LINK_FIELDS)) == []
        assert list(iter_rows(redirects, REDIRECT_FIELDS)) == []

    def test_conservation_links_equal_sum_of_extractions(self, tmp_path, minidump_path):
        from wikilinks.wikitext import extract_links

        with open(minidump_path, "rb") as f:
            pages = list(filter_namespace(read_pages(f), 0))
        expected = sum(len(extract_links(r.wikitext)) for p in pages for r in p.revisions)
        summary, raw, _ = run_extract(tmp_path, pages)
        assert summary.links == expected
        assert len(list(iter_rows(raw, RAW_LINK_FIELDS))) == expected

    def test_record_field_order_and_serialization(self, tmp_path):
        revs = [dict(BASIC_REV, text="pre\n== Sec ==\n[[A#frag|anchor text]]", minor=True)]
        pages = pages_from(page_xml("P", 7, revs))
        _, raw, _ = run_extract(tmp_path, pages)
        (row,) = iter_rows(raw, RAW_LINK_FIELDS)
        assert row == [
            "7", "P", "11", "", "2016-01-01T00:00:00Z", "registered", "U", "9",
            "1", "A", "frag", "anchor text", "Sec", "2", "1",
        ]
        record = RawLinkRecord.from_row(row)
        assert record.to_row() == tuple(row)

    def test_worker_pool_output_identical_to_serial(self, tmp_path, minidump_path):
        with open(minidump_path, "rb") as f:
            pages = list(filter_namespace(read_pages(f), 0))
        _, raw1, red1 = run_extract(tmp_path / "serial", pages)
        _, raw8, red8 = run_extract(tmp_path / "pooled", pages, jobs=4)
        assert sha256_of(raw1) == sha256_of(raw8)
        assert sha256_of(red1) == sha256_of(red8)

    def test_sink_failure_aborts_with_partial_marker(self, tmp_path):
        class FailingWriter(DatasetWriter):
            def write_row(self, row):
                if self.rows_written >= 1:
                    raise OSError("disk full")
                super().write_row(row)

        pages = pages_from(page_xml("P", 1, [dict(BASIC_REV, text="[[A]] [[B]]")]))
        raw = tmp_path / "raw.csv.gz"
        sink = FailingWriter(raw, RAW_LINK_FIELDS)
        with pytest.raises(OSError):
            extract_all(iter(pages), EN, sink)
        assert (tmp_path / "raw.csv.gz.partial").exists()

    def test_strip_inert_spans_flag(self, tmp_path):
        text = "[[A]] <!-- [[B]] -->"
        pages = pages_from(page_xml("P", 1, [dict(BASIC_REV, text=text)]))
        summary, _, _ = run_extract(tmp_path, pages, strip=True)
        assert summary.links == 1


class TestRedirectHistory:
    def test_single_redirect_revision(self):
        pages = pages_from(page_xml("P", 1, [dict(BASIC_REV, text="#REDIRECT [[X]]")]))
        (event,) = extract_redirect_history(iter(pages), EN)
        assert event.target == "X"
        assert event.page_title == "P"

    def test_page_becoming_redirect(self):
        revs = [
            {"id": 1, "timestamp": "2016-01-01T00:00:00Z", "text": "article text"},
            {"id": 2, "timestamp": "2016-02-01T00:00:00Z", "text": "#REDIRECT [[X]]"},
        ]
        events = list(extract_redirect_history(iter(pages_from(page_xml("P", 1, revs))), EN))
        assert [e.target for e in events] == [None, "X"]

    def test_never_redirect_page(self):
        revs = [
            {"id": 1, "timestamp": "2016-01-01T00:00:00Z", "text": "a"},
            {"id": 2, "timestamp": "2016-02-01T00:00:00Z", "text": "b"},
        ]
        events = list(extract_redirect_history(iter(pages_from(page_xml("P", 1, revs))), EN))
        assert [e.target for e in events] == [None, None]

    def test_events_ordered_by_timestamp(self):
        revs = [
            {"id": 2, "timestamp": "2016-02-01T00:00:00Z", "text": "b"},
            {"id": 1, "timestamp": "2016-01-01T00:00:00Z", "text": "a"},
        ]
        events = list(extract_redirect_history(iter(pages_from(page_xml("P", 1, revs))), EN))
        assert [e.revision_id for e in events] == [1, 2]

    def test_row_roundtrip(self):
        pages = pages_from(page_xml("P", 1, [dict(BASIC_REV, text="#REDIRECT [[X#Top]]")]))
        (event,) = extract_redirect_history(iter(pages), EN)
        assert RedirectEvent.from_row(event.to_row()) == event


class TestSortAndMerge:
    def test_sort_dataset_orders_by_key(self, tmp_path):
        path = tmp_path / "raw.csv.gz"
        records = [
            ("2", "B", "20", "", "2016-01-01T00:00:00Z", "registered", "U", "1", "0",
             "L1", "", "", "", "0", "0"),
            ("1", "A", "11", "", "2016-02-01T00:00:00Z", "registered", "U", "1", "0",
             "L2", "", "", "", "0", "0"),
            ("1", "A", "10", "", "2016-01-01T00:00:00Z", "registered", "U", "1", "0",
             "L3", "", "", "", "0", "0"),
        ]
        with DatasetWriter(path, RAW_LINK_FIELDS) as writer:
            writer.write_rows(records)
        sort_dataset(path, RAW_LINK_FIELDS, raw_sort_key)
        rows = list(iter_rows(path, RAW_LINK_FIELDS))
        assert [r[9] for r in rows] == ["L3", "L2", "L1"]

    def test_merged_read_across_shards(self, tmp_path):
        shard_a = tmp_path / "a.csv.gz"
        shard_b = tmp_path / "b.csv.gz"
        row = lambda pid, rid, ts, link: (
            str(pid), f"T{pid}", str(rid), "", ts, "registered", "U", "1", "0",
            link, "", "", "", "0", "0",
        )
        with DatasetWriter(shard_a, RAW_LINK_FIELDS) as w:
            w.write_rows([row(1, 10, "2016-01-01T00:00:00Z", "a1"),
                          row(3, 30, "2016-01-01T00:00:00Z", "a2")])
        with DatasetWriter(shard_b, RAW_LINK_FIELDS) as w:
            w.write_rows([row(2, 20, "2016-01-01T00:00:00Z", "b1")])
        merged = [r.link for r in read_raw_records([shard_b, shard_a])]
        assert merged == ["a1", "b1", "a2"]

    def test_redirect_events_merge(self, tmp_path):
        path = tmp_path / "r.csv.gz"
        with DatasetWriter(path, REDIRECT_FIELDS) as w:
            w.write_rows([
                ("1", "A", "10", "2016-01-01T00:00:00Z", "", ""),
                ("1", "A", "11", "2016-02-01T00:00:00Z", "X", "Top"),
            ])
        events = list(read_redirect_events([path]))
        assert [e.target for e in events] == [None, "X"]
        assert events[1].tosection == "Top"

    def test_deterministic_rerun_checksums(self, tmp_path, minidump_path):
        with open(minidump_path, "rb") as f:
            pages = list(filter_namespace(read_pages(f), 0))
        digests = []
        for name in ("one", "two"):
            _, raw, redirects = run_extract(tmp_path / name, pages)
            sort_dataset(raw, RAW_LINK_FIELDS, raw_sort_key)
            sort_dataset(redirects, REDIRECT_FIELDS, redirect_sort_key)
            digests.append((sha256_of(raw), sha256_of(redirects)))
        assert digests[0] == digests[1]
