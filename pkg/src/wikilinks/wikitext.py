"""Wikitext link, section, and redirect extraction.

Internal links look like ``[[target|anchor]]``. The grammar accepted here is
exactly the one matched by :data:`LINK_RE`: a target of up to 256 characters
drawn from anything except newline and ``| ] [ < > { }``, then an optional
pipe-separated anchor that may contain anything except ``[`` (matched
non-greedily), closed by ``]]``. Targets that contain ``#`` are split at the
first ``#`` into (link, tosection) after matching, since ``#`` cannot occur
in page titles.

:func:`extract_links` uses a hand-written scanner that reproduces the regex
byte for byte but runs in time linear in the input, including on adversarial
inputs such as megabyte-long bracket runs. :data:`LINK_RE` is kept as the
executable statement of the grammar and as a cross-check for tests.

All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

LINK_RE = re.compile(
    r"""
    \[\[
    (?P<link>
       [^\n\|\]\[\<\>\{\}]{0,256}
    )
    (?:
      \|
      (?P<anchor>
          [^\[]*?
      )
    )?
    \]\]
    """,
    re.VERBOSE,
)

# Characters excluded from the target character class of LINK_RE.
_TARGET_EXCLUDED = "\n|][<>{}"
_TARGET_RUN = re.compile(r"[^\n\|\]\[\<\>\{\}]{0,256}")
_BRACKET_RUN = re.compile(r"\[+")


@dataclass(frozen=True, slots=True)
class ExtractedLink:
    """One wikilink occurrence with the coordinates of its enclosing section."""

    link: str
    tosection: str | None
    anchor: str | None
    section_name: str
    section_level: int
    section_number: int


@dataclass(frozen=True, slots=True)
class RedirectDecl:
    """Redirect directive found at the very top of a page's wikitext."""

    target: str
    tosection: str | None


@dataclass(slots=True)
class Section:
    """A section of wikitext: ``[start, end)`` offsets into the source string.

    Section 0 is the incipit (everything before the first header); numbering
    then increases by one per header line regardless of header level.
    """

    name: str
    level: int
    number: int
    start: int
    end: int


def _match_link_at(text: str, pos: int) -> tuple[str, str | None, int] | None:
    """Try to match one ``[[...]]`` link with its opening brackets at ``pos``.

    Returns ``(target, anchor, end)`` or ``None``. Mirrors LINK_RE exactly:
    because the characters that may follow the target (``|`` or ``]``) are
    excluded from the target class, only the maximal target run can match,
    so no backtracking is ever needed.
    """
    run = _TARGET_RUN.match(text, pos + 2)
    tend = run.end()
    if tend >= len(text):
        return None
    after = text[tend]
    if tend - (pos + 2) == 256 and after not in _TARGET_EXCLUDED:
        return None  # target longer than the 256 cap: nothing can close it
    if after == "]":
        if text.startswith("]]", tend):
            return text[pos + 2 : tend], None, tend + 2
        return None
    if after == "|":
        astart = tend + 1
        bracket = text.find("[", astart)
        if bracket == -1:
            close = text.find("]]", astart)
        else:
            close = text.find("]]", astart, bracket)
        if close == -1:
            return None
        return text[pos + 2 : tend], text[astart:close], close + 2
    return None


def scan_links(text: str) -> list[tuple[int, int, str, str | None]]:
    """All non-overlapping link matches, left to right.

    Returns ``(start, end, target, anchor)`` tuples identical to running
    ``LINK_RE.finditer`` over ``text``, with ``target`` still unsplit
    (a possible ``#fragment`` is preserved).
    """
    out: list[tuple[int, int, str, str | None]] = []
    n = len(text)
    pos = text.find("[[")
    while pos != -1 and pos + 4 <= n:
        hit = _match_link_at(text, pos)
        if hit is not None:
            target, anchor, end = hit
            out.append((pos, end, target, anchor))
            pos = text.find("[[", end)
            continue
        if text[pos + 2] == "[":
            # Bracket flood: only the last two brackets of the run can still
            # open a link, everything before them fails the same way.
            pos = _BRACKET_RUN.match(text, pos + 2).end() - 2
            continue
        pos = text.find("[[", pos + 1)
    return out


def split_fragment(target: str) -> tuple[str, str | None]:
    """Split a raw link target at the first ``#`` into (link, tosection)."""
    if "#" in target:
        link, _, tosection = target.partition("#")
        return link, tosection
    return target, None


def _parse_header(line: str) -> tuple[str, int] | None:
    """Parse one line as a ``== title ==`` header, or return None.

    Header markers are 2..6 ``=`` on each side; an unbalanced line takes the
    smaller marker count as its level and folds the surplus into the name.
    """
    body = line.rstrip()
    if len(body) < 4 or not (body.startswith("==") and body.endswith("==")):
        return None
    lead = len(body) - len(body.lstrip("="))
    if lead == len(body):
        # Line is '=' throughout; read the shortest marker pair off each end.
        level = min(6, len(body) // 2)
    else:
        trail = len(body) - len(body.rstrip("="))
        level = min(lead, trail, 6)
    return body[level : len(body) - level].strip(), level


def section_scan(text: str) -> list[Section]:
    """Sections of ``text`` in order, starting with the incipit as section 0."""
    sections = [Section("", 0, 0, 0, len(text))]
    offset = 0
    for line in text.splitlines(keepends=True):
        header = _parse_header(line)
        if header is not None:
            name, level = header
            sections[-1].end = offset
            sections.append(Section(name, level, len(sections), offset, len(text)))
        offset += len(line)
    return sections


_INERT_SPAN_RE = re.compile(
    r"<!--.*?(?:-->|\Z)|<nowiki>.*?(?:</nowiki>|\Z)",
    re.DOTALL | re.IGNORECASE,
)


def blank_inert_spans(text: str) -> str:
    """Blank out HTML comments and <nowiki> spans, preserving offsets.

    Every character of the span except newlines becomes a space, so link and
    section positions in the remaining text are unchanged.
    """

    def blank(match: re.Match) -> str:
        return "".join("\n" if c == "\n" else " " for c in match.group())

    return _INERT_SPAN_RE.sub(blank, text)


def extract_links(wikitext: str, *, strip_inert_spans: bool = False) -> list[ExtractedLink]:
    """Extract every wikilink of ``wikitext`` in document order.

    Links are reported even when their target page does not exist (red
    links), and regardless of surrounding markup; with ``strip_inert_spans``
    links inside HTML comments and <nowiki> spans are suppressed.
    """
    text = blank_inert_spans(wikitext) if strip_inert_spans else wikitext
    sections = section_scan(text)
    links: list[ExtractedLink] = []
    si = 0
    for start, _end, target, anchor in scan_links(text):
        while si + 1 < len(sections) and sections[si + 1].start <= start:
            si += 1
        sec = sections[si]
        link, tosection = split_fragment(target)
        links.append(
            ExtractedLink(link, tosection, anchor, sec.name, sec.level, sec.number)
        )
    return links


# Redirect keywords per language edition. #REDIRECT works everywhere, so the
# profile constructor adds it unconditionally.
DEFAULT_REDIRECT_KEYWORDS: dict[str, tuple[str, ...]] = {
    "de": ("#WEITERLEITUNG",),
    "en": (),
    "es": ("#REDIRECCIÓN", "#REDIRECCION"),
    "fr": ("#REDIRECTION",),
    "it": ("#RINVIA", "#RINVIO", "#RIMANDO"),
    "nl": ("#DOORVERWIJZING",),
    "pl": ("#PATRZ", "#PRZEKIERUJ", "#TAM"),
    "ru": ("#ПЕРЕНАПРАВЛЕНИЕ", "#ПЕРЕНАПР"),
    "sv": ("#OMDIRIGERING",),
}


@dataclass
class LanguageProfile:
    """Per-language parsing configuration (currently just redirect keywords)."""

    language: str
    redirect_keywords: frozenset[str] = frozenset()
    _ordered: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.redirect_keywords = frozenset(self.redirect_keywords) | {"#REDIRECT"}
        # Longest first, so a keyword that prefixes another is tried last.
        self._ordered = tuple(
            sorted((kw.casefold() for kw in self.redirect_keywords), key=len, reverse=True)
        )


def get_profile(language: str) -> LanguageProfile:
    try:
        keywords = DEFAULT_REDIRECT_KEYWORDS[language]
    except KeyError:
        raise ConfigurationError(
            f"no built-in profile for language {language!r}; "
            f"known: {sorted(DEFAULT_REDIRECT_KEYWORDS)}"
        ) from None
    return LanguageProfile(language, frozenset(keywords))


def load_profiles(path: str | Path) -> dict[str, LanguageProfile]:
    """Load language profiles from a JSON file: {"xx": ["#KEYWORD", ...], ...}."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        raise ConfigurationError(f"cannot load profiles from {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a JSON object of language -> keywords")
    profiles = {}
    for language, keywords in data.items():
        if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
            raise ConfigurationError(f"{path}: keywords for {language!r} must be strings")
        profiles[language] = LanguageProfile(language, frozenset(keywords))
    return profiles


# Old dumps occasionally carry a BOM before the directive.
_LEADING_WHITESPACE = "﻿ \t\r\n\v\f"
_AFTER_KEYWORD_RE = re.compile(r"[ \t]*:?\s*")


def detect_redirect(
    wikitext: str,
    profile: LanguageProfile,
    diagnostics: Counter | None = None,
) -> RedirectDecl | None:
    """Return the redirect declaration if ``wikitext`` is a redirect page.

    A page is a redirect iff its first non-whitespace token is one of the
    profile's keywords (case-insensitive), followed by an optional colon and
    a ``[[target]]`` link. A keyword without a parsable target is not a
    redirect; it is tallied in ``diagnostics`` if given.
    """
    start = len(wikitext) - len(wikitext.lstrip(_LEADING_WHITESPACE))
    keyword_seen = False
    for keyword in profile._ordered:
        end = start + len(keyword)
        if wikitext[start:end].casefold() != keyword:
            continue
        keyword_seen = True
        pos = _AFTER_KEYWORD_RE.match(wikitext, end).end()
        if not wikitext.startswith("[[", pos):
            continue
        hit = _match_link_at(wikitext, pos)
        if hit is None:
            continue
        target, _anchor, _end = hit
        link, tosection = split_fragment(target)
        return RedirectDecl(link, tosection)
    if keyword_seen and diagnostics is not None:
        diagnostics["redirect-keyword-without-target"] += 1
    return None


_UNDERSCORE_RUN = re.compile(r"_+")
_WHITESPACE_RUN = re.compile(r"\s+")


def normalize_title(raw: str) -> str | None:
    """Normalize a link target into canonical page-title form.

    Trims whitespace, strips one leading ``:``, turns underscore runs into
    single spaces, collapses internal whitespace, and capitalizes the first
    character (all nine supported wikis use first-letter capitalization).
    Returns None when nothing is left.
    """
    s = raw.strip()
    if s.startswith(":"):
        s = s[1:]
    s = _UNDERSCORE_RUN.sub(" ", s)
    s = _WHITESPACE_RUN.sub(" ", s).strip()
    if not s:
        return None
    return s[0].upper() + s[1:]
