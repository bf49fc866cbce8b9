"""Match, team and player records and their CSV files.

One UTF-8 CSV per record kind with a fixed header, ISO-8601 dates and
timestamps, dot decimals. Scores may be empty (future fixtures); every
other empty field is an error. Any process that writes these files is a
valid data source.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from datetime import date, datetime, timezone
from pathlib import Path

from .errors import (
    DuplicateIdError,
    EmptySplitError,
    InvariantViolationError,
    MalformedRowError,
)

POSITIONS = ("Wing", "Back", "Pivot", "Goalkeeper")


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    start_time: datetime
    competition_id: str
    importance: int
    season_final_date: date
    home_team_id: str
    away_team_id: str
    home_goals: int | None
    away_goals: int | None
    venue_lat: float
    venue_lon: float

    @property
    def has_score(self) -> bool:
        return self.home_goals is not None and self.away_goals is not None

    @property
    def day(self) -> date:
        return self.start_time.date()

    def validate(self, line=None) -> "MatchRecord":
        if self.home_team_id == self.away_team_id:
            raise InvariantViolationError(
                "away_team_id", self.away_team_id, "same as home team", line
            )
        if not 1 <= self.importance <= 5:
            raise InvariantViolationError(
                "importance", self.importance, "must be in 1..5", line
            )
        if self.season_final_date < self.start_time.date():
            raise InvariantViolationError(
                "season_final_date",
                self.season_final_date.isoformat(),
                "before the match date",
                line,
            )
        if (self.home_goals is None) != (self.away_goals is None):
            raise InvariantViolationError(
                "home_goals", self.home_goals, "scores must be both present or both empty", line
            )
        for name in ("home_goals", "away_goals"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvariantViolationError(name, value, "negative", line)
        _check_coordinates(self.venue_lat, self.venue_lon, "venue", line)
        return self


@dataclass(frozen=True)
class TeamRecord:
    team_id: str
    name: str
    club_country: str
    home_lat: float
    home_lon: float
    utc_offset_hours: float | None = None

    def validate(self, line=None) -> "TeamRecord":
        _check_coordinates(self.home_lat, self.home_lon, "home", line)
        return self


@dataclass(frozen=True)
class PlayerRecord:
    player_id: str
    team_id: str
    season: str
    position: str
    height_cm: float
    weight_kg: float
    birth_date: date
    nationality: str
    is_international: bool

    def validate(self, line=None) -> "PlayerRecord":
        if self.position not in POSITIONS:
            raise InvariantViolationError(
                "position", self.position, f"must be one of {POSITIONS}", line
            )
        if not 140 <= self.height_cm <= 230:
            raise InvariantViolationError("height_cm", self.height_cm, "outside [140, 230]", line)
        if not 40 <= self.weight_kg <= 150:
            raise InvariantViolationError("weight_kg", self.weight_kg, "outside [40, 150]", line)
        return self


def _check_coordinates(lat, lon, prefix, line):
    if not (math.isfinite(lat) and -90 <= lat <= 90):
        raise InvariantViolationError(f"{prefix}_lat", lat, "outside [-90, 90]", line)
    if not (math.isfinite(lon) and -180 <= lon <= 180):
        raise InvariantViolationError(f"{prefix}_lon", lon, "outside [-180, 180]", line)


MATCH_COLUMNS = [f.name for f in fields(MatchRecord)]
TEAM_COLUMNS = [f.name for f in fields(TeamRecord) if f.name != "utc_offset_hours"]
TEAM_OPTIONAL = ["utc_offset_hours"]
PLAYER_COLUMNS = [f.name for f in fields(PlayerRecord)]


# --- field codecs -----------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(f"negative count {value}")
    return value


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, datetime):
        return format_timestamp(value)
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


_MATCH_PARSERS = {
    "match_id": str,
    "start_time": parse_timestamp,
    "competition_id": str,
    "importance": int,
    "season_final_date": date.fromisoformat,
    "home_team_id": str,
    "away_team_id": str,
    "home_goals": _parse_count,
    "away_goals": _parse_count,
    "venue_lat": float,
    "venue_lon": float,
}
_TEAM_PARSERS = {
    "team_id": str,
    "name": str,
    "club_country": str,
    "home_lat": float,
    "home_lon": float,
    "utc_offset_hours": float,
}
_PLAYER_PARSERS = {
    "player_id": str,
    "team_id": str,
    "season": str,
    "position": str,
    "height_cm": float,
    "weight_kg": float,
    "birth_date": date.fromisoformat,
    "nationality": str,
    "is_international": _parse_bool,
}


def _read_rows(path, columns, optional=(), nullable=()):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(f"{path}: empty file", line=1) from None
        header = [h.strip() for h in header]
        allowed = [columns + list(optional[:k]) for k in range(len(optional) + 1)]
        if header not in allowed:
            raise MalformedRowError(
                f"{path}: header {header} does not match {columns}", line=1
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MalformedRowError(
                    f"expected {len(header)} fields, got {len(row)}", line=line_no
                )
            record = dict(zip(header, (cell.strip() for cell in row)))
            for name, cell in record.items():
                if cell == "" and name not in nullable:
                    raise MalformedRowError(f"empty field {name!r}", line=line_no)
            yield line_no, record


def _convert(record, parsers, line_no):
    out = {}
    for name, cell in record.items():
        if cell == "":
            out[name] = None
            continue
        try:
            out[name] = parsers[name](cell)
        except (ValueError, TypeError) as exc:
            raise MalformedRowError(f"field {name!r}: {exc}", line=line_no) from None
    return out


def _parse(path, cls, columns, parsers, key, optional=(), nullable=()):
    records = []
    seen = {}
    for line_no, raw in _read_rows(path, columns, optional, nullable):
        rec = cls(**_convert(raw, parsers, line_no)).validate(line_no)
        ident = key(rec)
        if ident in seen:
            raise DuplicateIdError(
                f"{Path(path).name} line {line_no}: duplicate id {ident!r} "
                f"(first seen on line {seen[ident]})"
            )
        seen[ident] = line_no
        records.append(rec)
    return records


def parse_matches(path) -> list[MatchRecord]:
    return _parse(
        path,
        MatchRecord,
        MATCH_COLUMNS,
        _MATCH_PARSERS,
        key=lambda r: r.match_id,
        nullable=("home_goals", "away_goals"),
    )


def parse_teams(path) -> list[TeamRecord]:
    return _parse(
        path, TeamRecord, TEAM_COLUMNS, _TEAM_PARSERS,
        key=lambda r: r.team_id, optional=TEAM_OPTIONAL,
    )


def parse_players(path) -> list[PlayerRecord]:
    """Players are per-season snapshots, so identity is ``(player_id, season)``."""
    return _parse(
        path, PlayerRecord, PLAYER_COLUMNS, _PLAYER_PARSERS,
        key=lambda r: (r.player_id, r.season),
    )


def _write(path, columns, records):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_format(getattr(rec, c)) for c in columns])
    return path


def write_matches(path, matches) -> Path:
    return _write(path, MATCH_COLUMNS, matches)


def write_teams(path, teams) -> Path:
    columns = TEAM_COLUMNS
    if any(t.utc_offset_hours is not None for t in teams):
        columns = TEAM_COLUMNS + TEAM_OPTIONAL
    return _write(path, columns, teams)


def write_players(path, players) -> Path:
    return _write(path, PLAYER_COLUMNS, players)


def load_dataset(directory):
    """Read ``matches.csv``, ``teams.csv`` and ``players.csv`` from a directory."""
    directory = Path(directory)
    return (
        parse_matches(directory / "matches.csv"),
        parse_teams(directory / "teams.csv"),
        parse_players(directory / "players.csv"),
    )


def temporal_split(matches, cutoff: date):
    """Split into matches dated before ``cutoff`` and on/after it, each in time order."""
    ordered = sorted(matches, key=lambda m: (m.start_time, m.match_id))
    train = [m for m in ordered if m.day < cutoff]
    test = [m for m in ordered if m.day >= cutoff]
    if not train or not test:
        raise EmptySplitError(
            f"cutoff {cutoff} leaves {len(train)} training and {len(test)} test matches"
        )
    return train, test
