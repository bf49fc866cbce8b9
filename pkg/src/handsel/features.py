"""Per-match feature vectors and targets.

Column order is fixed by ``FEATURE_NAMES``: game context, squad composition,
the 24 home-minus-away squad differences, then the four strength covariates.
The classical set is the first 33 columns.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import IntEnum
from pathlib import Path

import numpy as np

from .data import MatchRecord, PlayerRecord, TeamRecord
from .errors import (
    CoordinateRangeError,
    HandselError,
    InvariantViolationError,
    MalformedRowError,
    MissingScoreError,
    UnresolvedRosterError,
)
from .strength import StrengthProvider, season_label, season_of

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0

GROUPS = (("wing", "Wing"), ("back", "Back"), ("pivot", "Pivot"), ("gk", "Goalkeeper"))
STATS = ("height", "weight", "age")
MOMENTS = ("avg", "std")

GAME_FEATURES = [
    "game_dow",
    "game_hour",
    "importance",
    "days_to_final",
    "away_travel_km",
    "home_international",
    "away_international",
    "home_locals",
    "away_locals",
]
DIFF_FEATURES = [
    f"diff_{short}_{stat}_{moment}"
    for stat in STATS
    for moment in MOMENTS
    for short, _ in GROUPS
]
SEL_FEATURES = [
    "attack_strength_home",
    "defense_strength_home",
    "attack_strength_away",
    "defense_strength_away",
]
CLASSICAL_FEATURES = GAME_FEATURES + DIFF_FEATURES
FEATURE_NAMES = CLASSICAL_FEATURES + SEL_FEATURES
SHARE_FEATURES = ("home_international", "away_international", "home_locals", "away_locals")
MAX_TRAVEL_KM = math.pi * EARTH_RADIUS_KM


def feature_names(include_sel: bool) -> list[str]:
    return list(FEATURE_NAMES if include_sel else CLASSICAL_FEATURES)


class Outcome(IntEnum):
    HOME_WIN = 0
    DRAW = 1
    AWAY_WIN = 2

    @property
    def label(self) -> str:
        return ("HomeWin", "Draw", "AwayWin")[self]

    @classmethod
    def from_label(cls, text: str) -> "Outcome":
        return cls(("HomeWin", "Draw", "AwayWin").index(text))


@dataclass(frozen=True)
class TargetPair:
    home_goals: int
    away_goals: int
    outcome: Outcome


def make_targets(match: MatchRecord) -> TargetPair:
    if not match.has_score:
        raise MissingScoreError(f"match {match.match_id} has no final score")
    h, a = match.home_goals, match.away_goals
    if h > a:
        outcome = Outcome.HOME_WIN
    elif h == a:
        outcome = Outcome.DRAW
    else:
        outcome = Outcome.AWAY_WIN
    return TargetPair(h, a, outcome)


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two ``(lat, lon)`` points in degrees."""
    for lat, lon in (a, b):
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise CoordinateRangeError(f"coordinate out of range: ({lat}, {lon})")
    if a == b:
        return 0.0
    phi1, phi2 = math.radians(a[0]), math.radians(b[0])
    dphi = phi2 - phi1
    dlmb = math.radians(b[1] - a[1])
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, max(0.0, h))))


@dataclass(frozen=True)
class Aggregate:
    value: float
    imputed: bool = False


def _stat_values(players, stat: str, as_of: date) -> np.ndarray:
    if stat == "height":
        return np.array([p.height_cm for p in players], dtype=float)
    if stat == "weight":
        return np.array([p.weight_kg for p in players], dtype=float)
    if stat == "age":
        return np.array([(as_of - p.birth_date).days / 365.25 for p in players], dtype=float)
    raise ValueError(f"unknown stat {stat!r}")


def squad_aggregate(
    players,
    position: str,
    stat: str,
    moment: str,
    as_of: date,
    fallback: float | None = None,
) -> Aggregate:
    """Mean or unbiased standard deviation of one attribute over a position group.

    An empty group yields ``fallback`` (NaN when none is given) flagged as
    imputed. Ages are fractional years at ``as_of``.
    """
    if moment not in MOMENTS:
        raise ValueError(f"unknown moment {moment!r}")
    group = [p for p in players if p.position == position]
    if not group:
        return Aggregate(math.nan if fallback is None else float(fallback), True)
    values = _stat_values(group, stat, as_of)
    if moment == "avg":
        return Aggregate(float(values.mean()))
    return Aggregate(float(values.std(ddof=1)) if len(values) > 1 else 0.0)


def _imputation_key(position: str, stat: str, moment: str) -> str:
    return f"{position}|{stat}|{moment}"


@dataclass(frozen=True)
class FeatureVector:
    match_id: str
    values: dict[str, float]
    sel_included: bool
    imputed: tuple[str, ...] = ()

    def as_array(self, names) -> np.ndarray:
        return np.array([self.values[n] for n in names], dtype=float)

    def check(self) -> None:
        """Raise ``InvariantViolationError`` on the first value outside its range."""
        v = self.values
        bounds = {"game_dow": (0, 6), "game_hour": (0, 23), "importance": (1, 5),
                  "days_to_final": (0, math.inf), "away_travel_km": (0, MAX_TRAVEL_KM + 1e-9)}
        bounds.update({s: (0.0, 1.0) for s in SHARE_FEATURES})
        for name, x in v.items():
            if not math.isfinite(x):
                raise InvariantViolationError(name, x, f"not finite in {self.match_id}")
            lo, hi = bounds.get(name, (-math.inf, math.inf))
            if not lo <= x <= hi:
                raise InvariantViolationError(name, x, f"outside [{lo}, {hi}] in {self.match_id}")


class MatchContext:
    """Everything ``build_features`` joins onto a match: clubs, squads, strengths.

    ``imputation`` maps ``position|stat|moment`` to the training-split league
    median used for empty position groups.
    """

    def __init__(
        self,
        teams,
        players,
        strengths: StrengthProvider | None = None,
        imputation: dict[str, float] | None = None,
    ):
        self.teams: dict[str, TeamRecord] = {t.team_id: t for t in teams}
        self.squads: dict[tuple[str, str], list[PlayerRecord]] = defaultdict(list)
        for p in players:
            self.squads[(p.team_id, p.season)].append(p)
        self.strengths = strengths
        self.imputation = dict(imputation or {})

    def team(self, team_id: str) -> TeamRecord:
        try:
            return self.teams[team_id]
        except KeyError:
            raise UnresolvedRosterError(f"unknown team {team_id!r}") from None

    def squad(self, team_id: str, day: date) -> list[PlayerRecord]:
        label = season_label(season_of(day))
        squad = self.squads.get((team_id, label))
        if not squad:
            raise UnresolvedRosterError(f"no roster for team {team_id!r} in season {label}")
        return squad

    def local_time(self, match: MatchRecord):
        offset = self.team(match.home_team_id).utc_offset_hours
        if offset is None:
            # timestamps already carry venue-local wall-clock time
            return match.start_time.replace(tzinfo=None)
        return (match.start_time + timedelta(hours=offset)).replace(tzinfo=None)


def fit_imputation(matches, context: MatchContext) -> dict[str, float]:
    """League medians of every squad aggregate over the sides of ``matches``."""
    samples = defaultdict(list)
    for m in matches:
        day = context.local_time(m).date()
        for team_id in (m.home_team_id, m.away_team_id):
            try:
                squad = context.squad(team_id, day)
            except UnresolvedRosterError:
                continue
            for _, position in GROUPS:
                for stat in STATS:
                    for moment in MOMENTS:
                        agg = squad_aggregate(squad, position, stat, moment, day)
                        if not agg.imputed:
                            samples[_imputation_key(position, stat, moment)].append(agg.value)
    medians = {}
    for _, position in GROUPS:
        for stat in STATS:
            for moment in MOMENTS:
                key = _imputation_key(position, stat, moment)
                values = samples.get(key)
                medians[key] = float(np.median(values)) if values else 0.0
    return medians


def _share(players, predicate) -> float:
    return sum(1 for p in players if predicate(p)) / len(players)


def build_features(match: MatchRecord, context: MatchContext, include_sel: bool = True) -> FeatureVector:
    """Feature vector for one match.

    Raises:
        UnresolvedRosterError: a club or its squad for the season is missing.
        InsufficientHistoryError: strengths cannot be estimated or imputed.
    """
    home, away = context.team(match.home_team_id), context.team(match.away_team_id)
    local = context.local_time(match)
    day = local.date()
    home_squad = context.squad(home.team_id, day)
    away_squad = context.squad(away.team_id, day)

    v = {
        "game_dow": float(local.weekday()),
        "game_hour": float(local.hour),
        "importance": float(match.importance),
        "days_to_final": float((match.season_final_date - day).days),
        "away_travel_km": haversine_km((away.home_lat, away.home_lon), (match.venue_lat, match.venue_lon)),
        "home_international": _share(home_squad, lambda p: p.is_international),
        "away_international": _share(away_squad, lambda p: p.is_international),
        "home_locals": _share(home_squad, lambda p: p.nationality == home.club_country),
        "away_locals": _share(away_squad, lambda p: p.nationality == away.club_country),
    }
    imputed = []
    for short, position in GROUPS:
        for stat in STATS:
            for moment in MOMENTS:
                fallback = context.imputation.get(_imputation_key(position, stat, moment))
                h = squad_aggregate(home_squad, position, stat, moment, day, fallback)
                a = squad_aggregate(away_squad, position, stat, moment, day, fallback)
                if h.imputed:
                    imputed.append(f"home:{position}")
                if a.imputed:
                    imputed.append(f"away:{position}")
                v[f"diff_{short}_{stat}_{moment}"] = h.value - a.value

    if include_sel:
        if context.strengths is None:
            raise ValueError("include_sel requires a strength provider")
        sh = context.strengths.get(home.team_id, match.day)
        sa = context.strengths.get(away.team_id, match.day)
        v["attack_strength_home"] = sh.s_attack
        v["defense_strength_home"] = sh.s_defense
        v["attack_strength_away"] = sa.s_attack
        v["defense_strength_away"] = sa.s_defense
        if sh.imputed:
            imputed.append("home:strength")
        if sa.imputed:
            imputed.append("away:strength")

    return FeatureVector(match.match_id, v, include_sel, tuple(sorted(set(imputed))))


@dataclass
class Dataset:
    """Feature matrix plus targets; target arrays are empty-valued (-1) for fixtures."""

    feature_names: list[str]
    match_ids: list[str]
    X: np.ndarray
    home_goals: np.ndarray
    away_goals: np.ndarray
    outcome: np.ndarray
    errors: list[tuple[str, str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.match_ids)

    @property
    def has_targets(self) -> bool:
        return bool(len(self)) and bool(np.all(self.outcome >= 0))

    def select(self, names) -> "Dataset":
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(list(names), list(self.match_ids), self.X[:, idx], self.home_goals,
                       self.away_goals, self.outcome, list(self.errors))

    def row(self, match_id: str) -> np.ndarray:
        return self.X[self.match_ids.index(match_id)]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["match_id", *self.feature_names, "home_goals", "away_goals", "outcome"])
            for i, mid in enumerate(self.match_ids):
                if self.outcome[i] >= 0:
                    tail = [int(self.home_goals[i]), int(self.away_goals[i]), Outcome(int(self.outcome[i])).label]
                else:
                    tail = ["", "", ""]
                w.writerow([mid, *(repr(float(x)) for x in self.X[i]), *tail])
        return path

    @classmethod
    def read_csv(cls, path) -> "Dataset":
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header[0] != "match_id" or header[-3:] != ["home_goals", "away_goals", "outcome"]:
                raise MalformedRowError(f"{path}: not a feature matrix header", line=1)
            names = header[1:-3]
            unknown = [n for n in names if n not in FEATURE_NAMES]
            if unknown:
                raise MalformedRowError(f"{path}: unknown feature columns {unknown}", line=1)
            ids, rows, hg, ag, oc = [], [], [], [], []
            for line_no, row in enumerate(r, start=2):
                if len(row) != len(header):
                    raise MalformedRowError(f"expected {len(header)} fields", line=line_no)
                ids.append(row[0])
                rows.append([float(x) for x in row[1:-3]])
                if row[-1]:
                    hg.append(int(row[-3]))
                    ag.append(int(row[-2]))
                    oc.append(int(Outcome.from_label(row[-1])))
                else:
                    hg.append(-1)
                    ag.append(-1)
                    oc.append(-1)
        X = np.array(rows, dtype=float).reshape(len(rows), len(names))
        return cls(names, ids, X, np.array(hg), np.array(ag), np.array(oc))


def assemble_dataset(
    matches,
    context: MatchContext,
    include_sel: bool,
    require_targets: bool = True,
) -> Dataset:
    """Feature matrix and targets for ``matches`` in input order.

    Matches whose features cannot be built are dropped and reported in
    ``Dataset.errors`` as ``(match_id, error code, message)``; with
    ``require_targets`` unscored fixtures are dropped too.
    """
    names = feature_names(include_sel)
    ids, rows, hg, ag, oc, errors = [], [], [], [], [], []
    for m in matches:
        if require_targets and not m.has_score:
            errors.append((m.match_id, MissingScoreError.code, "no final score"))
            continue
        try:
            fv = build_features(m, context, include_sel)
        except HandselError as exc:
            errors.append((m.match_id, exc.code, str(exc)))
            continue
        ids.append(m.match_id)
        rows.append(fv.as_array(names))
        if m.has_score:
            t = make_targets(m)
            hg.append(t.home_goals)
            ag.append(t.away_goals)
            oc.append(int(t.outcome))
        else:
            hg.append(-1)
            ag.append(-1)
            oc.append(-1)
    if errors:
        logger.info("dropped %d of %d matches while assembling features", len(errors), len(matches))
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return Dataset(names, ids, X, np.array(hg, dtype=int), np.array(ag, dtype=int),
                   np.array(oc, dtype=int), errors)
