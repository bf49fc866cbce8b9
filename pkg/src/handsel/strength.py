"""Team attack/defense strengths from fitted CMP goal laws.

A team's scored goals (home and away pooled) give the attack law, its
conceded goals the defense law, and

    s_attack  = log(lambda_a) / nu_a
    s_defense = nu_d / log(lambda_d)

Only matches dated strictly before the as-of date enter a window, so the
covariates can be attached to a fixture without looking at its result.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass
from datetime import date

from .cmp import DEFAULT_CONFIG, CmpParams, FitConfig, fit_mle
from .errors import HandselError, InsufficientHistoryError, StrengthDomainError

logger = logging.getLogger(__name__)

MIN_WINDOW = 5
LAMBDA_GUARD = 1.0 + 1e-6
SEASON_START_MONTH = 7


def season_of(day: date) -> int:
    """Start year of the season containing ``day`` (seasons turn over on July 1st)."""
    return day.year if day.month >= SEASON_START_MONTH else day.year - 1


def season_label(start_year: int) -> str:
    return f"{start_year}/{start_year + 1}"


def attack_strength(params: CmpParams) -> float:
    if params.lam <= 1.0 or params.nu == 0:
        raise StrengthDomainError(
            f"attack strength needs lambda > 1 and nu > 0, got {params}"
        )
    return math.log(params.lam) / params.nu


def defense_strength(params: CmpParams) -> float:
    if params.lam <= 1.0 or params.nu == 0:
        raise StrengthDomainError(
            f"defense strength needs lambda > 1 and nu > 0, got {params}"
        )
    return params.nu / math.log(params.lam)


@dataclass(frozen=True)
class TeamStrength:
    team_id: str
    as_of: date
    s_attack: float
    s_defense: float
    attack_params: CmpParams | None
    defense_params: CmpParams | None
    n_matches: int
    window: str = "season"  # season | extended | imputed

    @property
    def imputed(self) -> bool:
        return self.window == "imputed"

    def check_consistency(self) -> bool:
        if self.imputed:
            return True
        return (
            self.s_attack == attack_strength(self.attack_params)
            and self.s_defense == defense_strength(self.defense_params)
        )


def _scored_conceded(match, team: str) -> tuple[int, int]:
    if match.home_team_id == team:
        return match.home_goals, match.away_goals
    return match.away_goals, match.home_goals


def _played(matches, team: str):
    return sorted(
        (
            m
            for m in matches
            if (m.home_team_id == team or m.away_team_id == team) and m.has_score
        ),
        key=lambda m: (m.start_time, m.match_id),
    )


def history_window(team_matches, as_of: date, min_window: int = MIN_WINDOW):
    """Select the fitting window from a team's chronologically sorted matches.

    Returns ``(window, kind)``. The window is the ongoing season's matches
    before ``as_of``; when that holds fewer than ``min_window`` matches the
    most recent matches of the previous season top it up.
    """
    season = season_of(as_of)
    before = [m for m in team_matches if m.start_time.date() < as_of]
    current = [m for m in before if season_of(m.start_time.date()) == season]
    if len(current) >= min_window:
        return current, "season"
    previous = [m for m in before if season_of(m.start_time.date()) == season - 1]
    needed = min_window - len(current)
    if len(previous) >= needed:
        return previous[len(previous) - needed :] + current, "extended"
    raise InsufficientHistoryError(
        f"{len(current)} matches in season {season_label(season)} before {as_of} "
        f"(+{len(previous)} previous); need {min_window}"
    )


def _fit_window(window, team: str, config: FitConfig):
    scored, conceded = zip(*(_scored_conceded(m, team) for m in window))
    attack = fit_mle(list(scored), config).params
    defense = fit_mle(list(conceded), config).params
    for label, params in (("attack", attack), ("defense", defense)):
        if params.lam <= LAMBDA_GUARD:
            raise StrengthDomainError(
                f"{label} fit for {team} gave lambda={params.lam:.6g} <= 1"
            )
    return attack, defense


def strengths_asof(
    matches,
    team: str,
    as_of: date,
    config: FitConfig = DEFAULT_CONFIG,
    min_window: int = MIN_WINDOW,
) -> TeamStrength:
    """Attack/defense strengths of ``team`` from matches strictly before ``as_of``.

    Raises:
        InsufficientHistoryError: too few matches, even after reaching back
            into the previous season.
        StrengthDomainError: a fitted ``lambda`` is not above 1.
    """
    window, kind = history_window(_played(matches, team), as_of, min_window)
    attack, defense = _fit_window(window, team, config)
    return TeamStrength(
        team_id=team,
        as_of=as_of,
        s_attack=attack_strength(attack),
        s_defense=defense_strength(defense),
        attack_params=attack,
        defense_params=defense,
        n_matches=len(window),
        window=kind,
    )


class StrengthProvider:
    """Cached as-of strength lookups with league-mean imputation.

    Fits are memoised on the exact window (team plus match ids), so the value
    for a given team and date never depends on which queries came before.
    """

    def __init__(self, matches, config: FitConfig = DEFAULT_CONFIG, min_window: int = MIN_WINDOW):
        self.config = config
        self.min_window = min_window
        by_team = defaultdict(list)
        for m in matches:
            if m.has_score:
                by_team[m.home_team_id].append(m)
                by_team[m.away_team_id].append(m)
        self._by_team = {
            t: sorted(ms, key=lambda m: (m.start_time, m.match_id))
            for t, ms in by_team.items()
        }
        self._dates = {
            t: [m.start_time.date() for m in ms] for t, ms in self._by_team.items()
        }
        self._fits = {}
        self._league = {}

    @property
    def teams(self) -> list[str]:
        return sorted(self._by_team)

    def _team_history(self, team: str, as_of: date):
        ms = self._by_team.get(team, [])
        return ms[: bisect_left(self._dates.get(team, []), as_of)]

    def exact(self, team: str, as_of: date) -> TeamStrength:
        """Strengths from the team's own history; raises instead of imputing."""
        window, kind = history_window(
            self._team_history(team, as_of), as_of, self.min_window
        )
        key = (team, tuple(m.match_id for m in window))
        if key not in self._fits:
            try:
                self._fits[key] = _fit_window(window, team, self.config)
            except HandselError as exc:
                self._fits[key] = exc
        fit = self._fits[key]
        if isinstance(fit, Exception):
            raise fit
        attack, defense = fit
        return TeamStrength(
            team_id=team,
            as_of=as_of,
            s_attack=attack_strength(attack),
            s_defense=defense_strength(defense),
            attack_params=attack,
            defense_params=defense,
            n_matches=len(window),
            window=kind,
        )

    def league_mean(self, as_of: date) -> tuple[float, float, int]:
        if as_of not in self._league:
            attack, defense = [], []
            for team in self.teams:
                try:
                    s = self.exact(team, as_of)
                except HandselError:
                    continue
                attack.append(s.s_attack)
                defense.append(s.s_defense)
            if not attack:
                self._league[as_of] = None
            else:
                self._league[as_of] = (
                    math.fsum(attack) / len(attack),
                    math.fsum(defense) / len(defense),
                    len(attack),
                )
        result = self._league[as_of]
        if result is None:
            raise InsufficientHistoryError(
                f"no team has {self.min_window} matches before {as_of}; cannot impute"
            )
        return result

    def get(self, team: str, as_of: date) -> TeamStrength:
        """Exact strengths when available, otherwise the league mean as of the date."""
        try:
            return self.exact(team, as_of)
        except HandselError as exc:
            logger.debug("imputing strengths for %s at %s: %s", team, as_of, exc)
            s_att, s_def, _ = self.league_mean(as_of)
            return TeamStrength(
                team_id=team,
                as_of=as_of,
                s_attack=s_att,
                s_defense=s_def,
                attack_params=None,
                defense_params=None,
                n_matches=0,
                window="imputed",
            )
