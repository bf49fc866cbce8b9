from datetime import date, datetime, timedelta, timezone

import pytest

from handsel.data import MatchRecord, PlayerRecord, TeamRecord
from handsel.synth import SynthConfig, generate_synthetic


def match(mid, day, home, away, hg=None, ag=None, hour=18, importance=2, final=None,
          lat=48.0, lon=2.0):
    start = datetime(day.year, day.month, day.day, hour, 0, tzinfo=timezone.utc)
    return MatchRecord(
        match_id=mid,
        start_time=start,
        competition_id="L1",
        importance=importance,
        season_final_date=final or date(day.year + (day.month >= 7), 6, 15),
        home_team_id=home,
        away_team_id=away,
        home_goals=hg,
        away_goals=ag,
        venue_lat=lat,
        venue_lon=lon,
    )


def player(pid, team, season, position, height=180.0, weight=80.0, birth=date(1995, 1, 1),
           nationality="FRA", international=False):
    return PlayerRecord(pid, team, season, position, height, weight, birth, nationality, international)


def team(tid, lat=48.0, lon=2.0, country="FRA", offset=None):
    return TeamRecord(tid, f"Club {tid}", country, lat, lon, offset)


def history(team_id, opponent, start, scored, conceded, step=7, prefix="H"):
    """Alternating home/away matches of ``team_id`` with the given scores."""
    out = []
    for i, (s, c) in enumerate(zip(scored, conceded)):
        day = start + timedelta(days=step * i)
        if i % 2 == 0:
            out.append(match(f"{prefix}{i:03d}", day, team_id, opponent, s, c))
        else:
            out.append(match(f"{prefix}{i:03d}", day, opponent, team_id, c, s))
    return out


SMALL = SynthConfig(n_teams=8, n_seasons=2, seed=7, squad_size=12)


@pytest.fixture(scope="session")
def small_league():
    return generate_synthetic(SMALL)
