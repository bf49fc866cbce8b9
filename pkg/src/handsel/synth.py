"""Seeded synthetic league generator.

Each team gets latent attack and defense effects (normal draws, centred
to sum to zero across the league); a fixture's home goals
follow a CMP law with mean ``base * exp(attack_home - defense_away + home_adv)``
and the home side's dispersion, the away goals the same without the home
term. ``lambda`` is set from the mean by the first-order inversion
``lambda = mean**nu``.

Draw order from the single generator: teams, players (season by season),
then fixtures in chronological order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .cmp import CmpParams, sample
from .data import MatchRecord, PlayerRecord, TeamRecord, write_matches, write_players, write_teams
from .errors import ConfigError
from .strength import season_label

_FOREIGN = ("NOR", "DEN", "HUN", "NED", "MNE", "SRB", "ROU", "BRA", "ESP", "SWE", "CRO", "GER")
_KICKOFF_HOURS = (14, 16, 18, 19, 20, 20)
# mean/sd height (cm) by position; weights follow height
_PHYSIQUE = {
    "Wing": (169.0, 5.0),
    "Back": (180.0, 5.5),
    "Pivot": (181.0, 5.0),
    "Goalkeeper": (179.0, 5.0),
}


@dataclass(frozen=True)
class SynthConfig:
    n_teams: int = 30
    n_seasons: int = 4
    rounds_per_season: int | None = None  # None: full double round robin
    home_advantage: float = 0.035
    base_mean_goals: float = 27.9
    strength_spread: float = 0.15
    noise_nu_range: tuple[float, float] = (1.2, 2.4)
    seed: int = 42
    # defense effects are drawn with spread * defense_spread_ratio
    defense_spread_ratio: float = 0.6
    start_year: int = 2019
    squad_size: int = 16
    country: str = "FRA"
    international_base: float = 0.25
    international_slope: float = 0.25
    importance: int = 2

    def __post_init__(self):
        if self.n_teams < 4 or self.n_teams % 2:
            raise ConfigError(f"n_teams must be even and >= 4, got {self.n_teams}")
        if self.n_seasons < 1:
            raise ConfigError("n_seasons must be >= 1")
        if not self.base_mean_goals > 0:
            raise ConfigError("base_mean_goals must be > 0")
        if self.strength_spread < 0 or self.defense_spread_ratio < 0:
            raise ConfigError("spreads must be non-negative")
        lo, hi = self.noise_nu_range
        if not 0 < lo <= hi:
            raise ConfigError(f"invalid noise_nu_range {self.noise_nu_range}")
        if self.rounds_per_season is not None and self.rounds_per_season < 1:
            raise ConfigError("rounds_per_season must be >= 1")
        if self.squad_size < 10:
            raise ConfigError("squad_size must be >= 10")
        if not 1 <= self.importance <= 5:
            raise ConfigError("importance must be in 1..5")

    @property
    def rounds(self) -> int:
        return self.rounds_per_season or 2 * (self.n_teams - 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise_nu_range"] = list(self.noise_nu_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "noise_nu_range" in d:
            d["noise_nu_range"] = tuple(d["noise_nu_range"])
        return cls(**d)


@dataclass
class LatentTeam:
    team_id: str
    attack: float
    defense: float
    nu: float


@dataclass
class SyntheticLeague:
    matches: list[MatchRecord]
    teams: list[TeamRecord]
    players: list[PlayerRecord]
    latent: dict[str, LatentTeam] = field(default_factory=dict)

    def write(self, directory) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        return {
            "matches": write_matches(directory / "matches.csv", self.matches),
            "teams": write_teams(directory / "teams.csv", self.teams),
            "players": write_players(directory / "players.csv", self.players),
        }


def round_robin(n_teams: int) -> list[list[tuple[int, int]]]:
    """Double round robin by the circle method; second half mirrors the first."""
    idx = list(range(n_teams))
    first_half = []
    for r in range(n_teams - 1):
        pairs = []
        for i in range(n_teams // 2):
            a, b = idx[i], idx[n_teams - 1 - i]
            pairs.append((a, b) if (r + i) % 2 == 0 else (b, a))
        first_half.append(pairs)
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return first_half + [[(b, a) for a, b in rnd] for rnd in first_half]


def _make_teams(cfg: SynthConfig, rng: np.random.Generator):
    teams, draws = [], []
    width = len(str(cfg.n_teams))
    for i in range(cfg.n_teams):
        tid = f"T{i + 1:0{width}d}"
        lat = float(np.round(rng.uniform(43.0, 50.5), 4))
        lon = float(np.round(rng.uniform(-1.5, 7.5), 4))
        attack = float(rng.normal(0.0, cfg.strength_spread))
        defense = float(rng.normal(0.0, cfg.strength_spread * cfg.defense_spread_ratio))
        nu = float(rng.uniform(*cfg.noise_nu_range))
        teams.append(TeamRecord(tid, f"Club {i + 1}", cfg.country, lat, lon))
        draws.append((tid, attack, defense, nu))
    # sum-to-zero effects keep the league scoring level at base_mean_goals
    # whatever the draw, instead of drifting with the sample mean of the effects
    mean_att = math.fsum(d[1] for d in draws) / len(draws)
    mean_def = math.fsum(d[2] for d in draws) / len(draws)
    latent = {tid: LatentTeam(tid, a - mean_att, d - mean_def, nu) for tid, a, d, nu in draws}
    return teams, latent


def _squad_positions(cfg: SynthConfig, rng: np.random.Generator) -> list[str]:
    n_gk = int(rng.integers(2, 4))
    n_pivot = int(rng.integers(2, 4))
    n_wing = 4
    n_back = cfg.squad_size - n_gk - n_pivot - n_wing
    return ["Goalkeeper"] * n_gk + ["Wing"] * n_wing + ["Back"] * n_back + ["Pivot"] * n_pivot


def _make_players(cfg: SynthConfig, teams, latent, rng: np.random.Generator):
    players = []
    for s in range(cfg.n_seasons):
        year = cfg.start_year + s
        label = season_label(year)
        season_start = date(year, 9, 1)
        for team in teams:
            quality = latent[team.team_id].attack + latent[team.team_id].defense
            p_int = min(0.9, max(0.02, cfg.international_base + cfg.international_slope * quality))
            for k, pos in enumerate(_squad_positions(cfg, rng)):
                mu, sd = _PHYSIQUE[pos]
                height = float(np.clip(np.round(rng.normal(mu, sd), 1), 150.0, 205.0))
                weight = float(np.clip(np.round(0.9 * height - 90.0 + rng.normal(0.0, 5.0), 1), 50.0, 110.0))
                age_days = int(rng.integers(18 * 365, 35 * 365))
                local = rng.random() < 0.6
                nationality = cfg.country if local else _FOREIGN[int(rng.integers(len(_FOREIGN)))]
                players.append(
                    PlayerRecord(
                        player_id=f"{team.team_id}-{year}-{k + 1:02d}",
                        team_id=team.team_id,
                        season=label,
                        position=pos,
                        height_cm=height,
                        weight_kg=weight,
                        birth_date=season_start - timedelta(days=age_days),
                        nationality=nationality,
                        is_international=bool(rng.random() < p_int),
                    )
                )
    return players


def _goals(mean: float, nu: float, rng: np.random.Generator) -> int:
    params = CmpParams.from_log(nu * math.log(mean), nu)
    return int(sample(params, 1, rng)[0])


def _make_matches(cfg: SynthConfig, teams, latent, rng: np.random.Generator):
    schedule = round_robin(cfg.n_teams)
    rounds = [schedule[r % len(schedule)] for r in range(cfg.rounds)]
    log_base = math.log(cfg.base_mean_goals)
    matches = []
    for s in range(cfg.n_seasons):
        year = cfg.start_year + s
        first, last = date(year, 9, 1), date(year + 1, 6, 15)
        span = (last - first).days
        n_rounds = len(rounds)
        days = [first + timedelta(days=round(r * span / max(n_rounds - 1, 1))) for r in range(n_rounds)]
        final = days[-1]
        for r, pairs in enumerate(rounds):
            for g, (h, a) in enumerate(pairs):
                home, away = teams[h], teams[a]
                lh, la = latent[home.team_id], latent[away.team_id]
                hour = _KICKOFF_HOURS[int(rng.integers(len(_KICKOFF_HOURS)))]
                kickoff = datetime(days[r].year, days[r].month, days[r].day, hour, 0, tzinfo=timezone.utc)
                mean_home = math.exp(log_base + lh.attack - la.defense + cfg.home_advantage)
                mean_away = math.exp(log_base + la.attack - lh.defense)
                matches.append(
                    MatchRecord(
                        match_id=f"M{year}-{r + 1:03d}-{g + 1:02d}",
                        start_time=kickoff,
                        competition_id=f"LEAGUE-{year}",
                        importance=cfg.importance,
                        season_final_date=final,
                        home_team_id=home.team_id,
                        away_team_id=away.team_id,
                        home_goals=_goals(mean_home, lh.nu, rng),
                        away_goals=_goals(mean_away, la.nu, rng),
                        venue_lat=home.home_lat,
                        venue_lon=home.home_lon,
                    )
                )
    return matches


def generate_synthetic(config: SynthConfig = SynthConfig()) -> SyntheticLeague:
    rng = np.random.default_rng(config.seed)
    teams, latent = _make_teams(config, rng)
    players = _make_players(config, teams, latent, rng)
    matches = _make_matches(config, teams, latent, rng)
    return SyntheticLeague(matches, teams, players, latent)
