import math
from datetime import date, timedelta

import numpy as np
import pytest

from handsel.cmp import CmpParams, fit_mle, sample
from handsel.errors import InsufficientHistoryError, StrengthDomainError
from handsel.strength import (
    StrengthProvider,
    attack_strength,
    defense_strength,
    history_window,
    season_label,
    season_of,
    strengths_asof,
)
from conftest import history, match

# independent optimum (scipy Nelder-Mead on a direct logsumexp likelihood)
ORACLE_SCORED = {"log_lik": -7.185243003709729, "s_attack": 3.4302563996926754}
ORACLE_CONCEDED = {"log_lik": -5.63657090389097, "s_defense": 0.3095564314754593}

SCORED = [30, 31, 29, 32, 30]
CONCEDED = [25, 24, 26, 25, 24]


class TestFunctionals:
    def test_unit_case(self):
        assert attack_strength(CmpParams(math.e, 1.0)) == pytest.approx(1.0, abs=1e-15)
        assert defense_strength(CmpParams(math.e, 1.0)) == pytest.approx(1.0, abs=1e-15)

    def test_handball_legend_values(self):
        assert attack_strength(CmpParams(286.46, 1.64)) == pytest.approx(3.4498, abs=1e-4)
        assert attack_strength(CmpParams(286.46, 1.64)) == pytest.approx(3.4497554331412921, rel=1e-14)

    def test_defense_hand_value(self):
        assert defense_strength(CmpParams(20.0, 2.0)) == pytest.approx(2 / math.log(20), rel=1e-15)
        assert defense_strength(CmpParams(20.0, 2.0)) == pytest.approx(0.667616, abs=1e-6)

    @pytest.mark.parametrize("fn", [attack_strength, defense_strength])
    def test_domain(self, fn):
        with pytest.raises(StrengthDomainError):
            fn(CmpParams(1.0, 2.0))
        with pytest.raises(StrengthDomainError):
            fn(CmpParams(0.9, 0.0))
        with pytest.raises(StrengthDomainError):
            fn(CmpParams(5.0, 0.0))

    def test_monotonicity_grid(self):
        lams = [1.5, 3.0, 20.0, 100.0, 286.46, 1000.0]
        nus = [0.3, 0.8, 1.0, 1.64, 3.0, 10.0]
        for nu in nus:
            a = [attack_strength(CmpParams(l, nu)) for l in lams]
            d = [defense_strength(CmpParams(l, nu)) for l in lams]
            assert all(x < y for x, y in zip(a, a[1:]))
            assert all(x > y for x, y in zip(d, d[1:]))
        for lam in lams:
            a = [attack_strength(CmpParams(lam, n)) for n in nus]
            d = [defense_strength(CmpParams(lam, n)) for n in nus]
            assert all(x > y for x, y in zip(a, a[1:]))
            assert all(x < y for x, y in zip(d, d[1:]))


class TestSeasons:
    def test_turnover_on_july_first(self):
        assert season_of(date(2022, 6, 30)) == 2021
        assert season_of(date(2022, 7, 1)) == 2022
        assert season_label(2021) == "2021/2022"


class TestAsOf:
    start = date(2022, 9, 1)

    def matches(self):
        return history("A", "B", self.start, SCORED, CONCEDED)

    def test_end_to_end_against_oracle(self):
        s = strengths_asof(self.matches(), "A", date(2022, 12, 1))
        assert s.window == "season" and s.n_matches == 5
        assert math.isfinite(s.s_attack) and math.isfinite(s.s_defense)
        assert s.s_attack > 0 and s.s_defense > 0
        assert s.s_attack == pytest.approx(ORACLE_SCORED["s_attack"], rel=1e-4)
        assert s.s_defense == pytest.approx(ORACLE_CONCEDED["s_defense"], rel=1e-4)
        assert fit_mle(SCORED).log_likelihood == pytest.approx(ORACLE_SCORED["log_lik"], abs=1e-8)
        assert fit_mle(CONCEDED).log_likelihood == pytest.approx(ORACLE_CONCEDED["log_lik"], abs=1e-8)
        assert s.check_consistency()

    def test_first_day_of_season(self):
        with pytest.raises(InsufficientHistoryError):
            strengths_asof(self.matches(), "A", self.start)

    def test_only_future_matches(self):
        with pytest.raises(InsufficientHistoryError):
            strengths_asof(self.matches(), "A", self.start - timedelta(days=1))

    def test_match_on_as_of_date_excluded(self):
        ms = self.matches()
        last = ms[-1].day
        with pytest.raises(InsufficientHistoryError):
            strengths_asof(ms, "A", last)
        assert strengths_asof(ms, "A", last + timedelta(days=1)).n_matches == 5

    def test_later_matches_do_not_change_result(self):
        ms = self.matches()
        as_of = date(2022, 12, 1)
        base = strengths_asof(ms, "A", as_of)
        extra = ms + history("A", "C", as_of, [40, 10, 35], [12, 38, 20], prefix="X")
        assert strengths_asof(extra, "A", as_of) == base

    def test_unscored_fixtures_ignored(self):
        ms = self.matches() + [match("F1", date(2022, 10, 30), "A", "B")]
        assert strengths_asof(ms, "A", date(2022, 12, 1)) == strengths_asof(self.matches(), "A", date(2022, 12, 1))

    def test_window_extends_into_previous_season(self):
        prev = history("A", "B", date(2022, 3, 1), [28, 27, 33, 30], [22, 29, 25, 26], prefix="P")
        cur = history("A", "B", date(2022, 9, 1), [31, 26], [24, 27], prefix="C")
        window, kind = history_window(sorted(prev + cur, key=lambda m: m.start_time), date(2022, 10, 1))
        assert kind == "extended"
        assert [m.match_id for m in window] == ["P001", "P002", "P003", "C000", "C001"]

    def test_two_seasons_back_not_used(self):
        old = history("A", "B", date(2021, 3, 1), [28, 27, 33, 30, 29], [22, 29, 25, 26, 23], prefix="O")
        with pytest.raises(InsufficientHistoryError):
            strengths_asof(old, "A", date(2022, 10, 1))

    def test_shifted_scores_raise_attack(self):
        rng = np.random.default_rng(4)
        scored = sample(CmpParams(200.0, 1.5), 12, rng).tolist()
        conceded = sample(CmpParams(150.0, 1.5), 12, rng).tolist()
        as_of = date(2023, 3, 1)
        low = strengths_asof(history("A", "B", self.start, scored, conceded), "A", as_of)
        high = strengths_asof(history("A", "B", self.start, [s + 5 for s in scored], conceded), "A", as_of)
        assert high.s_attack > low.s_attack

    def test_lambda_guard(self):
        ms = history("A", "B", self.start, [0, 1, 0, 2, 0], [20, 22, 21, 25, 19])
        with pytest.raises(StrengthDomainError):
            strengths_asof(ms, "A", date(2022, 12, 1))


class TestProvider:
    def test_matches_uncached_path(self, small_league):
        ms = small_league.matches
        provider = StrengthProvider(ms)
        days = sorted({m.day for m in ms})
        for day in days[10::15]:
            for t in ("T1", "T4"):
                try:
                    want = strengths_asof(ms, t, day)
                except InsufficientHistoryError:
                    continue
                assert provider.exact(t, day) == want

    def test_query_order_independent(self, small_league):
        ms = small_league.matches
        days = sorted({m.day for m in ms})[8::9]
        a, b = StrengthProvider(ms), StrengthProvider(ms)
        fwd = {(t, d): a.get(t, d) for d in days for t in ("T1", "T2", "T3")}
        rev = {(t, d): b.get(t, d) for d in reversed(days) for t in ("T3", "T2", "T1")}
        assert fwd == rev

    def test_imputation_uses_league_mean(self):
        ms = history("A", "B", date(2022, 9, 1), SCORED, CONCEDED, prefix="A")
        ms += history("C", "D", date(2022, 9, 2), [27, 33, 29, 31, 28], [26, 22, 30, 27, 25], prefix="C")
        as_of = date(2022, 12, 1)
        provider = StrengthProvider(ms)
        known = [provider.exact(t, as_of) for t in ("A", "B", "C", "D")]
        newcomer = provider.get("Z", as_of)
        assert newcomer.imputed and newcomer.n_matches == 0
        assert newcomer.s_attack == pytest.approx(math.fsum(k.s_attack for k in known) / 4, rel=1e-15)
        assert newcomer.s_defense == pytest.approx(math.fsum(k.s_defense for k in known) / 4, rel=1e-15)

    def test_nothing_to_impute_from(self):
        provider = StrengthProvider(history("A", "B", date(2022, 9, 1), SCORED, CONCEDED))
        with pytest.raises(InsufficientHistoryError):
            provider.get("A", date(2022, 9, 1))

    def test_consistency_of_every_record(self, small_league):
        provider = StrengthProvider(small_league.matches)
        for m in small_league.matches[::7]:
            for t in (m.home_team_id, m.away_team_id):
                try:
                    s = provider.get(t, m.day)
                except InsufficientHistoryError:
                    continue
                assert s.check_consistency()
                if not s.imputed:
                    assert s.n_matches >= 5
