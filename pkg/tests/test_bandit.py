import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from v2xrb import bandit as bd
from v2xrb.errors import ContractViolation, ParameterError


def params(**kw):
    base = dict(n_arm=100, epsilon=0.1, horizon_rounds=1000)
    base.update(kw)
    return bd.BanditParams(**base)


def test_default_training_length():
    assert params(horizon_rounds=1000).train_rounds == 100
    assert params(horizon_rounds=50).train_rounds == 5


def test_param_validation_lists_fields():
    with pytest.raises(ParameterError) as exc:
        bd.BanditParams(n_arm=1, epsilon=2.0)
    assert set(exc.value.fields) == {"n_arm", "epsilon"}


def test_arm_weight():
    assert bd.arm_weight(1, 100) == 0.0
    assert bd.arm_weight(100, 100) == 1.0
    assert bd.arm_weight(50, 100) == pytest.approx(49 / 99)
    with pytest.raises(ContractViolation):
        bd.arm_weight(0, 100)
    with pytest.raises(ContractViolation):
        bd.arm_weight(101, 100)


def test_bin_context():
    assert bd.bin_context(0.0, (0.0, 2.0), 21) == 0
    assert bd.bin_context(2.0, (0.0, 2.0), 21) == 20
    assert bd.bin_context(1.1, (0.0, 2.0), 21) == 11
    assert bd.bin_context(-5.0, (0.0, 2.0), 21) == 0
    assert bd.bin_context(9.0, (0.0, 2.0), 21) == 20


@given(st.floats(-10, 10), st.integers(1, 50))
def test_bin_context_in_range(c, n):
    assert 0 <= bd.bin_context(c, (-1.0, 3.0), n) <= n - 1


def uniformity_rejections(p, first_round, n_draws=20_000, seeds=range(20)):
    """Chi-square rejections at alpha = 0.01 across independent seeds."""
    table = bd.ArmTable(1, 100)
    bd.update(table, 0, 38, 1)
    rejected = 0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        arms = [bd.select_arm(t, 0, table, p, rng)
                for t in range(first_round, first_round + n_draws)]
        counts = np.bincount(arms, minlength=p.n_arm + 1)[1:]
        rejected += stats.chisquare(counts).pvalue < 0.01
    return rejected


# With 20 seeds, P(>= 3 rejections | uniform) is about 1e-3.
def test_training_is_uniform_regardless_of_epsilon():
    p = params(epsilon=0.0, horizon_rounds=100_000, train_rounds=50_000)
    assert uniformity_rejections(p, first_round=1) <= 2


def test_ab_testing_uniform_after_training():
    p = params(epsilon=1.0, horizon_rounds=100_000, train_rounds=1)
    assert uniformity_rejections(p, first_round=2) <= 2


def dominated_table():
    table = bd.ArmTable(2, 100)
    for arm in range(1, 101):
        for r in ([1] * 5 + [0] * 5):
            bd.update(table, 1, arm, r)
    for _ in range(40):
        bd.update(table, 1, 38, 1)
    return table


def test_exploit_picks_dominant_arm():
    table = dominated_table()
    assert table.mean(1)[37] > 0.9 - 1e-9
    p = params(epsilon=0.0, horizon_rounds=10, train_rounds=1)
    rng = np.random.default_rng(0)
    assert all(bd.select_arm(t, 1, table, p, rng) == 38 for t in range(2, 11))


def test_exploit_is_pure_given_table():
    table = dominated_table()
    p = params(epsilon=0.0, horizon_rounds=10, train_rounds=1)
    picks = {bd.select_arm(5, 1, table, p, np.random.default_rng(s)) for s in range(20)}
    assert picks == {38}


def test_exploit_ties_go_to_lowest_arm():
    table = bd.ArmTable(1, 10)
    for arm in (7, 3, 9):
        bd.update(table, 0, arm, 1)
    assert bd.exploit_arm(0, table) == 3


def test_exploit_unvisited_bin_falls_back_to_random():
    table = bd.ArmTable(3, 100)
    assert bd.exploit_arm(2, table) is None
    p = params(epsilon=0.0, horizon_rounds=10, train_rounds=1)
    picks = {bd.select_arm(5, 2, table, p, np.random.default_rng(s)) for s in range(30)}
    assert len(picks) > 1


def test_literal_policy_takes_largest_tried_weight():
    table = bd.ArmTable(1, 100)
    bd.update(table, 0, 20, 1)
    bd.update(table, 0, 61, 0)
    bd.update(table, 0, 5, 1)
    assert bd.exploit_arm(0, table, "literal") == 61
    assert bd.exploit_arm(0, table, "argmax") == 5


def test_update_arithmetic():
    table = bd.ArmTable(1, 5)
    bd.update(table, 0, 2, 1)
    assert table.mean(0)[1] == 1.0
    t2 = bd.ArmTable(1, 5)
    for r in (1, 0, 1, 0):
        bd.update(t2, 0, 4, r)
    bd.update(t2, 0, 4, 0)
    assert t2.mean(0)[3] == pytest.approx(0.4)
    assert np.isnan(t2.mean(0)[0])
    with pytest.raises(ContractViolation):
        bd.update(t2, 0, 4, 2)


def test_bins_do_not_cross_contaminate():
    rng = np.random.default_rng(9)
    joint = bd.ArmTable(2, 10)
    solo = [bd.ArmTable(1, 10), bd.ArmTable(1, 10)]
    for _ in range(2000):
        b, a, r = int(rng.integers(2)), int(rng.integers(1, 11)), int(rng.integers(2))
        bd.update(joint, b, a, r)
        bd.update(solo[b], 0, a, r)
    for b in range(2):
        assert np.array_equal(joint.pulls[b], solo[b].pulls[0])
        assert np.array_equal(joint.reward_sum[b], solo[b].reward_sum[0])


def test_table_csv_roundtrip():
    rng = np.random.default_rng(2)
    table = bd.ArmTable(3, 7)
    for _ in range(300):
        bd.update(table, int(rng.integers(3)), int(rng.integers(1, 8)), int(rng.integers(2)))
    text = table.to_csv()
    assert text.splitlines()[0] == "bin,arm,pulls,reward_sum"
    back = bd.ArmTable.from_csv(text, 3, 7)
    assert back == table
    assert bd.exploit_arm(1, back) == bd.exploit_arm(1, table)


def test_regret_ledger():
    ledger = bd.RegretLedger()
    for _ in range(10):
        bd.record_regret(ledger, 1, 1)
    assert ledger.rho == 0
    ledger = bd.RegretLedger()
    for _ in range(10):
        bd.record_regret(ledger, 0.9, 0)
    assert ledger.rho == pytest.approx(9.0)
    assert ledger.rho_per_round == pytest.approx(0.9)
    assert ledger.curve()[-1] == ledger.rho
    with pytest.raises(ContractViolation):
        bd.record_regret(ledger, 1.5, 0)


def run_oracle_bandit(seed, k_star=38, horizon=20_000, eps=0.1):
    p = params(epsilon=eps, horizon_rounds=horizon)
    rng = np.random.default_rng(seed)
    env = np.random.default_rng(seed + 1000)
    table = bd.ArmTable(1, 100)
    ledger = bd.RegretLedger()
    exploit_choices = []
    for t in range(1, horizon + 1):
        phase = bd.draw_phase(t, p, rng)
        arm = bd.pick_arm(phase, 0, table, p, rng)
        prob = 0.9 if arm == k_star else 0.1
        reward = int(env.random() < prob)
        bd.update(table, 0, arm, reward)
        bd.record_regret(ledger, 0.9, prob)
        if t > horizon - 1000 and phase == bd.EXPLOIT:
            exploit_choices.append(arm)
    return exploit_choices, ledger


def test_concentration_on_best_arm():
    for seed in range(3):
        choices, _ = run_oracle_bandit(seed)
        assert np.mean(np.array(choices) == 38) >= 0.95


def test_expected_regret_nonnegative():
    rhos = [run_oracle_bandit(seed, horizon=3000)[1].rho for seed in range(20)]
    assert np.mean(rhos) >= 0
