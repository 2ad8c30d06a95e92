import json
import pytest

from v2xrb import cli
from v2xrb.config import DEFAULTS, load_config, parse_assignment
from v2xrb.errors import ConfigError, ContractViolation
from v2xrb.output import read_csv

SMALL = ["heatmap.horizon_rounds=3000", "converge.horizon_rounds=200", "tau.trials=500",
         "tau.n_cs=[0,5,10,15]", "bandit.horizon_rounds=15", "curves.n_points=41"]


def run(tmp_path, experiment, *extra, name="out"):
    out = tmp_path / name
    args = [experiment, "--out", str(out)]
    for s in SMALL:
        args += ["--set", s]
    code = cli.main(args + list(extra))
    return code, out


class TestConfig:
    def test_defaults_follow_table_2(self):
        cfg = load_config()
        ep = cfg.episode_config()
        assert ep.bandit_d.n_arm == 100
        assert ep.mac.cw == 15
        assert ep.risk.v_ref_kmh == pytest.approx(96.56064)
        assert ep.bandit_d.train_rounds == ep.horizon // 10
        assert cfg.section("heatmap")["horizon_rounds"] == 100_000

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"bandit": {"n_arms": 10}, "colour": 1}))
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert "bandit.n_arms" in exc.value.fields and "colour" in exc.value.fields

    def test_type_errors_listed(self):
        with pytest.raises(ConfigError) as exc:
            load_config(sets=["mac.cw=fifteen", "bandit.epsilon=true"])
        assert set(exc.value.fields) == {"mac.cw", "bandit.epsilon"}

    def test_module_invariants_revalidated(self):
        with pytest.raises(ConfigError, match="epsilon"):
            load_config(sets=["bandit.epsilon=1.5"])
        with pytest.raises(ConfigError, match="slots_per_interval"):
            load_config(sets=["mac.slots_per_interval=4"])

    def test_precedence(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 5, "mac": {"cw": 31, "tx_duration_slots": 4}}))
        cfg = load_config(path, sets=["mac.cw=63"], seed=9)
        assert cfg.seed == 9
        assert cfg.section("mac") == {"cw": 63, "slots_per_interval": 64, "tx_duration_slots": 4}

    def test_roundtrip_idempotent(self, tmp_path):
        cfg = load_config(sets=["risk.k_d=7", "bandit.cd_range=[0, 3]"])
        p1 = tmp_path / "a.json"
        p1.write_text(cfg.to_json())
        again = load_config(p1)
        assert again.to_json() == cfg.to_json()
        assert again.config_hash() == cfg.config_hash()

    def test_parse_assignment(self):
        assert parse_assignment("a.b=3") == {"a": {"b": 3}}
        assert parse_assignment("env.kind=network") == {"env": {"kind": "network"}}
        with pytest.raises(ConfigError):
            parse_assignment("novalue")

    def test_presets(self):
        cfg = load_config(preset="high_density")
        assert cfg.section("geometry")["density_per_m2"] == 15e-3
        assert DEFAULTS["geometry"]["density_per_m2"] == 1e-4


class TestCLI:
    def test_exit_code_config_error(self, tmp_path, capsys):
        assert cli.main(["tau", "--out", str(tmp_path), "--set", "nope=1"]) == 2
        assert "nope" in capsys.readouterr().err

    def test_exit_code_contract_violation(self, tmp_path, monkeypatch):
        def boom(cfg):
            raise ContractViolation("bad backoff")
        monkeypatch.setitem(cli.COMMANDS, "tau", boom)
        assert cli.main(["tau", "--out", str(tmp_path)]) == 3

    def test_unwritable_output_dir(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert cli.main(["curves", "--out", str(blocker / "sub")]) == 2

    def test_curves(self, tmp_path):
        code, out = run(tmp_path, "curves")
        assert code == 0
        first = (out / "curves.csv").read_text().splitlines()[0]
        assert first.startswith("# v2xrb experiment=curves seed=1 config_sha256=")
        header, rows = read_csv(out / "curves.csv")
        assert header == ["c", "w_v", "w_d"]
        vals = [[float(x) for x in r] for r in rows]
        by_c = {r[0]: r for r in vals}
        assert by_c[1.0][2] == 0.5
        assert by_c[0.0][1] == 0.0
        assert all(b[1] >= a[1] and b[2] < a[2] for a, b in zip(vals, vals[1:]))

    def test_heatmap(self, tmp_path):
        code, out = run(tmp_path, "heatmap")
        assert code == 0
        for eps in ("1", "0.1"):
            header, rows = read_csv(out / f"heatmap_eps{eps}.csv")
            assert header == ["context_bin", "arm", "visits", "reward_sum"]
            assert len(rows) == 21 * 100
            assert sum(int(r[2]) for r in rows) == 3000

    def test_converge(self, tmp_path):
        code, out = run(tmp_path, "converge")
        assert code == 0
        header, rows = read_csv(out / "converge_eps0.1.csv")
        assert header == ["t", "chosen_weight", "optimal_weight", "cum_regret"]
        assert len(rows) == 200
        assert all(float(r[2]) == pytest.approx(0.377541, abs=1e-6) for r in rows)
        assert len({r[2] for r in rows}) == 1
        assert [int(r[0]) for r in rows] == list(range(1, 201))
        assert float(rows[-1][3]) >= 0
        summary = json.loads((out / "converge_summary.json").read_text())
        assert set(summary["strategies"]) == {"1", "0.1"}

    def test_tau(self, tmp_path):
        code, out = run(tmp_path, "tau")
        assert code == 0
        header, rows = read_csv(out / "tau.csv")
        assert header == ["n_cs", "ar_level", "tau"]
        table = {(int(r[0]), float(r[1])): float(r[2]) for r in rows}
        assert table[(0, 2.0)] == 1.0
        for n in (0, 5, 10, 15):
            assert table[(n, 2.0)] >= table[(n, 1.0)] >= table[(n, 0.0)]

    def test_episode(self, tmp_path):
        code, out = run(tmp_path, "episode", "--set", "env.kind=network")
        assert code == 0
        summary = json.loads((out / "episode_summary.json").read_text())
        for key in ("config", "rho_total", "rho_per_round", "tau_table", "arm_histogram"):
            assert key in summary
        assert summary["config"]["env"]["kind"] == "network"
        header, rows = read_csv(out / "episode_log.csv")
        assert len(rows) == 15 * summary["n_vehicles"]

    def test_effective_config_written(self, tmp_path):
        code, out = run(tmp_path, "curves")
        saved = load_config(out / "config.json")
        assert saved.config_hash() == load_config(sets=SMALL + [f"output_dir={out}"],
                                                  experiment="curves").config_hash()

    @pytest.mark.parametrize("experiment", ["curves", "heatmap", "converge", "tau", "episode"])
    def test_byte_identical_reruns(self, tmp_path, experiment):
        _, a = run(tmp_path, experiment, name="a")
        first = {p.name: p.read_bytes() for p in a.iterdir()}
        _, a = run(tmp_path, experiment, name="a")
        assert {p.name: p.read_bytes() for p in a.iterdir()} == first
        assert any(name.endswith(".csv") for name in first)

    def test_svg_is_pure_function_of_csv(self, tmp_path):
        code, out = run(tmp_path, "tau", "--svg")
        assert code == 0
        svg = (out / "tau.svg").read_bytes()
        from v2xrb import plot
        copy = tmp_path / "copy.csv"
        copy.write_bytes((out / "tau.csv").read_bytes())
        plot.render_tau(copy, tmp_path / "again.svg")
        assert (tmp_path / "again.svg").read_bytes() == svg

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        code, out = run(tmp_path, "curves")
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == ["config.json", "curves.csv"]
