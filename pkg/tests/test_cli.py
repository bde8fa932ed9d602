import json
import subprocess
import sys

import numpy as np

from compactqn.cli import main
from compactqn.problems import write_tensor


def run_cli(*argv):
    return main(list(argv))


class TestVerifyCommand:
    def test_greenstadt_reference_run(self, tmp_path):
        out = tmp_path / "v.csv"
        code = run_cli("verify", "--mode", "greenstadt", "--d", "8",
                       "--k_max", "8", "--out", str(out))
        assert code == 0
        lines = out.read_text(encoding="utf-8").split("\n")
        assert lines[0] == "k,error1,error2"
        assert len([l for l in lines if l]) == 9
        for line in lines[1:9]:
            k, e1, e2 = line.split(",")
            assert float(e1) <= 1e-12 and float(e2) <= 1e-12

    def test_k_max_zero_empty_body(self, tmp_path):
        out = tmp_path / "v.csv"
        assert run_cli("verify", "--k_max", "0", "--out", str(out)) == 0
        assert out.read_text(encoding="utf-8") == "k,error1,error2\n"

    def test_all_modes_exit_zero(self, tmp_path):
        for mode in ("general-s", "general-y", "general-rand", "bfgs", "psb"):
            out = tmp_path / f"{mode}.csv"
            assert run_cli("verify", "--mode", mode, "--d", "10", "--k_max", "6",
                           "--out", str(out)) == 0

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert run_cli("verify", "--mode", "general-rand", "--d", "8",
                           "--k_max", "6", "--seed", "42", "--out", str(path)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_usage_errors(self, tmp_path):
        assert run_cli("verify", "--d", "5000", "--out", str(tmp_path / "x.csv")) == 1
        assert run_cli("verify", "--mode", "nonsense") == 1

    def test_lf_line_endings(self, tmp_path):
        out = tmp_path / "v.csv"
        run_cli("verify", "--k_max", "2", "--out", str(out))
        assert b"\r" not in out.read_bytes()

    def test_plot_written(self, tmp_path):
        out = tmp_path / "v.csv"
        assert run_cli("verify", "--k_max", "3", "--out", str(out), "--plot") == 0
        assert (tmp_path / "v.png").exists()


class TestConfigFile:
    def test_config_provides_defaults_flags_override(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"mode": "psb", "d": 12, "k_max": 4}))
        out = tmp_path / "v.csv"
        code = run_cli("verify", "--config", str(cfg), "--k_max", "2",
                       "--out", str(out))
        assert code == 0
        lines = [l for l in out.read_text().split("\n") if l]
        assert len(lines) == 3  # header + k_max=2 from the explicit flag

    def test_unknown_keys_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert run_cli("verify", "--config", str(cfg)) == 1

    def test_malformed_config(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text("{not json")
        assert run_cli("verify", "--config", str(cfg)) == 1


class TestEigBench:
    def test_small_run_schema(self, tmp_path):
        out = tmp_path / "e.csv"
        code = run_cli("eig-bench", "--d-list", "8,16", "--iters", "5",
                       "--repeats", "1", "--out", str(out))
        assert code == 0
        lines = [l for l in out.read_text().split("\n") if l]
        assert lines[0] == "d,t_dense_s,t_implicit_s,err"
        assert len(lines) == 3
        for line in lines[1:]:
            d, td, ti, err = line.split(",")
            assert float(err) <= 1e-12

    def test_iters_zero_spectrum_exact(self, tmp_path):
        out = tmp_path / "e.csv"
        assert run_cli("eig-bench", "--d-list", "16", "--iters", "0",
                       "--repeats", "1", "--out", str(out)) == 0
        row = [l for l in out.read_text().split("\n") if l][1]
        err = float(row.split(",")[3])
        assert err <= 1e-14

    def test_dense_leg_capped(self, tmp_path):
        out = tmp_path / "e.csv"
        assert run_cli("eig-bench", "--d-list", "8,16", "--iters", "2",
                       "--repeats", "1", "--dense-cap", "8",
                       "--out", str(out)) == 0
        rows = [l.split(",") for l in out.read_text().split("\n") if l][1:]
        assert rows[0][1] != "nan"
        assert rows[1][1] == "nan" and rows[1][3] == "nan"

    def test_non_timing_columns_deterministic(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            run_cli("eig-bench", "--d-list", "8,16", "--iters", "3",
                    "--repeats", "1", "--seed", "5", "--out", str(out))
            rows = [l.split(",") for l in out.read_text().split("\n") if l]
            outs.append([(r[0], r[3]) for r in rows])
        assert outs[0] == outs[1]

    def test_odd_dimension_usage_error(self):
        assert run_cli("eig-bench", "--d-list", "7") == 1


class TestMinimize:
    def test_linesearch_converges(self, tmp_path):
        out = tmp_path / "m.csv"
        code = run_cli("minimize", "--problem", "rosenbrock", "--d", "128",
                       "--strategy", "linesearch", "--out", str(out))
        assert code == 0
        lines = [l for l in out.read_text().split("\n") if l]
        assert lines[0] == "k,f,gnorm,step,accepted"
        assert float(lines[-1].split(",")[2]) <= 1e-5

    def test_trustregion_converges(self, tmp_path):
        out = tmp_path / "m.csv"
        assert run_cli("minimize", "--problem", "rosenbrock", "--d", "128",
                       "--strategy", "trustregion", "--out", str(out)) == 0

    def test_bad_problem_name(self, tmp_path):
        assert run_cli("minimize", "--problem", "sphere",
                       "--out", str(tmp_path / "m.csv")) == 1

    def test_nonconvergence_exit_code(self, tmp_path):
        out = tmp_path / "m.csv"
        code = run_cli("minimize", "--problem", "rosenbrock", "--d", "64",
                       "--max-iter", "2", "--out", str(out))
        assert code == 3

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run_cli("minimize", "--d", "32", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()


class TestTensor:
    def test_small_sweep(self, tmp_path):
        out = tmp_path / "t.csv"
        code = run_cli("tensor", "--dims", "6,6,6", "--rank", "2",
                       "--n-instances", "4", "--out", str(out))
        assert code == 0
        lines = [l for l in out.read_text().split("\n") if l]
        assert lines[0] == "instance,f_final,rel_err,f_evals,converged"
        assert len(lines) == 5

    def test_rank_zero_rejected(self, tmp_path):
        assert run_cli("tensor", "--rank", "0", "--out", str(tmp_path / "t.csv")) == 1

    def test_oversized_rejected(self, tmp_path):
        assert run_cli("tensor", "--dims", "101,101,101",
                       "--out", str(tmp_path / "t.csv")) == 1

    def test_reproducible_row(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run_cli("tensor", "--dims", "5,5,5", "--n-instances", "1",
                    "--seed", "3", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()

    def test_jobs_matches_serial(self, tmp_path):
        serial, parallel = tmp_path / "s.csv", tmp_path / "p.csv"
        run_cli("tensor", "--dims", "5,5,5", "--n-instances", "4",
                "--seed", "2", "--out", str(serial))
        run_cli("tensor", "--dims", "5,5,5", "--n-instances", "4",
                "--seed", "2", "--jobs", "2", "--out", str(parallel))
        assert serial.read_bytes() == parallel.read_bytes()

    def test_tensor_file_input(self, tmp_path, rng):
        model_rng = np.random.default_rng(11)
        a = model_rng.standard_normal((5, 2))
        b = model_rng.standard_normal((4, 2))
        c = model_rng.standard_normal((3, 2))
        data = np.einsum("ir,jr,kr->ijk", a, b, c)
        tfile = tmp_path / "data.cpt"
        write_tensor(tfile, data)
        out = tmp_path / "t.csv"
        code = run_cli("tensor", "--dims", "5,4,3", "--rank", "2",
                       "--tensor-file", str(tfile), "--out", str(out))
        assert code == 0
        lines = [l for l in out.read_text().split("\n") if l]
        assert len(lines) == 2
        rel_err = float(lines[1].split(",")[2])
        assert rel_err <= 1e-4


class TestLogistic:
    def test_alpha_zero_exits_nonzero(self, tmp_path):
        out = tmp_path / "l.csv"
        code = run_cli("logistic", "--n", "600", "--p", "8", "--n-classes", "3",
                       "--epochs", "2", "--alpha", "0", "--out", str(out))
        assert code == 3
        lines = [l for l in out.read_text().split("\n") if l]
        assert lines[0] == "epoch,train_loss,holdout_acc"
        losses = {line.split(",")[1] for line in lines[1:]}
        assert len(losses) == 1

    def test_compact_y_decreasing(self, tmp_path):
        out = tmp_path / "l.csv"
        code = run_cli("logistic", "--n", "1200", "--p", "16", "--n-classes", "4",
                       "--epochs", "3", "--mode", "compact-y", "--out", str(out))
        assert code == 0
        rows = [l.split(",") for l in out.read_text().split("\n") if l][1:]
        assert float(rows[-1][1]) < float(rows[0][1])

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run_cli("logistic", "--n", "600", "--p", "8", "--n-classes", "3",
                    "--epochs", "2", "--seed", "7", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()

    def test_bad_mode(self, tmp_path):
        assert run_cli("logistic", "--mode", "adam",
                       "--out", str(tmp_path / "l.csv")) == 1


class TestEntryPoint:
    def test_usage_without_command(self):
        assert run_cli() == 1

    def test_console_script(self, tmp_path):
        out = tmp_path / "v.csv"
        proc = subprocess.run([sys.executable, "-m", "compactqn.cli", "verify",
                               "--k_max", "2", "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert out.exists()


class TestLogisticDefaults:
    def test_default_run_decreases(self, tmp_path):
        out = tmp_path / "l.csv"
        code = run_cli("logistic", "--out", str(out))
        assert code == 0
        rows = [l.split(",") for l in out.read_text().split("\n") if l][1:]
        assert len(rows) == 10
        assert float(rows[-1][1]) < float(rows[0][1])

    def test_three_mode_summary(self, tmp_path, capsys):
        final = {}
        for mode in ("sgd", "compact-s", "compact-y"):
            rows = []
            for seed in range(3):
                out = tmp_path / f"{mode}{seed}.csv"
                run_cli("logistic", "--n", "3072", "--p", "32", "--n-classes", "5",
                        "--epochs", "4", "--mode", mode, "--seed", str(seed),
                        "--out", str(out))
                last = [l for l in out.read_text().split("\n") if l][-1].split(",")
                rows.append((float(last[1]), float(last[2])))
            final[mode] = rows
        print("mode       " + "  ".join(f"seed{i}(loss/acc)" for i in range(3)))
        for mode, rows in final.items():
            print(f"{mode:<10} " + "  ".join(f"{l:.4f}/{a:.3f}" for l, a in rows))
        for rows in final.values():
            assert all(np.isfinite(l) and 0.0 <= a <= 1.0 for l, a in rows)


class TestPlotRendering:
    def test_every_command_renders_a_figure(self, tmp_path):
        runs = [
            ["verify", "--k_max", "2"],
            ["eig-bench", "--d-list", "8", "--iters", "2", "--repeats", "1"],
            ["minimize", "--d", "16"],
            ["tensor", "--dims", "4,4,4", "--n-instances", "2"],
            ["logistic", "--n", "600", "--p", "8", "--n-classes", "3",
             "--epochs", "2"],
        ]
        for argv in runs:
            out = tmp_path / f"{argv[0]}.csv"
            code = run_cli(*argv, "--out", str(out), "--plot")
            assert code in (0, 3)
            png = out.with_suffix(".png")
            assert png.exists() and png.stat().st_size > 0


class TestToleranceBreach:
    def test_exit_code_two_on_breach(self, tmp_path, monkeypatch):
        import compactqn.cli as cli
        monkeypatch.setattr(cli, "error_rows",
                            lambda mode, d, k_max, seed: [(1, 1e-3, 1e-3)])
        out = tmp_path / "v.csv"
        assert run_cli("verify", "--k_max", "1", "--out", str(out)) == 2
        assert out.exists()  # the CSV is still written before the verdict
