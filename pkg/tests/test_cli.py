import numpy as np
import pytest

from becotto.checkpoint import CheckpointMeta, load_checkpoint, save_checkpoint
from becotto.cli import LOCK_NAME, main
from becotto.engine import CycleRecord
from becotto.spectral import make_grid
from becotto.tables import read_table, write_records

from conftest import random_field

TINY = ["-s", "N=16", "-s", "tau_ec=0.2", "-s", "min_steps=200", "-s", "max_steps=400",
        "-s", "stationarity_window=20", "-s", "stationarity_stride=5", "-s", "initial_relax_steps=300",
        "-s", "t_lambda=3e-4", "-s", "n_mc=2000"]


@pytest.fixture
def state16(tmp_path):
    g = make_grid(16)
    path = tmp_path / "in.bin"
    save_checkpoint(random_field(g, 0), CheckpointMeta(N=16, omega=0.337613, mu=0.1), path)
    return path


def test_analyze_energy(tmp_path, state16, capsys):
    out = tmp_path / "run"
    assert main(["analyze", "energy", "-i", str(state16), "-o", str(out)] + TINY) == 0
    header, rows = read_table(out / "energy.csv")
    assert header[:3] == ["t", "omega", "E_total"] and rows.shape == (1, 9)
    assert (out / "config.txt").exists() and (out / "seed.txt").exists()
    assert not (out / LOCK_NAME).exists()


def test_analyze_spectrum_and_pdf(tmp_path, state16):
    out = tmp_path / "run"
    assert main(["analyze", "spectrum", "-i", str(state16), "-o", str(out), "--k-lo", "2", "--k-hi", "5"]
                + TINY) == 0
    assert main(["analyze", "pdf", "-i", str(state16), "-o", str(out / "pdf")] + TINY) == 0
    header, rows = read_table(out / "pdf" / "pdf.csv")
    assert header == ["rho_lo", "rho_hi", "pdf", "count"]


def test_efficiency_stats(tmp_path):
    recs = [CycleRecord(10.0, 8.0 + 0.01 * i, 7.5, 9.0 - 0.01 * i, cycle_id=i) for i in range(4)]
    write_records(tmp_path / "records.csv", recs)
    out = tmp_path / "stats"
    assert main(["analyze", "efficiency-stats", "--records", str(tmp_path / "records.csv"), "-o", str(out)]
                + TINY) == 0
    header, rows = read_table(out / "summary.csv")
    assert rows[0, header.index("n_cycles")] == 4
    assert (out / "efficiency_hist.csv").exists()


def test_exit_code_invalid(tmp_path, capsys):
    assert main(["analyze", "energy", "-o", str(tmp_path), "-s", "alpha=0"]) == 2
    assert "0 < alpha <= 1" in capsys.readouterr().err
    assert main(["analyze", "energy", "-o", str(tmp_path), "-s", "nonsense=1"]) == 2


def test_lock_prevents_concurrent_use(tmp_path, state16, capsys):
    (tmp_path / LOCK_NAME).write_text("123\n")
    assert main(["analyze", "energy", "-i", str(state16), "-o", str(tmp_path)] + TINY) == 2
    assert "locked" in capsys.readouterr().err


def test_bad_checkpoint_is_validation_error(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    assert main(["analyze", "energy", "-i", str(bad), "-o", str(tmp_path / "r")] + TINY) == 2


def test_numerical_abort_exit_code(tmp_path):
    psi = random_field(make_grid(16), 0)
    psi[0, 0, 0] = np.nan
    path = tmp_path / "nan.bin"
    save_checkpoint(psi, CheckpointMeta(N=16), path)
    out = tmp_path / "r"
    assert main(["stroke", "expand", "-i", str(path), "-o", str(out)] + TINY) == 3
    assert (out / "abort.bin").exists()


def test_thermalize_nonstationary_exit_code(tmp_path, state16):
    out = tmp_path / "r"
    code = main(["thermalize", "-i", str(state16), "-o", str(out), "--omega", "h"] + TINY
                + ["-s", "max_steps=10", "-s", "min_steps=10"])
    assert code == 4
    psi, meta = load_checkpoint(out / "state.bin")
    assert meta.omega == 0.337613 and psi.shape == (16, 16, 16)
    header, rows = read_table(out / "trace.csv")
    assert header == ["step", "t", "E_total", "rho_bar", "mu"]


def test_cycle_run_directory_contents(tmp_path):
    out = tmp_path / "cyc"
    code = main(["cycle", "-o", str(out)] + TINY)
    assert code in (0, 4)
    for name in ("initial.bin", "expansion.bin", "cold.bin", "compression.bin", "hot.bin",
                 "records.csv", "cycle00_expansion.csv", "cycle00_cold_trace.csv", "config.txt"):
        assert (out / name).exists(), name
    header, rows = read_table(out / "records.csv")
    assert header == ["cycle_id", "E_e_i", "E_e_f", "E_c_i", "E_c_f", "W_e", "W_c", "W", "Q_h", "eta"]
    W_e, W_c, W = rows[0, 5], rows[0, 6], rows[0, 7]
    assert W == W_e + W_c


def test_stroke_from_checkpoint_reproducible(tmp_path, state16):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["stroke", "compress", "-i", str(state16), "-o", str(a)] + TINY) == 0
    assert main(["stroke", "compress", "-i", str(state16), "-o", str(b)] + TINY) == 0
    assert (a / "end.bin").read_bytes() == (b / "end.bin").read_bytes()


def test_csv_full_precision(tmp_path):
    x = 0.1 + 0.2
    write_records(tmp_path / "r.csv", [CycleRecord(x, x / 3, 1 / 7, np.pi)])
    _, rows = read_table(tmp_path / "r.csv")
    assert rows[0, 1] == x and rows[0, 2] == x / 3 and rows[0, 4] == np.pi


def test_tau_sweep_tables(tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "tau", "--values", "0.2,0.4", "-o", str(out), "-s", "n_cycles=2"] + TINY)
    assert code in (0, 4)
    header, rows = read_table(out / "sweep.csv")
    assert rows[:, header.index("value")].tolist() == [0.2, 0.4]
    assert (rows[:, header.index("n_cycles")] == 2).all()
    for v in ("0.2", "0.4"):
        sub = out / f"tau_{v}"
        assert "tau_ec = " + v in (sub / "config.txt").read_text()
        assert read_table(sub / "records.csv")[1].shape[0] == 2


def test_tlambda_sweep_tables(tmp_path):
    out = tmp_path / "tl"
    code = main(["sweep", "tlambda", "--values", "1.5,0,0.5,1", "-o", str(out)] + TINY)
    assert code in (0, 4)
    header, rows = read_table(out / "tlambda.csv")
    assert rows[:, 0].tolist() == [0.0, 0.5, 1.0, 1.5]
    assert read_table(out / "transition.csv")[0] == ["T_break", "slope_below", "slope_above", "sse"]
