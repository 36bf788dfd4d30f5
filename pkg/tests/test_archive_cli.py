import json
import math
import os

import numpy as np
import pytest

from shockrefl import GasParams, IterationParams, fixed_point_solve
from shockrefl.archive import read_solution, write_solution
from shockrefl.cli import main
from shockrefl.errors import ArchiveError


@pytest.fixture(scope="module")
def small_run(gas_122, tmp_path_factory):
    """Cheap converged run at 88 degrees, 33x33, archived."""
    ip = IterationParams(n1=33, n2=33)
    sol = fixed_point_solve(gas_122, math.pi / 2.0, ip)
    sol = fixed_point_solve(gas_122, math.radians(88.0), ip, init=sol)
    outdir = tmp_path_factory.mktemp("runs") / "arch88"
    write_solution(sol, str(outdir))
    return sol, str(outdir)


def test_archive_round_trip(small_run):
    sol, outdir = small_run
    back, tampered = read_solution(outdir)
    assert not tampered
    assert np.abs(back.phi - sol.phi).max() < 1e-14
    assert np.abs(back.shock.points - sol.shock.points).max() < 1e-14
    assert back.metadata["regime"] == sol.metadata["regime"]


def test_archive_tamper_detection(small_run, tmp_path):
    _, outdir = small_run
    import shutil

    copy_dir = tmp_path / "tampered"
    shutil.copytree(outdir, copy_dir)
    path = copy_dir / "field.csv"
    lines = path.read_text().splitlines()
    parts = lines[40].split(",")
    parts[4] = repr(float(parts[4]) * 1.1)
    lines[40] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    _, tampered = read_solution(str(copy_dir))
    assert tampered


def test_archive_missing_file(tmp_path):
    with pytest.raises(ArchiveError):
        read_solution(str(tmp_path / "nope"))


def test_cli_angles(tmp_path, capsys):
    rc = main(["angles", "--rho0", "1", "--rho1", "2", "--gamma", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) >= {"theta_d_deg", "theta_s_deg", "rho_c", "attachment_possible"}
    assert payload["theta_d_deg"] == pytest.approx(54.411189882386, abs=1e-6)
    assert os.path.isfile(tmp_path / "angles.json")


def test_cli_angles_bad_inputs(tmp_path):
    assert main(["angles", "--rho0", "1", "--rho1", "1", "--out", str(tmp_path)]) == 2
    assert main(["angles", "--gamma", "0.9", "--out", str(tmp_path)]) == 2


def test_cli_polar(tmp_path, capsys):
    rc = main(["polar", "--rho0", "1", "--rho1", "2", "--gamma", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "polar.csv").read_text().splitlines()
    assert len(rows) == 201  # header + default 200-point grid
    header = rows[0].split(",")
    iw = header.index("rho2_weak")
    is_ = header.index("rho2_strong")
    last = rows[-1].split(",")
    assert float(last[0]) == pytest.approx(90.0)
    assert float(last[header.index("v2_weak")]) == 0.0
    n_ok = 0
    for r in rows[1:]:
        parts = r.split(",")
        if parts[1] == "ok" and float(parts[0]) < 90.0:
            assert float(parts[iw]) < float(parts[is_])
            n_ok += 1
    assert n_ok > 150


def test_cli_polar_round_trips_residuals(tmp_path, gas_122):
    """Re-derive states from polar.csv rows and recheck the residuals."""
    from shockrefl import make_uniform_state, state2_residuals

    main(["polar", "--rho0", "1", "--rho1", "2", "--gamma", "2", "--out", str(tmp_path)])
    rows = (tmp_path / "polar.csv").read_text().splitlines()
    header = rows[0].split(",")
    inc_xi = None
    checked = 0
    for r in rows[1:-1:20]:
        parts = r.split(",")
        if parts[1] != "ok":
            continue
        th = math.radians(float(parts[0]))
        u2 = float(parts[header.index("u2_weak")])
        v2 = float(parts[header.index("v2_weak")])
        from shockrefl import incident_state

        inc = incident_state(gas_122)
        k2 = -inc.xi1_0 * u2 * (1.0 + math.tan(th) ** 2)
        st = make_uniform_state(u2, v2, k2, gas_122)
        res = state2_residuals(st, th, gas_122)
        assert max(abs(x) for x in res) < 1e-9
        checked += 1
    assert checked > 5


def test_cli_solve_verify_and_exit_codes(tmp_path, gas_122):
    rc = main(["solve", "--rho0", "1", "--rho1", "2", "--gamma", "2",
               "--theta", "88", "--n1", "33", "--n2", "33",
               "--sweep-step", "1.0", "--out", str(tmp_path)])
    assert rc == 0
    arch = tmp_path / "solve_theta088.000_n33x33"
    assert (arch / "report.json").is_file()
    report = json.loads((arch / "report.json").read_text())
    assert report["verdict"] == "pass"
    assert main(["verify", str(arch)]) == 0
    # below the detachment angle: typed error, exit 2
    assert main(["solve", "--rho0", "1", "--rho1", "2", "--gamma", "2",
                 "--theta", "10", "--n1", "33", "--n2", "33",
                 "--out", str(tmp_path)]) == 2
    # missing archive
    assert main(["verify", str(tmp_path / "missing")]) == 2


def test_cli_solve_at_90_passes_with_flat_note(tmp_path):
    rc = main(["solve", "--rho0", "1", "--rho1", "2", "--gamma", "2",
               "--theta", "90", "--n1", "33", "--n2", "33", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "solve_theta090.000_n33x33" / "report.json").read_text())
    conv = [c for c in report["checks"] if c["name"] == "graph_and_convexity"][0]
    assert "flat-shock exemption" in conv["note"]


def test_cli_sweep_small(tmp_path):
    rc = main(["sweep", "--rho0", "1", "--rho1", "2", "--gamma", "2",
               "--theta-grid", "90:88:1", "--n1", "33", "--n2", "33",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "family.csv").read_text().splitlines()
    assert len(rows) == 4  # header + 3 members
    assert all("pass" in r for r in rows[1:])


def test_cli_sweep_empty_grid_rejected(tmp_path):
    assert main(["sweep", "--theta-grid", "80:90:1", "--out", str(tmp_path)]) == 2


def test_cli_config_file(tmp_path):
    cfgfile = tmp_path / "rc.json"
    cfgfile.write_text(json.dumps({"rho1": 2.5, "gamma": 1.4}))
    rc = main(["angles", "--config", str(cfgfile), "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "angles.json").read_text())
    assert payload["params"]["rho1"] == 2.5
    assert payload["params"]["gamma"] == 1.4
