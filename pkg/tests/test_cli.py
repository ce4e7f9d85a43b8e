import json
import os
import subprocess
import sys

import numpy as np
import pytest

from hankel_lab import galerkin, verify
from hankel_lab.cli import main
from hankel_lab.galerkin import HankelSection, apply_section
from hankel_lab.kernelfn import PointMass


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.fixture
def specs(tmp_path):
    return {
        "lebesgue": write(tmp_path, "lebesgue.json", {"power": [{"c": 1.0, "alpha": 1.0}]}),
        "atom1": write(tmp_path, "atom1.json", {"atoms": [{"a": 1.0, "m": 1.0}]}),
        "power05": write(tmp_path, "power.json", {"power": [{"c": 1.0, "alpha": 0.5}]}),
        "carleman": write(tmp_path, "carleman.json", {"variant": "carleman"}),
        "pointmass": write(tmp_path, "pm.json", {"variant": "pointmass", "a": 1.0, "m": 1.0}),
        "power2": write(tmp_path, "p2.json", {"variant": "power", "alpha": 2.0}),
        "hilbert": write(tmp_path, "hilbert.json", [1.0 / (1 + j) for j in range(5)]),
        "pwc": write(tmp_path, "pwc.json", {"variant": "pwc", "breakpoints": [1.0, 2.0], "values": [1.0]}),
        "bump": write(tmp_path, "bump.json", {"variant": "bump", "center": 2.0, "halfwidth": 1.0}),
    }


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_laplace_lebesgue(specs, capsys):
    code, out, _ = run(["laplace", "--measure", specs["lebesgue"], "--t", "1,2,4"], capsys)
    rows = [ln.split(",") for ln in out.strip().splitlines()]
    assert code == 0 and rows[0] == ["t", "h"]
    assert [(float(a), float(b)) for a, b in rows[1:]] == [(1, 1), (2, 0.5), (4, 0.25)]


def test_laplace_atom_17_digits(specs, capsys):
    code, out, _ = run(["laplace", "--measure", specs["atom1"], "--t", "1"], capsys)
    assert code == 0 and out.strip().splitlines()[1] == "1,0.36787944117144233"


def test_laplace_empty_grid(specs, capsys):
    code, out, _ = run(["laplace", "--measure", specs["lebesgue"], "--t", ""], capsys)
    assert code == 0 and out == "t,h\n"


@pytest.mark.parametrize("name,expect", [("power05", {"is_carleson": False, "divergence_end": "at_zero"}),
                                         ("lebesgue", {"is_carleson": True, "constant": 1.0}),
                                         ("atom1", {"is_carleson": True, "constant": 1.0})])
def test_carleson(specs, capsys, name, expect):
    code, out, _ = run(["carleson", "--measure", specs[name]], capsys)
    data = json.loads(out)
    assert code == 0 and all(data[k] == pytest.approx(v) if isinstance(v, float) else data[k] == v
                             for k, v in expect.items())


def test_galerkin_carleman(specs, capsys, tmp_path):
    out_path = str(tmp_path / "g.csv")
    code, _, _ = run(["galerkin", "--kernel", specs["carleman"], "--n", "3", "--out", out_path], capsys)
    G = HankelSection.from_csv(open(out_path).read())
    assert code == 0 and abs(G.matrix[0, 0] - 2.0) <= 1e-7
    side = json.load(open(out_path + ".json"))
    assert side["N"] == 3 and "hankel_defect" in side


def test_galerkin_pointmass(specs, capsys):
    code, out, _ = run(["galerkin", "--kernel", specs["pointmass"], "--n", "2"], capsys)
    G = HankelSection.from_csv(out).matrix
    s = np.add.outer(np.arange(2), np.arange(2))
    assert code == 0 and np.allclose(G, 4 / 9 * 3.0 ** -s, rtol=1e-14)


def test_galerkin_exit_codes(specs, capsys):
    assert run(["galerkin", "--kernel", specs["carleman"], "--n", "0"], capsys)[0] == 2
    assert run(["galerkin", "--kernel", specs["power2"], "--n", "4"], capsys)[0] == 3


def test_norms(specs, capsys):
    code, out, _ = run(["norms", "--moments", specs["hilbert"], "--orders", "1,2"], capsys)
    rows = [ln.split(",") for ln in out.strip().splitlines()[1:]]
    assert code == 0 and rows[0] == ["1", "1"]
    assert float(rows[1][1]) == pytest.approx(1.2675918792439982, rel=1e-14)
    code, out, _ = run(["norms", "--kernel", specs["carleman"], "--orders", "8"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 2


def test_norms_carleman_monotone(specs, capsys):
    code, out, _ = run(["norms", "--kernel", specs["carleman"], "--orders", "8,16,32,64,128,256"], capsys)
    lams = [float(ln.split(",")[1]) for ln in out.strip().splitlines()[1:]]
    assert code == 0 and all(b > a for a, b in zip(lams, lams[1:])) and max(lams) < 3.14159266


def test_verify_default(capsys):
    code, out, _ = run(["verify", "--corpus", "default"], capsys)
    assert code == 0 and json.loads(out)["summary"]["failed"] == 0


def test_verify_zero_tolerance(tmp_path, capsys):
    corpus = verify.default_corpus()
    small = {"measures": corpus["measures"], "testfns": corpus["testfns"], "tolerances": {"fubini": 0.0}}
    code, out, _ = run(["verify", "--corpus", write(tmp_path, "c.json", small)], capsys)
    assert code == json.loads(out)["summary"]["failed"] > 0


def test_verify_missing_file(capsys, tmp_path):
    assert run(["verify", "--corpus", str(tmp_path / "nope.json")], capsys)[0] == 2


def test_apply_and_qform(specs, capsys):
    code, out, _ = run(["apply", "--kernel", specs["carleman"], "--testfn", specs["pwc"], "--t", "1"], capsys)
    assert code == 0 and float(out.strip().splitlines()[1].split(",")[1]) == pytest.approx(np.log(1.5), rel=1e-12)
    code, out, _ = run(["qform", "--measure", specs["lebesgue"], "--testfn", specs["pwc"]], capsys)
    data = json.loads(out)
    assert code == 0 and data["residual"] <= 1e-8


def test_tail(specs, capsys, tmp_path):
    k = write(tmp_path, "pl.json", {"variant": "power", "alpha": 0.25})
    code, out, _ = run(["tail", "--kernel", k, "--testfn", specs["bump"], "--grid", "1000,1e6,61,log"], capsys)
    data = json.loads(out)
    assert code == 0 and abs(data["alpha_hat"] - 0.25) <= 0.02


def test_moments_and_blaschke(specs, capsys, tmp_path):
    unit = write(tmp_path, "u.json", {"power": [{"c": 1.0, "alpha": 1.0, "cutoff": 1.0}], "discrete_side": True})
    code, out, _ = run(["moments", "--measure", unit, "--n", "3", "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["moments"] == pytest.approx([1, 1 / 2, 1 / 3], rel=1e-14)
    code, out, _ = run(["blaschke", "--atoms", "1,2"], capsys)
    assert code == 0 and json.loads(out)["converges"] is True


def test_usage_errors(specs, capsys):
    assert run(["laplace", "--measure", specs["lebesgue"]], capsys)[0] == 2
    assert run(["laplace", "--measure", specs["lebesgue"], "--t", "1", "--bogus"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_help_lists_subcommands():
    proc = subprocess.run([sys.executable, "-m", "hankel_lab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("laplace", "carleson", "blaschke", "moments", "galerkin", "norms", "apply", "qform",
                 "verify", "tail"):
        assert name in proc.stdout


def test_atomic_write_touches_only_output(specs, capsys, tmp_path):
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    target = out_dir / "h.csv"
    target.write_text("old\n")
    code, _, _ = run(["laplace", "--measure", specs["lebesgue"], "--t", "2", "--out", str(target)], capsys)
    assert code == 0 and os.listdir(out_dir) == ["h.csv"]
    assert target.read_text() == "t,h\n2,0.5\n"


def test_failed_command_leaves_output_untouched(specs, capsys, tmp_path):
    target = tmp_path / "g.csv"
    target.write_text("old\n")
    assert run(["galerkin", "--kernel", specs["power2"], "--n", "4", "--out", str(target)], capsys)[0] == 3
    assert target.read_text() == "old\n"


def test_section_csv_round_trip_preserves_apply(specs, capsys, tmp_path):
    out_path = str(tmp_path / "s.csv")
    assert run(["galerkin", "--kernel", specs["pointmass"], "--n", "6", "--out", out_path], capsys)[0] == 0
    back = HankelSection.from_csv(open(out_path).read())
    direct = galerkin.laguerre_section(PointMass(1.0, 1.0), 6)
    v = np.linspace(-1.0, 2.0, 6)
    assert np.max(np.abs(apply_section(back, v) - apply_section(direct, v))) <= 1e-12
    # re-imported as a moment source from its Hankel profile
    mom = galerkin.moment_section(back.hankel_profile, 6)
    assert np.max(np.abs(apply_section(mom, v) - apply_section(direct, v))) <= 1e-12
