import pytest

from specforge.cli import bundled_config_text
from specforge.config import load_config, parse_config
from specforge.errors import ConfigError

BASE = """
[system]
kind = two_level
E = 2.0

[diagrams]
groups = main
main.dsl = ((Bu,0),(Ku,1),(Bd,2)); ((Bu,0),(Bd,1),(Ku,2))
main.view = rephasing

[scan]
delays = 4, 1, 4
scan_id = 0, 2
resolution = 5
"""


def test_minimal_config_defaults():
    cfg = parse_config(BASE)
    assert cfg.kind == "two_level" and cfg.system == {"E": 2.0, "mu": 1.0, "decay": 0.0, "dephasing": 0.0}
    assert cfg.groups[0].dsl == ["((Bu,0),(Ku,1),(Bd,2))", "((Bu,0),(Bd,1),(Ku,2))"]
    assert cfg.mode == "coherence2d" and cfg.resolution == 5 and cfg.part == "complex"
    assert cfg.delays == [4.0, 1.0, 4.0] and cfg.scan_id == [0, 2]


def test_echo_round_trip():
    cfg = parse_config(BASE)
    again = parse_config(cfg.to_ini())
    assert again == cfg and again.to_ini() == cfg.to_ini()


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_bundled_examples_parse(name):
    cfg = parse_config(bundled_config_text(name))
    assert cfg.part == "imag" and cfg.delays[1] == 5.0 and cfg.scan_id == [0, 2]
    assert [g.view for g in cfg.groups] == ["rephasing", "nonrephasing"]
    assert parse_config(cfg.to_ini()) == cfg


def test_example1_matches_reference_workflow():
    cfg = parse_config(bundled_config_text("example1"))
    assert cfg.delays == [100.0, 5.0, 100.0] and cfg.resolution == 10
    assert cfg.groups[0].times == [0.0, 100.0, 200.0, 200.0]
    assert cfg.trajectory_times == [0.0, 5.0, 10.0, 20.0]


def test_example2_dicke_parameters():
    cfg = parse_config(bundled_config_text("example2"))
    p = cfg.system
    assert cfg.kind == "dicke"
    assert (p["omega_c"], p["omega"], p["g"], p["n_spins"], p["n_cav"], p["kappa"], p["dephasing"]) == (
        1.0, 1.0, 0.25, 6, 6, 0.05, 0.15)


def swap(old, new, text=BASE):
    assert old in text
    return text.replace(old, new)


@pytest.mark.parametrize("text,match", [
    (swap("kind = two_level", "kind = qutrit"), "unknown system kind"),
    (swap("E = 2.0", ""), "missing"),
    (swap("E = 2.0", "E = 2.0\nw1 = 3"), "unknown \\[system\\] keys"),
    (swap("E = 2.0", "E = two"), "E"),
    (swap("groups = main", "groups ="), "groups"),
    (swap("main.view = rephasing", "main.view = sideways"), "view"),
    (swap("main.view = rephasing", "main.view = rephasing\nother.dsl = ()"), "not tied"),
    (swap("main.dsl = ((Bu,0),(Ku,1),(Bd,2)); ((Bu,0),(Bd,1),(Ku,2))", ""), "phase or dsl"),
    (swap("scan_id = 0, 2", "scan_id = 0, 0"), "distinct"),
    (swap("scan_id = 0, 2", "scan_id = 0, 5"), "outside"),
    (swap("resolution = 5", "resolution = 0"), "resolution"),
    (swap("resolution = 5", "resolution = 5\nmode = sweep"), "scan mode"),
    (swap("resolution = 5", "resolution = 5\nmode = pop_study\npop_index = 0"), "pop_index"),
    (swap("resolution = 5", "resolution = 5\nmode = linear"), "scan_time"),
    (swap("resolution = 5", "resolution = 5\nspeed = 3"), "unknown \\[scan\\]"),
    (BASE + "\n[extras]\nx = 1\n", "unknown section"),
    (BASE + "\n[detection]\npart = phase\n", "part"),
    (BASE + "\n[detection]\nmode = absorbance\n", "detection"),
    (BASE + "\n[output]\nscale = cubic\n", "scale"),
    (BASE + "\n[output]\nimages = maybe\n", "boolean"),
    ("[system\nkind", "cannot parse"),
    (BASE.replace("[scan]", "[scan2]"), "missing \\[scan\\]"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_generated_group_needs_times():
    text = swap("main.dsl = ((Bu,0),(Ku,1),(Bd,2)); ((Bu,0),(Bd,1),(Ku,2))",
                "main.phase = (1,0),(0,1),(0,1)\nmain.times = 0, 1")
    with pytest.raises(ConfigError, match="arrival time"):
        parse_config(text)


def test_custom_paths_resolve_against_config_dir(tmp_path):
    text = swap("kind = two_level\nE = 2.0", "kind = custom\nhamiltonian = h.txt\ndipole = mats/mu.txt\nc_ops = l1.txt, l2.txt")
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.system["hamiltonian"] == str(tmp_path / "h.txt")
    assert cfg.system["dipole"] == str(tmp_path / "mats" / "mu.txt")
    assert cfg.system["c_ops"] == f"{tmp_path / 'l1.txt'}, {tmp_path / 'l2.txt'}"


def test_custom_needs_dipole_or_lowering():
    with pytest.raises(ConfigError, match="dipole"):
        parse_config(swap("kind = two_level\nE = 2.0", "kind = custom\nhamiltonian = h.txt"))
