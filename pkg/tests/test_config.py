import pytest

from hsmor.config import AuraTask, ProfileTask, RefineTask, ScanTask, TrajectoryTask, parse_config
from hsmor.metrics import ConfigError, Metric

OBJECTS = "[objects]\nA = 1,1,0\nB = 0,0,1\nDr = 0,0,0\n"


def test_example_config():
    rc = parse_config(OBJECTS + "[metric]\nkind = xr\nb = 1.5\n[task]\ntype = aura\n")
    assert rc.objects.dim == 3 and rc.objects.names == ("A", "B", "Dr")
    assert rc.metric.kind is Metric.XR and rc.metric.b == 1.5
    assert isinstance(rc.task, AuraTask) and rc.task.directions == 26
    assert rc.workers == 1 and rc.out is None


def test_scan_grid_from_axis_keys():
    rc = parse_config(OBJECTS + "[task]\ntype = scan\nx = -3, 4\ny = -3,4\nz = 0.5\nsteps = 64\n")
    assert isinstance(rc.task, ScanTask)
    g = rc.task.grid
    assert g.shape == (64, 64) and g.fixed == ((2, 0.5),)


def test_other_tasks():
    base = OBJECTS + "[task]\n"
    r = parse_config(base + "x = 0,1\ny = 0,1\nz = 0,1\nsteps = 4,5,6\nmax_points = 7\n", "refine")
    assert isinstance(r.task, RefineTask) and r.task.grid.shape == (6, 5, 4)
    p = parse_config(base + "direction = 1,2,3\nsamples = 20\n", "omega-profile")
    assert isinstance(p.task, ProfileTask) and p.task.direction == (1, 2, 3)
    t = parse_config(base + "waypoints = 0,0,0; 1,1,1 ; 2,0,0\n", "trajectory")
    assert isinstance(t.task, TrajectoryTask) and len(t.task.path.waypoints) == 3


def test_comments_and_run_section():
    rc = parse_config("# header\n" + OBJECTS + "[run]\nworkers = 4  # inline\nout = here\n"
                      "[task]\ntype = aura\n")
    assert rc.workers == 4 and rc.out == "here"


@pytest.mark.parametrize("text, line, msg", [
    ("[objects]\nA = 1,1,0\nB = 0,0\nDr = 0,0,0\n[task]\ntype = aura\n", 3, "B has 2 coordinates"),
    (OBJECTS + "[metric]\nkind = xr\nb = 1.0\n[task]\ntype = aura\n", 7, "b must be > 1"),
    (OBJECTS + "[metric]\ncolour = red\n[task]\ntype = aura\n", 6, "unknown key 'colour'"),
    (OBJECTS + "[extra]\nk = 1\n", 5, "unknown section"),
    (OBJECTS + "[task]\ntype = dance\n", 6, "unknown task type"),
    (OBJECTS + "[task]\ntype = aura\nsteps = 3\n", 7, "unknown key 'steps'"),
    (OBJECTS + "[task]\ntype = aura\ngrowth = fast\n", 7, "not a number"),
    (OBJECTS + "[task]\ntype = scan\nx = 0,1\ny = 0,1\n", 5, "missing key 'z'"),
    (OBJECTS + "[task]\ntype = scan\nx = 1,0\ny = 0,1\nz = 0\n", 5, "min must be < max"),
    (OBJECTS + "[task]\ntype = omega-profile\ndirection = 0,0,0\n", 7, "nonzero"),
    (OBJECTS + "[run]\ndrifter = X\n[task]\ntype = aura\n", 6, "drifter"),
    (OBJECTS + "A = 2,2,2\n", 5, "duplicate key"),
    ("A = 1\n", 1, "[section] header"),
    (OBJECTS.replace("Dr", "D r") + "[task]\ntype = aura\n", 4, "invalid object name"),
])
def test_errors_carry_line_numbers(text, line, msg):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert str(exc.value).startswith(f"line {line}:")
    assert msg in str(exc.value)


def test_subcommand_must_match_task_type():
    with pytest.raises(ConfigError, match="not 'scan'"):
        parse_config(OBJECTS + "[task]\ntype = aura\n", "scan")
    assert parse_config(OBJECTS, "aura").kind == "aura"
