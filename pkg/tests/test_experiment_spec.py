import pytest

from crystalsim.experiment import SpecError, load_spec, parse_spec


def _doc(**kw):
    d = {"kind": "simulate", "grid": {"alpha": [0.1]}}
    d.update(kw)
    return d


def test_cells_cartesian_product_in_fixed_order():
    spec = parse_spec(_doc(grid={"delta": [0, 10], "alpha": [0.1, 0.2]}, base={"n_honest": 2}))
    cells = spec.cells()
    assert len(cells) == 4
    assert cells[0] == {"n_honest": 2, "alpha": 0.1, "delta": 0}
    assert cells[1]["delta"] == 10


@pytest.mark.parametrize("doc,path", [
    ({"grid": {"alpha": [0.1]}}, "kind"),
    (_doc(grid={}), "grid"),
    (_doc(grid={"alpha": []}), "grid.alpha"),
    (_doc(grid={"alpha": [0.1, "x"]}), "grid.alpha[1]"),
    (_doc(grid={"k": [2.5]}), "grid.k[0]"),
    (_doc(grid={"gamma": [0.5]}), "grid.gamma"),
    (_doc(trials=0), "trials"),
    (_doc(seed=-1), "seed"),
    (_doc(base={"strategy": "sneaky"}), "base.strategy"),
    (_doc(base={"nonsense": 1}), "base.nonsense"),
    (_doc(output={"format": "xml"}), "output.format"),
    (_doc(extra=1), "extra"),
    ({"kind": "double_spend", "grid": {"alpha": [0.1]}}, "grid.k"),
    ({"kind": "offline", "grid": {"alpha": [0.1], "gamma_off": [2.0]}}, "grid.gamma_off[0]"),
    ({"kind": "committee", "grid": {"alpha": [0.1], "W": [10]}, "output": {"traces": "t"}},
     "output.traces"),
])
def test_errors_carry_field_path(doc, path):
    with pytest.raises(SpecError) as e:
        parse_spec(doc)
    assert str(e.value).startswith(path)


def test_example_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).parent.parent / "configs"
    files = sorted(root.glob("*.yaml"))
    assert files
    for f in files:
        assert load_spec(str(f)).cells()


def test_invalid_yaml(tmp_path):
    f = tmp_path / "x.yaml"
    f.write_text("kind: [unclosed\n")
    with pytest.raises(SpecError, match="<root>"):
        load_spec(str(f))
