import json

import pytest
from pydantic import BaseModel

from skewlab import cli
from skewlab.certify import CertificateReport, LemmaReport
from skewlab.cli import BaseMapArgs, get_command_model, main, parse_poly, run, sub_command
from skewlab.errors import ConfigError
from skewlab.numeric import Poly
from tests.context import context_args

SMALL_GRID = ["--grid.nx", "33", "--grid.ny", "33", "--threads", "1"]


@pytest.fixture
def registry():
    from skewlab.cli import _registry

    saved = dict(_registry)
    _registry.clear()
    yield _registry
    _registry.clear()
    _registry.update(saved)


def test_get_command_model():
    class Args(BaseModel):
        name: str

    def launch(args: Args, config):
        pass

    def bare():
        pass

    def untyped(args: int):
        pass

    assert get_command_model(launch) is Args
    assert get_command_model(bare) is None
    assert get_command_model(untyped) is None


def test_sub_command(registry):
    class Args(BaseModel):
        name: str

    @sub_command("launch")
    def launch(args: Args, config):
        pass

    assert registry == {"launch": launch}
    assert sub_command("launch")(launch) is launch

    with pytest.raises(ValueError):

        @sub_command("launch")
        def launch2(args: Args, config):
            pass


def test_registered_commands():
    from skewlab.cli import _registry

    assert {
        "render-base",
        "render-fiber",
        "param-space",
        "construct-example",
        "verify",
        "saddles",
        "classify-critical",
        "accumulate",
        "trace-ray",
        "report",
    } <= set(_registry)


def test_parse_poly():
    assert parse_poly("z4").allclose(Poly.monomial(4))
    assert parse_poly("-2, 0, 1").allclose(Poly([-2.0, 0.0, 1.0]))
    with pytest.raises(ConfigError):
        parse_poly("z^2")


def test_base_map_args():
    assert BaseMapArgs(a=-2.0, b=-2.0).polynomial().allclose(Poly([2.0, 0.0, -4.0, 0.0, 1.0]))
    with pytest.raises(ConfigError):
        BaseMapArgs(a=-2.0).polynomial()
    with pytest.raises(ConfigError):
        BaseMapArgs(a=-2.0, b=-2.0, poly="z2").polynomial()


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "skewlab" in capsys.readouterr().out


def test_run_exits_with_status():
    with context_args(["--version"]) as status:
        run()
    assert status.code == 0


def test_missing_command(capsys):
    assert main([]) == 2


def test_invalid_choice():
    assert main(["accumulate", "--kind", "bogus"]) == 2


def test_invalid_config_value(tmp_path):
    assert main(["render-base", "--poly", "z2", "--grid.nx", "1", "--output-dir", str(tmp_path)]) == 2


def test_malformed_config_file(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("this is not a setting\n")
    assert main(["render-base", "--poly", "z2", "--config", str(path)]) == 2


def test_render_base(tmp_path, capsys):
    code = main(["render-base", "--poly", "z4", "--output-dir", str(tmp_path), *SMALL_GRID])
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"base.ppm", "base.grid", "base-boundary.csv", "manifest.json"}
    assert "bounded pixels" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "render-base"
    assert manifest["config"]["grid"]["nx"] == 33


def test_render_base_reads_config_file(tmp_path):
    path = tmp_path / "skewlab.conf"
    out = tmp_path / "out"
    path.write_text(f"grid.nx = 17\ngrid.ny = 9\noutput_dir = {out}\nthreads = 1\n")
    assert main(["render-base", "--poly", "z2", "--config", str(path), "--grid.ny", "11"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["grid"]["nx"] == 17
    assert manifest["config"]["grid"]["ny"] == 11


def test_render_base_requires_polynomial(tmp_path):
    assert main(["render-base", "--a", "-2", "--output-dir", str(tmp_path)]) == 2


def test_param_space_query(capsys):
    assert main(["param-space", "--query-a", "-1", "--query-b", "0"]) == 0
    assert capsys.readouterr().out.strip() == "Connected"
    assert main(["param-space", "--query-a", "-1"]) == 2


def test_param_space_grid(tmp_path):
    code = main(["param-space", "--curve-points", "16", "--output-dir", str(tmp_path), *SMALL_GRID])
    assert code == 0
    assert (tmp_path / "params.ppm").exists()
    assert (tmp_path / "params-curves.csv").read_text().startswith("curve,t,a,b")


def test_trace_ray(tmp_path, capsys):
    code = main(
        ["trace-ray", "--poly", "z4", "--theta", "1/8", "--depth", "10", "--output-dir", str(tmp_path), "--threads", "1"]
    )
    assert code == 0
    data = json.loads((tmp_path / "ray.json").read_text())
    assert data["theta"] == "1/8"
    assert not data["blocked"]
    assert main(["trace-ray", "--poly", "z4", "--theta", "x/y", "--output-dir", str(tmp_path)]) == 2


def test_saddles_product(tmp_path, capsys):
    code = main(
        [
            "saddles",
            "--family",
            "product",
            "--base-poly",
            "z2",
            "--fiber-poly",
            "z2",
            "--samples",
            "64",
            "--output-dir",
            str(tmp_path),
            "--threads",
            "1",
        ]
    )
    assert code == 0
    data = json.loads((tmp_path / "saddles.json").read_text())
    assert data["components"] == 1
    assert "period 1 component 1" in capsys.readouterr().out


def test_product_family_needs_polynomials(tmp_path):
    assert main(["saddles", "--family", "product", "--output-dir", str(tmp_path)]) == 2


def test_verify_reports_failure(tmp_path, monkeypatch, capsys):
    def failing(n, config):
        report = LemmaReport(lemma_id="contract", margin=-0.5)
        return CertificateReport(n=n, verdict=False, failing=["contract"], reports=[report])

    monkeypatch.setattr(cli, "full_certificate", failing)
    assert main(["verify", "--output-dir", str(tmp_path), "--threads", "1"]) == 1
    stored = json.loads((tmp_path / "certificate.json").read_text())
    assert stored["reports"][0]["pass"] is False
    assert "FAIL contract" in capsys.readouterr().out


def test_report(tmp_path, capsys):
    path = tmp_path / "certificate.json"
    path.write_text(json.dumps({"n": 3, "verdict": True, "reports": [{"lemma_id": "k-box", "margin": 0.2, "pass": True}]}))
    assert main(["report", "--path", str(path)]) == 0
    out = capsys.readouterr().out
    assert "k-box" in out
    assert "f_3: PASS" in out

    path.write_text(json.dumps({"n": 3, "reports": [{"lemma_id": "k-box", "margin": -0.2, "pass": False}]}))
    assert main(["report", "--path", str(path)]) == 1
    assert main(["report", "--path", str(tmp_path / "missing.json")]) == 2
    assert main(["report"]) == 2
