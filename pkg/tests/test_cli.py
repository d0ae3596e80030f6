import hashlib
import json

import numpy as np
import pytest

from fracspec.cli import ExperimentConfig, main, plot, run, validate
from fracspec.errors import EmptyData, MissingColumn


def cfg_text(command, parameters, seed=0):
    return json.dumps({"command": command, "parameters": parameters,
                       "seed": seed})


MINIMAL_EIGEN = {"q": {"type": "constant", "value": 0.0}, "h": 0.0, "H": 0.0,
                 "n_max": 5, "grid_size": 256}


class TestValidate:
    def test_minimal_eigensolve_valid(self):
        assert validate(cfg_text("eigensolve", MINIMAL_EIGEN)) == []

    def test_missing_alpha_reported(self):
        params = {"q": {"type": "constant", "value": 0.0}, "h": 0.0, "H": 0.0,
                  "eta": {"type": "ramp"}, "T": 1.0, "nt": 64, "nx": 32,
                  "method": "both"}
        errors = validate(cfg_text("forward", params))
        assert any(e.startswith("parameters.alpha") for e in errors)

    def test_range_error_on_x0(self):
        params = {"x0": 1.5, "n_modes": 100, "s_lo": 1.0, "s_hi": 100.0,
                  "s_count": 11}
        errors = validate(cfg_text("counting", params))
        assert any(e.startswith("parameters.x0") for e in errors)

    def test_unknown_keys_rejected(self):
        params = dict(MINIMAL_EIGEN)
        params["bogus"] = 1
        errors = validate(cfg_text("eigensolve", params))
        assert any("parameters.bogus" in e for e in errors)

    def test_bad_json(self):
        assert validate("{not json") != []

    def test_unknown_command(self):
        assert validate(json.dumps({"command": "nope"})) != []


class TestRun:
    def test_eigensolve_artifacts(self, tmp_path):
        cfg = ExperimentConfig("eigensolve", MINIMAL_EIGEN, tmp_path / "out")
        manifest = run(cfg)
        assert manifest.all_passed
        names = {f["path"] for f in manifest.files}
        assert {"eigen.csv", "efuncs.csv", "manifest.json"} <= names
        lam = [float(line.split(",")[1]) for line in
               (tmp_path / "out" / "eigen.csv").read_text().splitlines()[1:]]
        assert abs(lam[1] - np.pi ** 2) < 1e-6

    def test_manifest_completeness_and_isolation(self, tmp_path):
        out = tmp_path / "iso"
        before = set((tmp_path).rglob("*"))
        manifest = run(ExperimentConfig("region-map", {"resolution": 12}, out))
        listed = {f["path"] for f in manifest.files}
        on_disk = {p.name for p in out.iterdir()}
        assert on_disk == listed
        outside = set(tmp_path.rglob("*")) - before
        assert all(str(p).startswith(str(out)) for p in outside)

    def test_region_map_row_count_and_svg(self, tmp_path):
        out = tmp_path / "rm"
        run(ExperimentConfig("region-map", {"resolution": 50}, out))
        rows = (out / "region.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2500
        svg = (out / "region.svg").read_text()
        assert svg.count("<rect") >= 2500

    def test_counting_command(self, tmp_path):
        params = {"x0": 0.5, "n_modes": 2000, "s_lo": 100.0, "s_hi": 1e6,
                  "s_count": 21, "A": 0.49}
        manifest = run(ExperimentConfig("counting", params, tmp_path / "c"))
        assert manifest.all_passed

    def test_kernel_command(self, tmp_path):
        params = {"q": {"type": "constant", "value": 0.0}, "h": 0.0, "H": 0.0,
                  "alpha": 0.5, "x": 0.4, "T": 1.0, "nt": 64, "n_modes": 16,
                  "n_max": 16}
        manifest = run(ExperimentConfig("kernel", params, tmp_path / "k"))
        assert manifest.all_passed

    def test_weyl_scan_command(self, tmp_path):
        params = {"q": {"type": "constant", "value": 0.0}, "h": 0.0, "x": 0.5,
                  "mag_lo": 100.0, "mag_hi": 900.0, "count": 8}
        manifest = run(ExperimentConfig("weyl-scan", params, tmp_path / "w"))
        assert manifest.all_passed
        fit = json.loads((tmp_path / "w" / "fit.json").read_text())
        assert abs(fit["exponent"] - 0.5) < 0.05

    def test_forward_command_cross_check(self, tmp_path):
        params = {"q": {"type": "constant", "value": 0.0}, "h": 0.0, "H": 0.0,
                  "alpha": 0.5, "eta": {"type": "ramp"}, "T": 1.0, "nt": 64,
                  "nx": 32, "method": "both", "n_max": 48}
        manifest = run(ExperimentConfig("forward", params, tmp_path / "f"))
        assert manifest.all_passed
        names = {f["path"] for f in manifest.files}
        assert {"field_spectral.csv", "field_l1fd.csv"} <= names

    def test_reconstruct_command_reports_metrics(self, tmp_path):
        params = {"alpha": 0.5, "d": 0.5, "x0": 0.6, "h_true": 0.5, "H": 1.0,
                  "truth": {"type": "bump", "depth": 0.8, "width": 0.5},
                  "M": 2, "gamma": 1e-8, "noise_level": 0.0, "T": 1.0,
                  "n_samples": 16, "eta": {"type": "ramp-hold", "t1": 0.5},
                  "n_max": 12, "grid_size": 256, "max_iter": 2,
                  "data_nx": 64, "data_nt": 64}
        manifest = run(ExperimentConfig("reconstruct", params, tmp_path / "r"))
        names = {f["path"] for f in manifest.files}
        assert {"result.json", "misfit.csv", "qhat.csv"} <= names
        twin = [c for c in manifest.checks if c["name"] == "twin-rel-L2-q"]
        assert twin and "rel_L2_q=" in twin[0]["detail"]

    def test_determinism_region_map(self, tmp_path):
        digests = []
        for sub in ("a", "b"):
            m = run(ExperimentConfig("region-map", {"resolution": 15},
                                     tmp_path / sub, seed=3))
            digests.append({f["path"]: f["sha256"] for f in m.files
                            if f["sha256"]})
        assert digests[0] == digests[1]

    def test_exit_codes(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(cfg_text("eigensolve", MINIMAL_EIGEN))
        assert main(["eigensolve", "--config", str(cfg_file), "--out",
                     str(tmp_path / "o1")]) == 0
        bad = tmp_path / "bad.json"
        bad.write_text(cfg_text("eigensolve", {"h": -1.0}))
        assert main(["eigensolve", "--config", str(bad), "--out",
                     str(tmp_path / "o2")]) == 2
        assert main(["validate", "--config", str(cfg_file)]) == 0
        assert main(["validate", "--config", str(bad)]) == 2

    def test_command_mismatch(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(cfg_text("eigensolve", MINIMAL_EIGEN))
        assert main(["region-map", "--config", str(cfg_file), "--out",
                     str(tmp_path / "o")]) == 2


class TestPlot:
    def write_csv(self, path, text):
        path.write_text(text)
        return str(path)

    def test_line_plot(self, tmp_path):
        p = self.write_csv(tmp_path / "d.csv", "t,y\n0,1\n1,2\n2,1.5\n")
        svg = plot(p, {"kind": "line", "x": "t", "y": "y"})
        assert svg.count("<polyline") == 1
        assert svg.startswith("<svg")

    def test_heatmap_rect_count(self, tmp_path):
        rows = ["d,x0,verdict"]
        for i in range(5):
            for j in range(5):
                rows.append(f"{i},{j},unknown")
        p = self.write_csv(tmp_path / "h.csv", "\n".join(rows) + "\n")
        svg = plot(p, {"kind": "heatmap", "x": "d", "y": "x0",
                       "value": "verdict"})
        assert svg.count("<rect") >= 25

    def test_missing_column(self, tmp_path):
        p = self.write_csv(tmp_path / "d.csv", "t,y\n0,1\n")
        with pytest.raises(MissingColumn):
            plot(p, {"kind": "line", "x": "t", "y": "z"})

    def test_log_nonpositive_diagnostic(self, tmp_path):
        p = self.write_csv(tmp_path / "d.csv", "t,y\n1,1\n2,0\n3,2\n")
        with pytest.raises(EmptyData) as err:
            plot(p, {"kind": "line", "x": "t", "y": "y", "logy": True})
        assert "row 1" in str(err.value)

    def test_deterministic_bytes(self, tmp_path):
        p = self.write_csv(tmp_path / "d.csv", "t,y\n0,1\n1,3\n2,2\n")
        spec = {"kind": "line", "x": "t", "y": "y", "title": "demo"}
        a = plot(p, spec)
        b = plot(p, spec)
        assert hashlib.sha256(a.encode()).digest() == \
            hashlib.sha256(b.encode()).digest()

    def test_cli_plot_roundtrip(self, tmp_path):
        p = self.write_csv(tmp_path / "d.csv", "t,y\n0,1\n1,2\n")
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps({"kind": "line", "x": "t", "y": "y"}))
        out = tmp_path / "out.svg"
        assert main(["plot", "--csv", p, "--spec", str(spec_file), "--out",
                     str(out)]) == 0
        assert out.read_text().startswith("<svg")
