import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from camo_stk import cli
from camo_stk.tensor import read_tensor


from helpers import read_csv_rows, synth_dataset, write_mask


class TestEval:
    def test_perfect_predictions(self, tmp_path):
        manifest, preds = synth_dataset(tmp_path)
        out = tmp_path / "out"
        code = cli.main(["eval", "--manifest", str(manifest), "--pred", str(preds),
                         "--out", str(out)])
        assert code == 0
        agg = read_csv_rows(out / "aggregate.csv")[0]
        assert float(agg["mae"]) == 0.0
        assert float(agg["m_dice"]) == 1.0
        assert int(agg["clips"]) == 2 and int(agg["frames"]) == 20
        per = read_csv_rows(out / "per_clip.csv")
        assert [r["clip"] for r in per] == ["clip0", "clip1"]
        attr_rows = read_csv_rows(out / "attributes.csv")
        assert {r["attribute"] for r in attr_rows} == {"Ldm", "CM", "Occ"}

    def test_all_black_predictions(self, tmp_path):
        manifest, preds = synth_dataset(tmp_path, n_clips=1, n_frames=3)
        for p in (preds / "clip0").glob("*.png"):
            write_mask(p, np.zeros((16, 16)))
        out = tmp_path / "out"
        assert cli.main(["eval", "--manifest", str(manifest), "--pred", str(preds),
                         "--out", str(out)]) == 0
        row = read_csv_rows(out / "per_clip.csv")[0]
        assert float(row["f_max"]) == 0.0
        assert float(row["m_dice"]) == 0.0

    def test_worker_determinism(self, tmp_path):
        manifest, preds = synth_dataset(tmp_path, perfect=False)
        outs = []
        for i, workers in enumerate((1, 8, 1)):
            out = tmp_path / f"out{i}"
            code = cli.main(["eval", "--manifest", str(manifest),
                             "--pred", str(preds), "--out", str(out),
                             "--workers", str(workers)])
            assert code == 0
            outs.append({p.name: p.read_bytes()
                         for p in sorted(out.glob("*.csv"))})
        assert outs[0] == outs[1] == outs[2]

    def test_missing_predictions_exit_2(self, tmp_path):
        manifest, preds = synth_dataset(tmp_path)
        (preds / "clip0" / "0003.png").unlink()
        code = cli.main(["eval", "--manifest", str(manifest), "--pred", str(preds),
                         "--out", str(tmp_path / "out")])
        assert code == 2

    def test_schema_error_exit_1(self, tmp_path):
        manifest, preds = synth_dataset(tmp_path)
        raw = json.loads(manifest.read_text())
        raw["clips"][0]["attributes"] = ["Night"]
        manifest.write_text(json.dumps(raw))
        code = cli.main(["eval", "--manifest", str(manifest), "--pred", str(preds),
                         "--out", str(tmp_path / "out")])
        assert code == 1

    def test_csv_lf_and_header_first(self, tmp_path):
        manifest, preds = synth_dataset(tmp_path)
        out = tmp_path / "out"
        cli.main(["eval", "--manifest", str(manifest), "--pred", str(preds),
                  "--out", str(out)])
        raw = (out / "aggregate.csv").read_bytes()
        assert b"\r" not in raw
        assert raw.startswith(b"dataset,clips,frames,s_alpha")


class TestDensity:
    def test_writes_per_split_and_combined(self, tmp_path):
        manifest, _ = synth_dataset(tmp_path)
        out = tmp_path / "out"
        code = cli.main(["density", "--manifest", str(manifest), "--out", str(out)])
        assert code == 0
        for split in ("all", "train", "test"):
            assert (out / f"density_{split}_16bit.png").is_file()
            assert (out / f"density_{split}_color.png").is_file()

    def test_combined_equals_direct_accumulation(self, tmp_path):
        from camo_stk.dataset import density_map, load_manifest
        from camo_stk.metrics import load_gt_mask
        manifest, _ = synth_dataset(tmp_path)
        out = tmp_path / "out"
        cli.main(["density", "--manifest", str(manifest), "--out", str(out)])
        clips = load_manifest(manifest)
        masks = [load_gt_mask(p) for c in clips for p in c.gt_paths]
        dm = density_map(masks, cli.DENSITY_GRID, "max_one")
        with Image.open(out / "density_all_16bit.png") as img:
            png = np.asarray(img).astype(np.float64)
        assert np.abs(png / 65535.0 - dm.grid).max() <= 1.0 / 65535.0

    def test_degenerate_all_empty(self, tmp_path):
        root = tmp_path
        (root / "frames/c").mkdir(parents=True)
        (root / "gt/c").mkdir(parents=True)
        for i in range(2):
            write_mask(root / "frames/c" / f"{i}.png", np.zeros((8, 8)))
            write_mask(root / "gt/c" / f"{i}.png", np.zeros((8, 8)))
        manifest = root / "m.json"
        manifest.write_text(json.dumps({
            "version": "yuv-manifest/1",
            "clips": [{"clip_id": "c", "frames": ["frames/c/0.png", "frames/c/1.png"],
                       "gts": ["gt/c/0.png", "gt/c/1.png"], "attributes": [],
                       "split": "test"}]}))
        out = tmp_path / "out"
        assert cli.main(["density", "--manifest", str(manifest), "--out", str(out)]) == 0
        with Image.open(out / "density_all_16bit.png") as img:
            assert not np.asarray(img).any()


class TestGradcheckCommand:
    def test_default_run_exits_zero(self, capsys):
        assert cli.main(["gradcheck", "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_corrupted_gradient_exits_3(self, capsys):
        assert cli.main(["gradcheck", "--seed", "1", "--corrupt"]) == 3
        assert "FAIL" in capsys.readouterr().out


class TestBenchCommand:
    def test_bench_csv(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.main(["bench", "--out", str(out)]) == 0
        rows = read_csv_rows(out / "bench.csv")
        forms = {r["form"] for r in rows}
        assert forms == {"plain_conv", "cdc3d_unified", "cdc3d_fusion",
                         "deform_sample"}
        for r in rows:
            assert float(r["ns_per_elem"]) > 0.0


class TestDemoCommand:
    def test_demo_smoke_and_dumps(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["demo", "--out", str(out), "--dim", "8", "--npairs", "2",
                         "--seed", "4"])
        assert code == 0
        for tag, hw in (("scale_0p5", 8), ("scale_1p0", 16), ("scale_1p5", 24)):
            stage_dir = out / "demo" / tag
            names = sorted(p.name for p in stage_dir.glob("*.cst5"))
            assert names == ["00_input.cst5", "01_stabilized.cst5",
                             "02_temporal.cst5", "03_plain_conv.cst5",
                             "04_aligned.cst5"]
            t = read_tensor(str(stage_dir / "04_aligned.cst5"))
            assert tuple(t.shape) == (1, 8, 5, hw, hw)

    def test_demo_theta_zero(self, tmp_path, capsys):
        code = cli.main(["demo", "--out", str(tmp_path / "o"), "--dim", "8",
                         "--theta", "0"])
        assert code == 0
        for line in capsys.readouterr().out.splitlines():
            if "cdc - plain_conv" in line:
                assert float(line.split("=")[-1]) < 1e-12

    def test_demo_seed_determinism(self, tmp_path):
        dumps = []
        for i in range(2):
            out = tmp_path / f"o{i}"
            assert cli.main(["demo", "--out", str(out), "--dim", "8",
                             "--seed", "11"]) == 0
            dumps.append({p.relative_to(out): p.read_bytes()
                          for p in sorted(out.rglob("*.cst5"))})
        assert dumps[0] == dumps[1]


class TestConfigPrecedence:
    def test_config_file_and_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"theta": 0.2, "dim": 8}))
        args = cli._build_parser().parse_args(
            ["demo", "--config", str(cfg), "--theta", "0.7"])
        merged = cli._merge_config(args)
        assert merged.theta == 0.7       # flag wins
        assert merged.dim == 8           # file beats default
        assert merged.kpts == 9          # built-in default

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"thetaa": 0.2}))
        args = cli._build_parser().parse_args(["demo", "--config", str(cfg)])
        with pytest.raises(ValueError):
            cli._merge_config(args)

    def test_invalid_theta_exit_1(self, tmp_path):
        assert cli.main(["demo", "--theta", "1.5", "--out", str(tmp_path)]) == 1


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "camo_stk", "demo", "--out",
             str(tmp_path / "o"), "--dim", "4", "--npairs", "2"],
            capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0
        assert "demo artifacts" in proc.stdout
