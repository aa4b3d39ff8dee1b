import numpy as np
import pytest

from conftest import make_idx_labels
from gradpath.cli import dispatch
from gradpath.pgm import read_pgm, write_pgm
from gradpath.errors import FormatError


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestInfo:
    def test_mnist_dualpath_param_equality(self, capsys):
        code, out, _ = run(capsys, "info", "--dataset", "mnist", "--arch", "dualpath")
        assert code == 0
        assert "trainable parameters: 50938" in out
        assert "baseline parameters:  50938 (equal)" in out

    def test_baseline_layer_table(self, capsys):
        code, out, _ = run(capsys, "info", "--dataset", "cifar100")
        assert code == 0
        for kind in ("conv2d", "maxpool2x2", "dropout", "batchnorm", "flatten", "dense"):
            assert kind in out


class TestUsageErrors:
    def test_no_verb(self, capsys):
        code, _, err = run(capsys)
        assert code == 1 and "verb" in err

    def test_unknown_verb(self, capsys):
        code, _, err = run(capsys, "frobnicate")
        assert code == 1

    def test_unknown_flag_rejected(self, capsys):
        code, _, err = run(capsys, "info", "--bogus-flag", "1")
        assert code == 1

    def test_bad_dataset_choice(self, capsys):
        code, _, err = run(capsys, "info", "--dataset", "svhn")
        assert code == 1

    def test_bad_hyperparameter_value(self, capsys):
        code, _, err = run(capsys, "train", "--dataset", "toy", "--epochs", "0")
        assert code == 1


class TestDataErrors:
    def test_missing_mnist_exits_2(self, capsys, tmp_path):
        code, _, err = run(capsys, "train", "--dataset", "mnist",
                           "--data-dir", str(tmp_path), "--epochs", "1")
        assert code == 2
        assert "data directory" in err

    def test_corrupt_mnist_exits_2(self, capsys, tmp_path):
        (tmp_path / "train-images-idx3-ubyte").write_bytes(b"\x00\x00\x09\x99" + b"\x00" * 20)
        (tmp_path / "train-labels-idx1-ubyte").write_bytes(make_idx_labels([1]))
        code, _, err = run(capsys, "train", "--dataset", "mnist",
                           "--data-dir", str(tmp_path), "--epochs", "1")
        assert code == 2
        assert "magic" in err


class TestTrainCompare:
    def test_train_single_arm(self, capsys, tmp_path):
        out_csv = tmp_path / "one.csv"
        code, out, _ = run(capsys, "train", "--dataset", "toy", "--subset", "48",
                           "--epochs", "1", "--batch-size", "16",
                           "--arch", "dualpath", "--out", str(out_csv), "--no-timing")
        assert code == 0
        lines = out_csv.read_text().strip().split("\n")
        assert len(lines) == 2
        assert lines[1].split(",")[1] == "dualpath"

    def test_compare_writes_csv_and_figures(self, capsys, tmp_path):
        out_csv = tmp_path / "cmp.csv"
        code, out, _ = run(capsys, "compare", "--dataset", "toy", "--subset", "48",
                           "--epochs", "2", "--batch-size", "16",
                           "--out", str(out_csv), "--no-timing")
        assert code == 0
        lines = out_csv.read_text().strip().split("\n")
        assert len(lines) == 1 + 2 * 2  # header + epochs x arms
        assert "accuracy delta" in out
        for stem in ("cmp_test_accuracy.png", "cmp_train_accuracy.png", "cmp_loss.png"):
            f = tmp_path / stem
            assert f.exists() and f.stat().st_size > 0

    def test_compare_no_figures(self, capsys, tmp_path):
        out_csv = tmp_path / "cmp.csv"
        code, _, _ = run(capsys, "compare", "--dataset", "toy", "--subset", "32",
                         "--epochs", "1", "--batch-size", "16",
                         "--out", str(out_csv), "--no-figures", "--no-timing")
        assert code == 0
        assert not list(tmp_path.glob("*.png"))

    def test_compare_deterministic_with_no_timing(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["compare", "--dataset", "toy", "--subset", "32", "--epochs", "1",
                "--batch-size", "16", "--seed", "3", "--no-figures", "--no-timing"]
        assert dispatch(args + ["--out", str(a)]) == 0
        assert dispatch(args + ["--out", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()


class TestGradcheckVerb:
    def test_exit_zero_and_reports_layers(self, capsys):
        code, out, _ = run(capsys, "gradcheck")
        assert code == 0
        for name in ("conv2d", "dense", "batchnorm", "model_dual", "PASS"):
            assert name in out

    def test_corrupted_backward_exits_3(self, capsys, monkeypatch):
        from gradpath.layers import Conv2d
        real = Conv2d.backward
        monkeypatch.setattr(Conv2d, "backward",
                            lambda self, up: -real(self, up))
        code, out, err = run(capsys, "gradcheck")
        assert code == 3
        assert "FAIL" in out


class TestTransform:
    def _pgm(self, tmp_path, pixels):
        path = tmp_path / "in.pgm"
        write_pgm(path, pixels)
        return path

    def test_roundtrip_and_sidecar(self, capsys, tmp_path):
        rng = np.random.default_rng(0)
        src = self._pgm(tmp_path, rng.integers(0, 256, size=(12, 9), dtype=np.uint8))
        dst = tmp_path / "out.pgm"
        code, out, _ = run(capsys, "transform", "--in", str(src), "--out", str(dst))
        assert code == 0
        result = read_pgm(dst)
        assert result.shape == (12, 9)
        sidecar = tmp_path / "out.pgm.bounds.txt"
        assert sidecar.exists()
        assert "mapped linearly" in sidecar.read_text()

    def test_constant_image_maps_to_zero(self, capsys, tmp_path):
        src = self._pgm(tmp_path, np.full((6, 6), 128, dtype=np.uint8))
        dst = tmp_path / "flat.pgm"
        code, _, _ = run(capsys, "transform", "--in", str(src), "--out", str(dst))
        assert code == 0
        assert np.all(read_pgm(dst) == 0)

    def test_gradient_values_rescaled_to_full_range(self, capsys, tmp_path):
        ramp = np.tile(np.arange(0, 240, 16, dtype=np.uint8), (15, 1))
        src = self._pgm(tmp_path, ramp)
        dst = tmp_path / "ramp.pgm"
        assert dispatch(["transform", "--in", str(src), "--out", str(dst)]) == 0
        capsys.readouterr()
        out = read_pgm(dst)
        assert out.min() == 0 and out.max() == 255

    def test_bad_pgm_exits_2(self, capsys, tmp_path):
        bad = tmp_path / "x.pgm"
        bad.write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
        code, _, err = run(capsys, "transform", "--in", str(bad),
                           "--out", str(tmp_path / "y.pgm"))
        assert code == 2

    def test_missing_input_exits_2(self, capsys, tmp_path):
        code, _, _ = run(capsys, "transform", "--in", str(tmp_path / "none.pgm"),
                         "--out", str(tmp_path / "y.pgm"))
        assert code == 2


class TestPgmModule:
    def test_write_read_roundtrip(self, tmp_path):
        img = np.random.default_rng(1).integers(0, 256, size=(5, 7), dtype=np.uint8)
        path = tmp_path / "x.pgm"
        write_pgm(path, img)
        assert np.array_equal(read_pgm(path), img)

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n3 2\n255\n" + bytes(range(6)))
        img = read_pgm(path)
        assert img.shape == (2, 3)
        assert np.array_equal(img.ravel(), range(6))

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 7)
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_16bit_rejected(self, tmp_path):
        path = tmp_path / "w.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(FormatError):
            read_pgm(path)


class TestPlotsModule:
    def test_render_from_csv(self, tmp_path):
        from gradpath.plots import render_from_csv
        from gradpath.train import MetricsRow, write_metrics_csv
        rows = [MetricsRow(e, arch, 1.0 / e, 0.5 + 0.1 * e, 1.2 / e, 0.4 + 0.1 * e, 0.0)
                for arch in ("baseline", "dualpath") for e in (1, 2, 3)]
        csv_path = tmp_path / "r.csv"
        write_metrics_csv(rows, csv_path)
        made = render_from_csv(csv_path)
        assert len(made) == 3
        assert all(p.exists() and p.stat().st_size > 0 for p in made)
