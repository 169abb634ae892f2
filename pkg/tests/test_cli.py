import math

import numpy as np
import pytest

from foagen.audio_io import (
    read_matrix,
    read_wav,
    write_matrix,
    write_matrix_text,
    write_wav,
)
from foagen.cleaning import ClipManifestEntry, write_manifest
from foagen.cli import main
from foagen.foa import MonoSignal, StereoSignal
from foagen.panorama import read_frame, write_frame

RATE = 16000


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    kv = {}
    for line in out.splitlines():
        key, _, value = line.partition("=")
        kv[key] = value
    return code, kv


def _mono_wav(path, n=500, seed=0):
    rng = np.random.default_rng(seed)
    write_wav(MonoSignal(0.3 * rng.standard_normal(n), RATE), path)
    return path


def test_spatialize_doa_round_trip_degrees(tmp_path, capsys):
    src = _mono_wav(tmp_path / "in.wav")
    out = tmp_path / "out.wav"
    code, kv = run_cli(
        capsys, "spatialize", src, out, "--theta", "90", "--degrees"
    )
    assert code == 0
    assert kv["samples"] == "500"
    assert kv["config.encoding"] == "pcm16"

    code, kv = run_cli(capsys, "doa", out, "--degrees")
    assert code == 0
    assert kv["theta"] == "90.000"
    assert kv["phi"] == "0.000"


def test_spatialize_doa_round_trip_radians(tmp_path, capsys):
    src = _mono_wav(tmp_path / "in.wav", n=2000)
    out = tmp_path / "out.wav"
    theta, phi = 0.7, -0.3
    code, _ = run_cli(
        capsys, "spatialize", src, out,
        "--theta", theta, "--phi", phi, "--encoding", "float32",
    )
    assert code == 0
    code, kv = run_cli(capsys, "doa", out)
    assert code == 0
    assert abs(float(kv["theta"]) - theta) < 1e-6
    assert abs(float(kv["phi"]) - phi) < 1e-6


def test_doa_silent_input_fails_cleanly(tmp_path, capsys):
    quiet = tmp_path / "quiet.wav"
    code, _ = run_cli(
        capsys, "spatialize", _mono_wav(quiet, seed=1), quiet,
        "--theta", "0",
    )
    assert code == 0
    silent = tmp_path / "silent.wav"
    write_wav(MonoSignal(np.zeros(100), RATE), silent)
    code, kv = run_cli(capsys, "doa", silent)
    assert code == 1
    assert kv["error"].startswith("ChannelCountUnsupported")

    # actual all-zero FOA: spatialize cannot make one, so build it directly
    from foagen.foa import FoaSignal

    z = np.zeros(100)
    write_wav(FoaSignal(z, z, z, z, RATE), silent)
    code, kv = run_cli(capsys, "doa", silent)
    assert code == 1
    assert kv["error"].startswith("ZeroEnergy")


def test_stereo2foa(tmp_path, capsys):
    rng = np.random.default_rng(2)
    # float32-exact inputs so the disk round trip adds no rounding of its own
    left = (0.25 * rng.standard_normal(300)).astype(np.float32).astype(np.float64)
    right = (0.25 * rng.standard_normal(300)).astype(np.float32).astype(np.float64)
    src = tmp_path / "st.wav"
    write_wav(StereoSignal(left, right, RATE), src)
    out = tmp_path / "foa.wav"
    code, kv = run_cli(capsys, "stereo2foa", src, out)
    assert code == 0
    assert kv["config.encoding"] == "float32"
    foa = read_wav(out)
    np.testing.assert_array_equal(foa.w, (left + right).astype(np.float32))
    np.testing.assert_array_equal(foa.x, (left - right).astype(np.float32))
    assert np.all(foa.y == 0.0)
    assert np.all(foa.z == 0.0)


def test_eval_doa_pair_and_directory(tmp_path, capsys):
    src = _mono_wav(tmp_path / "m.wav", seed=3)
    a = tmp_path / "a.wav"
    run_cli(capsys, "spatialize", src, a, "--theta", "0.5", "--phi", "0.2")
    code, kv = run_cli(capsys, "eval-doa", a, a)
    assert code == 0
    assert float(kv["d_theta"]) == 0.0
    assert float(kv["d_angular"]) == 0.0
    assert kv["evaluated"] == "1"
    assert kv["excluded"] == "0"

    truth_dir = tmp_path / "truth"
    est_dir = tmp_path / "est"
    truth_dir.mkdir()
    est_dir.mkdir()
    for k, theta in enumerate((0.0, 1.0)):
        run_cli(capsys, "spatialize", src, truth_dir / f"{k}.wav", "--theta", theta)
        run_cli(capsys, "spatialize", src, est_dir / f"{k}.wav", "--theta", theta)
    code, kv = run_cli(capsys, "eval-doa", truth_dir, est_dir, "--jobs", "2")
    assert code == 0
    assert kv["evaluated"] == "2"

    (est_dir / "extra.wav").write_bytes((est_dir / "0.wav").read_bytes())
    code, kv = run_cli(capsys, "eval-doa", truth_dir, est_dir)
    assert code == 1
    assert kv["error"].startswith("DimensionMismatch")


def test_eval_fd_and_kl(tmp_path, capsys):
    rng = np.random.default_rng(4)
    a = rng.standard_normal((64, 3))
    write_matrix(tmp_path / "a.fmat", a)
    code, kv = run_cli(capsys, "eval-fd", tmp_path / "a.fmat", tmp_path / "a.fmat")
    assert code == 0
    assert float(kv["fd"]) < 1e-8

    write_matrix_text(tmp_path / "p.txt", np.array([0.5, 0.5]))
    write_matrix_text(tmp_path / "q.txt", np.array([0.25, 0.75]))
    code, kv = run_cli(capsys, "eval-kl", tmp_path / "p.txt", tmp_path / "q.txt")
    assert code == 0
    expect = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
    assert abs(float(kv["kl"]) - expect) < 1e-12

    write_matrix_text(tmp_path / "z.txt", np.array([1.0, 0.0]))
    code, kv = run_cli(capsys, "eval-kl", tmp_path / "p.txt", tmp_path / "z.txt")
    assert code == 1
    assert kv["error"].startswith("SupportViolation")


def test_eval_stft_identical_files(tmp_path, capsys):
    src = _mono_wav(tmp_path / "m.wav", n=4000, seed=5)
    a = tmp_path / "a.wav"
    run_cli(capsys, "spatialize", src, a, "--theta", "0.3", "--encoding", "float32")
    code, kv = run_cli(capsys, "eval-stft", a, a, "--windows", "256,512")
    assert code == 0
    assert float(kv["stft_distance"]) == 0.0


def test_pad_erp(tmp_path, capsys):
    frame = np.random.default_rng(6).random((4, 8, 1))
    write_frame(tmp_path / "erp.fframe", frame)
    code, kv = run_cli(
        capsys, "pad-erp", tmp_path / "erp.fframe", tmp_path / "sq.fframe"
    )
    assert code == 0
    assert kv["out_height"] == "8"
    assert kv["out_width"] == "8"
    assert read_frame(tmp_path / "sq.fframe").shape == (8, 8, 1)


def test_cut_fov_six_cuts(tmp_path, capsys):
    frame = np.random.default_rng(7).random((8, 16, 1))
    write_frame(tmp_path / "erp.fframe", frame)
    outdir = tmp_path / "cuts"
    code, kv = run_cli(
        capsys, "cut-fov", tmp_path / "erp.fframe", outdir,
        "--preset", "6cuts", "--width", "16", "--height", "16",
    )
    assert code == 0
    assert kv["frames"] == "6"
    assert kv["frame.4.pitch"] == "90.000"
    assert kv["frame.5.pitch"] == "-90.000"
    for i in range(6):
        cut = read_frame(outdir / f"erp_cut{i}.fframe")
        assert cut.shape == (16, 16, 1)


def test_clean_pipeline(tmp_path, capsys):
    quiet = np.repeat([0.001] * 50, 20)
    loud = np.repeat([0.5] * 50, 20)
    write_wav(MonoSignal(quiet, 1000), tmp_path / "quiet.wav")
    write_wav(MonoSignal(loud, 1000), tmp_path / "loud.wav")
    entries = [
        ClipManifestEntry("a", "quiet.wav", 1.0, 1000, word_count=6),
        ClipManifestEntry("b", "loud.wav", 1.0, 1000, word_count=0),
    ]
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(manifest, entries)
    report = tmp_path / "report.jsonl"
    code, kv = run_cli(
        capsys, "clean", manifest, "--report", report, "--base-dir", tmp_path
    )
    assert code == 0
    assert kv["evaluated"] == "2"
    assert kv["kept"] == "1"
    assert kv["removed"] == "1"
    assert kv["removed.silent"] == "1"
    assert kv["removed.speech"] == "1"
    assert kv["removed.alignment"] == "0"
    assert report.exists()
    assert (tmp_path / "report.jsonl.summary").exists()


def test_segment(tmp_path, capsys):
    write_wav(MonoSignal(np.ones(2500) * 0.1, 1000), tmp_path / "long.wav")
    outdir = tmp_path / "segs"
    code, kv = run_cli(
        capsys, "segment", tmp_path / "long.wav",
        "--clip-seconds", "1.0", "--outdir", outdir,
    )
    assert code == 0
    assert kv["segments"] == "2"
    assert kv["segment.0"] == "0:1000"
    assert kv["segment.1"] == "1000:2000"
    assert read_wav(outdir / "long_seg000.wav").n_samples == 1000


def test_mask_stats(capsys):
    code, kv = run_cli(
        capsys, "mask-stats", "--frames", "30", "--draws", "400",
        "--p-cond", "0.3", "--spans", "2", "--min-len", "3", "--seed", "1",
    )
    assert code == 0
    assert kv["spans_ok"] == "true"
    assert int(kv["partial"]) + int(kv["full"]) == 400
    assert abs(float(kv["partial_fraction"]) - 0.3) < 0.08


def test_fm_train_on_matrix_data(tmp_path, capsys):
    data = np.tile([[2.0, -1.0]], (16, 1))
    write_matrix(tmp_path / "x.fmat", data)
    ckpt = tmp_path / "model.fgvm"

    def train_once():
        return run_cli(
            capsys, "fm-train", "--data", tmp_path / "x.fmat",
            "--steps", "250", "--lr", "0.02", "--batch", "4", "--seed", "3",
            "--hidden", "8", "--save", ckpt,
        )

    code, kv = train_once()
    assert code == 0
    assert kv["steps"] == "250"
    assert float(kv["trail_loss"]) < float(kv["lead_loss"])
    first_final = kv["final_loss"]
    code, kv = train_once()
    assert kv["final_loss"] == first_final  # same seed, same trace

    code, kv = run_cli(
        capsys, "fm-sample", "--model", ckpt,
        "--frames", "32", "--steps", "16", "--seed", "5",
        "--out", tmp_path / "samples.fmat",
    )
    assert code == 0
    assert kv["samples"] == "32"
    assert kv["config.cfg_scale"] == "5"
    samples = read_matrix(tmp_path / "samples.fmat")
    assert samples.shape == (32, 2)
    assert np.allclose(samples.mean(axis=0), [float(kv["mean.0"]), float(kv["mean.1"])])


def test_fm_train_source_is_exclusive(tmp_path, capsys):
    write_matrix(tmp_path / "x.fmat", np.zeros((4, 2)))
    code, kv = run_cli(
        capsys, "fm-train", "--fixture", "mixture", "--data", tmp_path / "x.fmat"
    )
    assert code == 1
    assert kv["error"].startswith("DimensionMismatch")
    code, kv = run_cli(capsys, "fm-train")
    assert code == 1
    assert kv["error"].startswith("DimensionMismatch")


def test_fm_train_condition_rows_must_match(tmp_path, capsys):
    write_matrix(tmp_path / "x.fmat", np.zeros((4, 2)))
    write_matrix(tmp_path / "c.fmat", np.zeros((3, 1)))
    code, kv = run_cli(
        capsys, "fm-train", "--data", tmp_path / "x.fmat",
        "--cond", tmp_path / "c.fmat", "--steps", "1",
    )
    assert code == 1
    assert kv["error"].startswith("DimensionMismatch")


def test_fm_sample_condition_flags_exclusive(tmp_path, capsys):
    data = np.tile([[1.0, 1.0]], (8, 1))
    write_matrix(tmp_path / "x.fmat", data)
    ckpt = tmp_path / "m.fgvm"
    run_cli(
        capsys, "fm-train", "--data", tmp_path / "x.fmat",
        "--steps", "5", "--batch", "2", "--seed", "0", "--save", ckpt,
    )
    write_matrix_text(tmp_path / "c.txt", np.array([1.0, 0.0]))
    code, kv = run_cli(
        capsys, "fm-sample", "--model", ckpt,
        "--cond", tmp_path / "c.txt", "--mixture-class", "1",
    )
    assert code == 1
    assert kv["error"].startswith("DimensionMismatch")


def test_usage_errors_exit_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["spatialize", "in.wav", "out.wav"])  # --theta is required
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 2
    capsys.readouterr()  # swallow argparse noise


def test_jobs_default_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FOAGEN_JOBS", "4")
    src = _mono_wav(tmp_path / "m.wav", seed=8)
    a = tmp_path / "a.wav"
    run_cli(capsys, "spatialize", src, a, "--theta", "0")
    code, kv = run_cli(capsys, "eval-doa", a, a)
    assert code == 0
    assert kv["config.jobs"] == "4"
