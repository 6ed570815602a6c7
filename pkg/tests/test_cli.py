import io

import numpy as np
import pytest
from scipy.io import wavfile

from fodirac.ambisonics import Direction
from fodirac.cli import main
from fodirac.evaluation import gen_scene, plane_wave_scene
from fodirac.wavio import WavError, read_ambix, write_ambix


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and " " not in line)


@pytest.fixture(scope="module")
def wav16(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "in.wav"
    s = gen_scene(plane_wave_scene(Direction.from_degrees(40, 15), 0.0, 1.0, seed=1))
    write_ambix(p, 0.3 * s.frame.signals, 48000)
    return p


def test_wav_round_trip(tmp_path):
    x = np.random.default_rng(0).standard_normal((9, 100)).astype(np.float32)
    write_ambix(tmp_path / "a.wav", x, 32000)
    f = read_ambix(tmp_path / "a.wav")
    assert f.sample_rate == 32000 and f.order == 2
    np.testing.assert_array_equal(f.signals, x)


def test_wav_validation(tmp_path):
    wavfile.write(tmp_path / "i16.wav", 48000, np.zeros((10, 4), np.int16))
    with pytest.raises(WavError, match="32-bit float"):
        read_ambix(tmp_path / "i16.wav")
    wavfile.write(tmp_path / "r.wav", 44100, np.zeros((10, 4), np.float32))
    with pytest.raises(WavError, match="sample rate"):
        read_ambix(tmp_path / "r.wav")
    (tmp_path / "junk.wav").write_bytes(b"not a wav")
    with pytest.raises(WavError):
        read_ambix(tmp_path / "junk.wav")


def test_encode_64k_stats(wav16, tmp_path):
    code, out = run("encode", wav16, tmp_path / "o.adc", "--bitrate", "64000")
    s = kv(out)
    assert code == 0 and s["tc_mode"] == "2" and s["frames"] == "50"
    assert float(s["param_bitrate_max_bps"]) <= 10000


def test_encode_32k_file_size(wav16, tmp_path):
    assert run("encode", wav16, tmp_path / "o.adc", "--bitrate", "32k")[0] == 0
    assert (tmp_path / "o.adc").stat().st_size == 14 + 4000


def test_encode_rejects_bad_input(tmp_path, wav16, capsys):
    wavfile.write(tmp_path / "three.wav", 48000, np.zeros((100, 3), np.float32))
    assert run("encode", tmp_path / "three.wav", tmp_path / "x.adc", "--bitrate", "64000")[0] == 2
    assert "expected 4/9/16 channels" in capsys.readouterr().err
    assert run("encode", wav16, tmp_path / "x.adc", "--bitrate", "50000")[0] == 2
    assert run("encode", wav16, tmp_path / "x.adc", "--bitrate", "64000", "--tc-mode", "3")[0] == 2


def test_decode_and_inspect(wav16, tmp_path):
    adc = tmp_path / "o.adc"
    run("encode", wav16, adc, "--bitrate", "128000", "--transport", "passthrough")
    code, out = run("decode", adc, tmp_path / "d.wav")
    assert code == 0 and kv(out)["errors"] == "0"
    f = read_ambix(tmp_path / "d.wav")
    assert f.signals.shape == (16, 48000) and f.sample_rate == 48000

    run("encode", wav16, adc, "--bitrate", "64000")
    code, out = run("inspect", adc)
    assert code == 0 and kv(out)["bitrate"] == "64000"
    lines = [ln for ln in out.splitlines() if ln.startswith("frame=")]
    assert len(lines) == 50 * 5
    late = [ln for ln in lines if int(ln.split()[0][6:]) >= 5]
    assert all("psi=0.000" in ln for ln in late)
    doas = {ln.split("doa=")[1] for ln in late if " band=0 " in ln}
    assert len(doas) == 1


def test_corrupted_stream_exit_3(wav16, tmp_path, capsys):
    adc = tmp_path / "o.adc"
    run("encode", wav16, adc, "--bitrate", "64000")
    data = bytearray(adc.read_bytes())
    data[14 + 160 * 5 + 2:14 + 160 * 5 + 4] = b"\xff\xff"
    (tmp_path / "bad.adc").write_bytes(bytes(data))
    code, out = run("inspect", tmp_path / "bad.adc")
    assert code == 3 and "frame 5" in capsys.readouterr().err
    assert "frame=4 band=4" in out and "frame=5" not in out
    code, out = run("decode", tmp_path / "bad.adc", tmp_path / "d.wav")
    assert code == 3 and read_ambix(tmp_path / "d.wav").signals.shape == (16, 48000)
    (tmp_path / "hdr.adc").write_bytes(b"XXXX" + bytes(data[4:]))
    assert run("inspect", tmp_path / "hdr.adc")[0] == 3
    assert run("decode", tmp_path / "hdr.adc", tmp_path / "e.wav")[0] == 3


def test_eval_writes_csv_and_png(tmp_path):
    code, out = run("eval", "--sweep", "--ratios", "0", "0.5", "--repeats", "1", "--duration", "0.3",
                    "--scene", "mix", "--config", "32000", "--out", tmp_path)
    assert code == 0
    for name in ("sweep.csv", "sweep.png", "metrics_mix_32k.csv", "metrics_mix_32k.png"):
        assert (tmp_path / name).stat().st_size > 0
    assert (tmp_path / "sweep.png").read_bytes()[:4] == b"\x89PNG"
    assert (tmp_path / "sweep.csv").read_text().startswith("psi_lo,psi_hi")
    assert run("eval", "--out", tmp_path)[0] == 2
