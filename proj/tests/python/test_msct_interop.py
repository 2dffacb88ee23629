"""Cross-language checks for the MSCT format and the model tap.

Run as a script: python test_msct_interop.py --msc path/to/msc --work scratch/
"""

import argparse
import json
import shutil
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np

import msct

FAILED = []


def check(ok, what):
    print(("ok   " if ok else "FAIL ") + what)
    if not ok:
        FAILED.append(what)


def expect_error(fn, text, what):
    try:
        fn()
    except msct.MsctError as e:
        check(text in str(e), f"{what} ({e})")
        return
    check(False, f"{what} (no error)")


def run(msc, *args):
    r = subprocess.run([msc, *map(str, args)], capture_output=True, text=True)
    if r.returncode != 0:
        print(r.stderr)
    return r.returncode


def format_cases(work):
    zero = msct.encode(np.zeros(1, dtype=np.float32))
    check(len(zero) == 20 and zero[-4:] == b"\0\0\0\0", "scalar f32 layout")
    check(zero[:8] == b"MSCT" + struct.pack("<HBB", 1, 0, 1), "header bytes")

    rng = np.random.default_rng(0)
    for arr in (rng.standard_normal((2, 3)).astype(np.float32), rng.standard_normal((4, 3, 2)),
                np.arange(-5, 7, dtype=np.int64).reshape(3, 4)):
        back = msct.decode(msct.encode(arr))
        check(back.dtype == arr.dtype and back.shape == arr.shape and np.array_equal(back, arr),
              f"round trip {arr.dtype} {arr.shape}")

    good = msct.encode(np.ones((2, 3)))
    expect_error(lambda: msct.decode(b"XXXX" + good[4:]), "bad magic", "bad magic")
    expect_error(lambda: msct.decode(good[:-3]), "truncated", "truncated payload")
    expect_error(lambda: msct.decode(good[:4] + struct.pack("<H", 2) + good[6:]), "version", "unknown version")
    expect_error(lambda: msct.decode(good[:6] + b"\x07" + good[7:]), "dtype", "unknown dtype")


def cpp_to_python(msc, work):
    synth = work / "synth"
    check(run(msc, "synth-gen", "--d", 48, "--k-med", 2, "--n-prompts", 730, "--heads", 2, "--queries", 20,
              "--seed", 4, "--out", synth) == 0, "synth-gen runs")
    cache = msct.Cache.open(synth)
    cache.validate()
    check(cache["activations"].shape == (730, 48), "activations shape")
    check(cache["doy"].dtype == np.int64 and cache["doy"].min() >= 1 and cache["doy"].max() <= 365, "doy labels")
    # Python re-encoding reproduces the C++ bytes for every tensor.
    same = all(msct.encode(cache[n]) == (synth / f"{n}.msct").read_bytes() for n in cache.names())
    check(same, "python encoding is byte-identical to C++")
    med = cache["mediator.basis"]
    check(np.allclose(med @ med.T, np.eye(2), atol=1e-10), "mediator frame orthonormal")

    # Write a modified cache from Python and read it back with C++.
    mine = msct.Cache(dict(cache.meta))
    for n in cache.names():
        mine.put(n, cache[n])
    out = work / "py_cache"
    mine.save(out)
    check(run(msc, "probe-fit", "--cache", out, "--out", work / "probe_py") == 0, "C++ reads the python cache")
    check(run(msc, "probe-fit", "--cache", synth, "--out", work / "probe_cpp") == 0, "probe-fit on the original")
    a = json.loads((work / "probe_py" / "report.json").read_text())
    b = json.loads((work / "probe_cpp" / "report.json").read_text())
    check(a["provenance"]["cache_hash"] == b["provenance"]["cache_hash"], "cache hash survives the python rewrite")
    check("cv_r2" in a and a["cv_r2"] == b["cv_r2"], "identical probe results")
    basis = msct.read_tensor(work / "probe_py" / "probe.basis.msct")
    check(basis.shape[1] == 48 and np.allclose(basis @ basis.T, np.eye(basis.shape[0]), atol=1e-8),
          "probe basis readable and orthonormal")


def tap_cases(msc, work):
    try:
        import torch
        from transformer_lens import HookedTransformer, HookedTransformerConfig
    except ImportError:
        print("skip model tap: transformer_lens not available")
        return
    import model_tap

    def tiny():
        torch.manual_seed(0)
        cfg = HookedTransformerConfig(n_layers=2, d_model=32, n_ctx=48, d_head=8, n_heads=4, d_vocab=96,
                                      act_fn="relu", normalization_type="LN", seed=0)
        return HookedTransformer(cfg)

    def tokenize(prompts):
        return np.array([[0] + [min(ord(c), 95) for c in p] for p in prompts])

    spec = model_tap.TapSpec(model="tiny-random", layer=1, layers=[0], templates=["On {date} we", "It was {date}."],
                             out=str(work / "tap"), batch_size=64)
    first = model_tap.extract_activations(spec, tiny(), tokenize)
    second = model_tap.extract_activations(spec, tiny(), tokenize)
    check(np.max(np.abs(first["doy_means"] - second["doy_means"])) < 1e-5, "tap doy means repeat")
    check(first["activations"].shape == (730, 32) and first.meta["d"] == 32, "tap width matches the model")
    check(first["qk.wq"].shape == (8, 8, 32) and first["qk.layer_head"].shape == (8, 2), "tap head slices")
    check(first["gradients"].shape == (730, 32) and np.isfinite(first["gradients"]).all(), "tap gradients")

    first.save(spec.out)
    reread = msct.Cache.open(spec.out)
    reread.validate()
    for n in reread.names():
        reread[n]
    check(True, "every tapped tensor reads back")
    check(run(msc, "probe-fit", "--cache", spec.out, "--folds", 5, "--out", work / "tap_probe") == 0,
          "probe-fit runs on the tapped cache")
    check(run(msc, "qk-scan", "--cache", spec.out, "--n-perm", 50, "--out", work / "tap_qk") == 0,
          "qk-scan runs on the tapped cache")

    bad = model_tap.TapSpec(model="tiny-random", layer=5, templates=["{date}"], out="unused")
    expect_error(lambda: model_tap.extract_activations(bad, tiny(), tokenize), "outside model depth", "layer check")
    empty = model_tap.TapSpec(model="tiny-random", layer=0, templates=[], out="unused")
    expect_error(lambda: model_tap.extract_activations(empty, tiny(), tokenize), "no prompt", "empty templates")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--msc", required=True)
    ap.add_argument("--work", required=True)
    a = ap.parse_args()
    work = Path(a.work)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    format_cases(work)
    cpp_to_python(a.msc, work)
    tap_cases(a.msc, work)
    print(f"{len(FAILED)} failed")
    return 1 if FAILED else 0


if __name__ == "__main__":
    sys.exit(main())
