#!/usr/bin/env python3
"""Smoke test for the nyqscm_py extension module.

Builds nothing itself: run `cargo build -p nyqscm-py --release` first (or
`maturin develop`). The script locates the cdylib in target/ and loads it.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def load_module():
    try:
        import nyqscm_py  # already installed (e.g. via maturin develop)

        return nyqscm_py
    except ImportError:
        pass
    root = Path(__file__).resolve().parents[1]
    names = {
        "linux": ("libnyqscm_py.so", "nyqscm_py.so"),
        "darwin": ("libnyqscm_py.dylib", "nyqscm_py.so"),
        "win32": ("nyqscm_py.dll", "nyqscm_py.pyd"),
    }
    src_name, dst_name = names.get(sys.platform, names["linux"])
    for profile in ("release", "debug"):
        built = root / "target" / profile / src_name
        if built.exists():
            stage = Path(tempfile.mkdtemp(prefix="nyqscm_py_"))
            shutil.copy2(built, stage / dst_name)
            sys.path.insert(0, str(stage))
            import nyqscm_py

            return nyqscm_py
    sys.exit(
        "nyqscm_py cdylib not found; run `cargo build -p nyqscm-py --release` first"
    )


def check(name, condition, detail=""):
    status = "PASS" if condition else "FAIL"
    print(f"{status} {name} {detail}")
    if not condition:
        sys.exit(1)


def main():
    m = load_module()
    print(f"nyqscm_py {m.version()}; presets: {', '.join(m.presets())}")

    # RRC taps: symmetric, unit energy.
    taps = m.design_rrc(0.1, 32, 4)
    energy = sum(t * t for t in taps)
    symmetric = all(
        abs(taps[i] - taps[len(taps) - 1 - i]) < 1e-15 for i in range(len(taps) // 2)
    )
    check("design_rrc", symmetric and abs(energy - 1.0) < 1e-9, f"({len(taps)} taps)")

    # Dispersion nulls against the closed form for beta2 L = 1.085e-21 s^2.
    nulls = m.dispersion_nulls(-21.7, 50.0, 3)
    expected = [8.56e9, 14.83e9, 19.15e9, 30.87e9]
    check(
        "dispersion_nulls",
        abs(nulls[0] - expected[0]) < 2e7 and abs(nulls[1] - expected[1]) < 2e7,
        f"(first null {nulls[0] / 1e9:.2f} GHz)",
    )
    check(
        "small_signal_response",
        abs(m.small_signal_response(-21.7, 50.0, nulls[0])) < 1e-9,
        "(zero at the first null)",
    )

    # Band planning on the analytic fading response.
    freqs = [k * 5e7 for k in range(0, 641)]  # 0..32 GHz
    mags = [
        20.0 * math.log10(max(abs(m.small_signal_response(-21.7, 50.0, f)), 1e-6))
        for f in freqs
    ]
    plan = m.plan_bands(freqs, mags, 10.0, 1e8, 30.5e9)
    import json

    bands = json.loads(plan)["bands"]
    check("plan_bands", len(bands) == 7, f"({len(bands)} bands)")

    # Entropy loading: closed-form two-band case.
    h = m.entropy_loading([3.0, 2.0], [2e9, 1e9], [6.0, 6.0], 9e9)
    check(
        "entropy_loading",
        abs(h[0] - 10.0 / 3.0) < 1e-9 and abs(h[1] - 7.0 / 3.0) < 1e-9,
        f"(H = {h[0]:.4f}, {h[1]:.4f})",
    )

    # Maxwell-Boltzmann shaping hits its entropy target.
    points, priors = m.mb_constellation(16, 3.5)
    ent = -sum(p * math.log2(p) for p in priors if p > 0)
    check("mb_constellation", abs(ent - 3.5) < 1e-6, f"(entropy {ent:.6f})")

    # CCDM round trip with exact composition.
    comp = [6, 2]
    k = m.ccdm_input_bits(comp)
    bits = [(i * 5) % 2 for i in range(k)]
    seq = m.ccdm_encode(bits, comp)
    decoded = list(m.ccdm_decode(seq, comp))
    check(
        "ccdm",
        seq.count(0) == 6 and seq.count(1) == 2 and decoded == bits,
        f"(k={k}, n={len(seq)})",
    )

    # FEC overhead at the HD-FEC NGMI threshold.
    oh = m.fec_overhead(0.9346)
    check("fec_overhead", abs(oh - 0.07) < 1e-4, f"(OH = {oh:.4f})")

    # Perfect LLRs give NGMI ~ 1; zero LLRs give exactly 0.
    g1 = m.ngmi([0, 1, 0, 1], [50.0, -50.0, 50.0, -50.0], 2)
    g0 = m.ngmi([0, 1, 0, 1], [0.0, 0.0, 0.0, 0.0], 2)
    check("ngmi", g1 > 0.999 and abs(g0) < 1e-12, f"(saturated {g1:.4f})")

    avg = m.average_ngmi([(2.0, 2.0, 0.90), (1.0, 2.0, 0.96)])
    check("average_ngmi", abs(avg - 0.92) < 1e-12, f"({avg:.4f})")

    # A full sinusoid peaks 3.01 dB over its mean power.
    sine = [math.sin(2 * math.pi * i / 1000) for i in range(100_000)]
    papr = m.measure_papr(sine, 100.0)
    check("measure_papr", abs(papr - 3.0103) < 0.02, f"({papr:.3f} dB)")

    # A fast end-to-end run: OBTB must be error-free.
    report = json.loads(m.run_preset("obtb-uniform", seed=7, payload_symbols=1024))
    worst = max(b["ber"] for b in report["bands"])
    check(
        "run_preset",
        worst == 0.0 and report["aggregate"]["all_bands_hd_ok"],
        f"(7-band OBTB, worst BER {worst})",
    )

    print("smoke test complete")


if __name__ == "__main__":
    main()
