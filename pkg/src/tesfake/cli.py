"""Command-line runners: ``tesfake iv-sweep | photon-histogram | attack``."""

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (NotBlindable, calibrate_blinding, faked_state_response, plan_wavelength_fake,
                      superlinearity_index)
from .config import ConfigError, bundled_profile, file_hash, get_float, get_floats, get_int, load_profile, read_config
from .qkd import ABORT_QBER, AttackScenario, ClickModel, Undefined, analytic_qber, click_model_from_physics, run_bb84_attack
from .readout import FitFailed, calibrate_thresholds, histogram, histogram_to_csv
from .tes import NoConvergence, bias_sweep, iv_curve, match_cw_to_bath

OUTPUT_ENV = "TESFAKE_OUTPUT_DIR"
DEFAULT_OUTPUT = "tesfake-output"


@dataclass(frozen=True)
class RunManifest:
    command: str
    profile_path: str
    profile_hash: str
    scenario_path: str
    scenario_hash: str
    seed: int
    trials: int
    output_dir: str
    tool_version: str

    @property
    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class _Run:
    def __init__(self, manifest):
        self.manifest = manifest
        self.out = Path(manifest.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.errors = []

    @property
    def comment(self):
        return f"manifest {self.manifest.digest}"

    def write_csv(self, name, header, rows):
        with open(self.out / name, "w", newline="") as fh:
            fh.write(f"# {self.comment}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])

    def finish(self, summary):
        summary = {"manifest": asdict(self.manifest), "manifest_hash": self.manifest.digest,
                   "errors": self.errors, **summary}
        (self.out / "manifest.json").write_text(json.dumps(asdict(self.manifest), indent=2, sort_keys=True) + "\n")
        (self.out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
        return 1 if self.errors else 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _scenario_section(args, name):
    if args.scenario is None:
        return configparser.ConfigParser()[configparser.DEFAULTSECT], None
    cp = read_config(args.scenario)
    sec = cp[name] if cp.has_section(name) else cp[configparser.DEFAULTSECT]
    return sec, cp


def _start(args, command):
    profile = args.profile or str(bundled_profile())
    detector = load_profile(profile)
    scen = args.scenario
    manifest = RunManifest(command, str(profile), file_hash(profile), str(scen or ""),
                           file_hash(scen) if scen else "", args.seed, args.trials or 0,
                           str(args.out), __version__)
    return detector, _Run(manifest)


def cmd_iv_sweep(args):
    sec, _ = _scenario_section(args, "iv_sweep")
    detector, run = _start(args, "iv-sweep")
    p = detector.params
    sweep = bias_sweep(get_float(sec, "bias_start", 1.5e-3), get_float(sec, "bias_stop", 0.0),
                       get_int(sec, "bias_points", 151))
    baths = get_floats(sec, "bath_temperatures", [0.100, 0.140, 0.160, 0.200])
    cws = get_floats(sec, "cw_powers", [0.0, 0.1e-9, 0.25e-9, 0.5e-9])
    summary = {"bath_curves": [], "cw_curves": []}
    for tb in baths:
        try:
            curve = iv_curve(p, sweep, t_bath=tb)
        except NoConvergence as exc:
            run.errors.append(f"t_bath={tb:g} K: {exc}")
            continue
        name = f"iv_tbath_{tb * 1e3:g}mK.csv"
        run.write_csv(name, ["v_tes_V", "i_tes_A"], curve)
        entry = {"t_bath": tb, "file": name}
        if tb >= p.t_critical + 10 * p.transition_width:
            v, i = curve[:, 0], curve[:, 1]
            slope, icpt = np.polyfit(v, i, 1)
            resid = i - (slope * v + icpt)
            r2 = 1 - np.sum(resid**2) / np.sum((i - i.mean()) ** 2)
            entry["ohmic_check"] = {"slope_S": slope, "expected_S": 1 / p.r_normal, "r_squared": r2,
                                    "slope_within_1pct": bool(abs(slope * p.r_normal - 1) < 0.01)}
        summary["bath_curves"].append(entry)
    for cw in cws:
        absorbed = detector.absorbed_cw(cw)
        try:
            curve = iv_curve(p, sweep, cw_power=absorbed)
            tb_eq, res = match_cw_to_bath(p, absorbed, sweep)
        except NoConvergence as exc:
            run.errors.append(f"cw_power={cw:g} W: {exc}")
            continue
        name = f"iv_cw_{cw * 1e12:g}pW.csv"
        run.write_csv(name, ["v_tes_V", "i_tes_A"], curve)
        summary["cw_curves"].append({"cw_power_W": cw, "absorbed_W": absorbed, "file": name,
                                     "equivalent_t_bath_K": tb_eq, "rms_residual_A": res})
    return run.finish(summary)


def cmd_photon_histogram(args):
    sec, _ = _scenario_section(args, "photon_histogram")
    trials = args.trials if args.trials is not None else get_int(sec, "trials", 20_000)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    args.trials = trials
    detector, run = _start(args, "photon-histogram")
    wavelengths = get_floats(sec, "wavelengths", [450e-9, 780e-9, 1550e-9])
    means = get_floats(sec, "mean_photon_numbers",
                       [1.0 / detector.coupling_at(w) for w in wavelengths])
    if len(means) == 1:
        means = means * len(wavelengths)
    if len(means) != len(wavelengths):
        raise ConfigError("[photon_histogram] mean_photon_numbers must match wavelengths")
    bin_width = get_float(sec, "bin_width", 0.002)
    max_n = get_int(sec, "max_n", 3)
    peaks = {}
    summary = {"wavelengths": []}
    for k, (lam, mu) in enumerate(zip(wavelengths, means)):
        n, v = detector.weak_coherent_run(mu, lam, trials, args.seed + k)
        tag = f"{lam * 1e9:g}nm"
        histogram_to_csv(histogram(v, bin_width), run.out / f"histogram_{tag}.csv", run.comment)
        entry = {"wavelength_m": lam, "mean_photon_number_at_fiber": mu,
                 "mean_absorbed": float(n.mean()), "file": f"histogram_{tag}.csv"}
        try:
            th = calibrate_thresholds(v, max_n)
        except FitFailed as exc:
            run.errors.append(f"{tag}: {exc}")
            entry["fit_error"] = str(exc)
        else:
            cp = configparser.ConfigParser()
            cp["thresholds"] = th.to_config()
            with open(run.out / f"thresholds_{tag}.ini", "w") as fh:
                fh.write(f"# {run.comment}\n")
                cp.write(fh)
            peaks[lam] = th.means
            entry["peak_means_V"] = list(th.means)
            entry["boundaries_V"] = list(th.boundaries)
        summary["wavelengths"].append(entry)
    if len(peaks) > 1:
        target = min(peaks)
        overlap = []
        for lam in sorted(peaks):
            if lam == target:
                continue
            plan = plan_wavelength_fake(1, target, lam)
            if plan.fake_n < len(peaks[lam]):
                v_t, v_f = peaks[target][1], peaks[lam][plan.fake_n]
                overlap.append({"target": f"1@{target * 1e9:g}nm", "fake": f"{plan.fake_n}@{lam * 1e9:g}nm",
                                "energy_mismatch": plan.energy_mismatch, "target_peak_V": v_t,
                                "fake_peak_V": v_f, "peak_offset": (v_f - v_t) / v_t})
        summary["overlap"] = overlap
    return run.finish(summary)


def _attack_scenario(sec, args):
    trials = args.trials if args.trials is not None else get_int(sec, "trials", 1_000_000)
    return AttackScenario(
        signal_wavelength=get_float(sec, "signal_wavelength", 780e-9),
        attack_wavelength=get_float(sec, "attack_wavelength", 1550e-9),
        blinding_power=get_float(sec, "blinding_power", 0.25e-9),
        fake_pulse_energy=get_float(sec, "fake_pulse_energy", 2.4e-18),
        channel_transmission=get_float(sec, "channel_transmission", 1.0),
        trials=trials, seed=args.seed)


def cmd_attack(args):
    sec, cp = _scenario_section(args, "attack")
    try:
        scenario = _attack_scenario(sec, args)
    except ValueError as exc:
        raise ConfigError(f"[attack] {exc}") from exc
    args.trials = scenario.trials
    rule = sec.get("double_click_rule", "random")
    detector, run = _start(args, "attack")
    summary = {"scenario": asdict(scenario)}
    lines = [f"tesfake attack report ({run.comment})", ""]
    if cp is not None and cp.has_section("oracle"):
        osec = cp["oracle"]
        model = ClickModel(get_float(osec, "p_click_full"), get_float(osec, "p_click_half"), rule)
        summary["mode"] = "oracle"
        lines.append("mode: oracle (user-supplied click model)")
    else:
        summary["mode"] = "physics"
        lines.append("mode: physics")
        cal_trials = get_int(sec, "calibration_trials", 10_000)
        try:
            model = _physics_model(detector, scenario, sec, cal_trials, rule, run, summary, lines)
        except (FitFailed, NotBlindable, NoConvergence) as exc:
            run.errors.append(str(exc))
            lines.append(f"error: {exc}")
            (run.out / "report.txt").write_text("\n".join(lines) + "\n")
            return run.finish(summary)
    summary["click_model"] = asdict(model)
    lines.append(f"p_click_full = {model.p_click_full:.4f}  p_click_half = {model.p_click_half:.4f}  "
                 f"double clicks: {model.double_click_rule}")
    try:
        summary["analytic_qber"] = analytic_qber(model)
        lines.append(f"closed-form QBER = {100 * summary['analytic_qber']:.2f}%")
    except Undefined as exc:
        run.errors.append(str(exc))
        lines.append(f"closed-form QBER undefined: {exc}")
    stats = run_bb84_attack(scenario, model)
    lo, hi = stats.qber_ci()
    summary["stats"] = asdict(stats)
    summary["qber_ci95"] = [lo, hi]
    lines += [f"sent {stats.sent}, sifted {stats.sifted}, sifted detections {stats.sifted_detections}, "
              f"errors {stats.errors}, double clicks {stats.double_clicks}",
              f"Monte Carlo QBER = {100 * stats.qber:.2f}% (95% CI {100 * lo:.2f}-{100 * hi:.2f}%)",
              f"abort threshold {100 * ABORT_QBER:.0f}%: "
              + ("aborted" if stats.verdict == "aborted-by-qber" else "not aborted"),
              f"induced loss = {100 * stats.induced_loss:.1f}%, channel transmission = "
              f"{100 * scenario.channel_transmission:.1f}%",
              f"verdict: {stats.verdict}",
              "note: covert means induced loss <= honest channel loss; the opposite reading "
              "(channel loss lower than induced loss) would not hide the attack.",
              f"seed {scenario.seed}, profile hash {run.manifest.profile_hash[:16]}"]
    (run.out / "report.txt").write_text("\n".join(lines) + "\n")
    return run.finish(summary)


def _physics_model(detector, scenario, sec, cal_trials, rule, run, summary, lines):
    lam = scenario.signal_wavelength
    n, v = detector.weak_coherent_run(1.0 / detector.coupling_at(lam), lam, cal_trials, scenario.seed)
    thresholds = calibrate_thresholds(v, 2)
    if "blinding_power" in sec:
        grid = [scenario.blinding_power]
    else:
        grid = np.arange(get_float(sec, "power_grid_start", 0.01e-9),
                         get_float(sec, "power_grid_stop", 1.0e-9) * (1 + 1e-9),
                         get_float(sec, "power_grid_step", 0.01e-9))
    cal = calibrate_blinding(detector, grid, thresholds, trials=cal_trials, rng_seed=scenario.seed,
                             photon_wavelength=lam)
    energies = get_floats(sec, "fake_energy_grid", list(np.linspace(1.2e-18, 9.6e-18, 8)))
    resp = faked_state_response(detector, cal, energies, cal_trials, scenario.seed)
    run.write_csv("fake_response.csv", ["pulse_energy_J", "mean_vmax_V", "std_vmax_V"], resp.rows())
    model = click_model_from_physics(detector, scenario, cal, thresholds, cal_trials, scenario.seed, rule)
    try:
        sli = superlinearity_index(resp.energies, resp.mean_vmax)
    except ValueError:
        sli = float("nan")
    summary["calibration"] = {
        "single_photon_threshold_V": thresholds.single_photon_threshold,
        "blinding_power_W": cal.cw_power, "fraction_below_threshold": cal.fraction_below_threshold,
        "blinded_resistance_ohm": cal.blinded_resistance(detector.params),
        "unblinded_single_photon_vmax_V": cal.unblinded_response,
        "blinded_single_photon_vmax_V": cal.single_photon_response,
        "matching_fake_energy_J": resp.matching_energy, "superlinearity_index": sli}
    lines += ["calibration:",
              f"  single-photon threshold at {lam * 1e9:g} nm: {1e3 * thresholds.single_photon_threshold:.2f} mV",
              f"  blinding power {cal.cw_power * 1e9:.3f} nW "
              f"({100 * cal.fraction_below_threshold:.2f}% of single photons below threshold)",
              f"  unblinded / blinded single-photon mean V_max: {1e3 * cal.unblinded_response:.2f} / "
              f"{1e3 * cal.single_photon_response:.2f} mV",
              f"  fake energy matching one photon: {resp.matching_energy:.3g} J",
              f"  superlinearity index over the scan: {sli:.3f}"]
    return model


def build_parser():
    parser = argparse.ArgumentParser(prog="tesfake", description="TES detector attack simulator")
    parser.add_argument("--version", action="version", version=f"tesfake {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in [("iv-sweep", cmd_iv_sweep, "I-V curves against bath temperature and CW power"),
                                 ("photon-histogram", cmd_photon_histogram, "pulse-height histograms per wavelength"),
                                 ("attack", cmd_attack, "blinding + faked-state BB84 attack")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--profile", help="profile file (default: bundled paper-like profile)")
        p.add_argument("--scenario", help="scenario file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
        p.add_argument("--trials", type=int, default=None)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        args.out = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    try:
        return args.func(args)
    except (NoConvergence, FitFailed, NotBlindable, Undefined) as exc:
        print(f"tesfake {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"tesfake {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
