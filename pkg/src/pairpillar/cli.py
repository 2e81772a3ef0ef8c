"""Command-line front end.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure, 64 usage error.  Every output-writing command finishes by writing
manifest.json; a failed command leaves no outputs behind.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__, budget, cascade, config, emitter, layered, optimizer, output, pillar, tcspc
from .errors import ConfigError, InvalidParameterError, PairPillarError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pairpillar", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "cavity": "planar cavity spectrum, Q and mirror budget",
        "modes": "guided-mode census of the pillar",
        "couple": "emitter-cavity coupling figures of merit",
        "cascade": "pulsed cascade ensemble: records, g2, visibility",
        "fit": "synthesize and/or fit a decay histogram",
        "budget": "count-rate to extraction-efficiency budget",
        "sweep": "evaluate a design grid",
        "optimize": "search mirror counts, substrate and diameter",
        "validate": "validate a configuration file",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", nargs="?", default=None,
                       help="configuration file (defaults to the bundled baseline)")
        if name != "validate":
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
            p.add_argument("--jobs", type=int, default=1, help="worker cap for grid commands")
        if name == "fit":
            p.add_argument("--data", default=None,
                           help="histogram file to fit (synthesized when omitted)")
        if name == "budget":
            p.add_argument("--rate-xx", type=float, default=None,
                           help="override the upper-channel detected rate (counts/s)")
            p.add_argument("--rate-x", type=float, default=None,
                           help="override the lower-channel detected rate (counts/s)")
            p.add_argument("--target", type=float, default=None,
                           help="override the target source efficiency")
    return parser


def _resolve_outdir(args, cfg: config.RunConfig) -> str:
    if args.out:
        return args.out
    if cfg.run.output_dir:
        return cfg.run.output_dir
    return os.environ.get("PAIRPILLAR_OUTDIR", "pairpillar_out")


def _stack_from(cfg: config.RunConfig) -> layered.LayerStack:
    s = cfg.stack
    return layered.build_quarter_wave_cavity(
        s.design_wavelength_nm, s.top_pairs, s.bottom_pairs,
        high=cfg.material(s.high), low=cfg.material(s.low),
        spacer=cfg.material(s.spacer), substrate=cfg.material(s.substrate),
        incident=cfg.material(s.incident),
        spacer_optical_length=s.spacer_optical_length,
    )


def _geometry_from(cfg: config.RunConfig) -> pillar.PillarGeometry:
    return pillar.PillarGeometry(
        cfg.pillar.diameter_um,
        cfg.materials[cfg.pillar.core].real,
        cfg.pillar.cladding_index,
    )


def _leaky_model_from(cfg: config.RunConfig) -> emitter.LeakyModel:
    s = cfg.stack
    return emitter.default_leaky_model(
        lam0_nm=s.design_wavelength_nm,
        n_top_pairs=s.top_pairs,
        n_bottom_pairs=s.bottom_pairs,
        substrate=cfg.material(s.substrate),
        n_core=cfg.materials[cfg.pillar.core].real,
        n_clad=cfg.pillar.cladding_index,
    )


def _cmd_cavity(cfg, session, args):
    s = cfg.stack
    stack = _stack_from(cfg)
    lam0 = s.design_wavelength_nm
    planar = layered.find_resonance(stack, lam0 - s.scan_halfwidth_nm, lam0 + s.scan_halfwidth_nm)
    profile = layered.field_profile(stack, planar.resonance_wavelength_nm)

    lam = np.linspace(lam0 - s.scan_halfwidth_nm, lam0 + s.scan_halfwidth_nm, 2001)
    spec = layered.emission_spectrum(stack, lam)
    refl = np.array([layered.stack_response(stack, x).reflectance for x in lam])
    output.write_columns(session.path("emission_spectrum.tsv"),
                         ("wavelength_nm", "emission_enhancement"), (lam, spec))
    output.write_columns(session.path("reflectance_spectrum.tsv"),
                         ("wavelength_nm", "reflectance"), (lam, refl))
    output.write_keyvalues(session.path("cavity_summary.txt"), {
        "resonance_wavelength_nm": planar.resonance_wavelength_nm,
        "quality_factor": planar.quality_factor,
        "linewidth_nm": planar.linewidth_nm,
        "quality_factor_round_trip": layered.round_trip_q_estimate(
            stack, planar.resonance_wavelength_nm),
        "top_mirror_reflectance": planar.top_mirror_reflectance,
        "bottom_mirror_reflectance": planar.bottom_mirror_reflectance,
        "top_escape_fraction": planar.top_escape_fraction,
        "effective_length_nm": profile.effective_length_nm,
        "spacer_peak_z_nm": profile.spacer_peak_z_nm,
    })
    print(f"resonance {planar.resonance_wavelength_nm:.2f} nm, "
          f"Q = {planar.quality_factor:.1f}, linewidth {planar.linewidth_nm:.2f} nm, "
          f"eta_top = {planar.top_escape_fraction:.3f}")


def _cmd_modes(cfg, session, args):
    geo = _geometry_from(cfg)
    lam0 = cfg.stack.design_wavelength_nm
    modes = pillar.solve_guided_modes(geo, lam0, cfg.pillar.l_max)
    rows = {
        "l": [m.azimuthal_index for m in modes],
        "m": [m.radial_index for m in modes],
        "n_eff": [m.n_eff for m in modes],
        "w0_um": [m.mode_field_radius_um if m.mode_field_radius_um else float("nan")
                  for m in modes],
        "lambda_mode_nm": [
            pillar.pillar_resonance_shift(lam0, m, geo) for m in modes
        ],
    }
    output.write_columns(session.path("modes.tsv"), tuple(rows), tuple(rows.values()))
    print(f"{len(modes)} guided modes up to l = {cfg.pillar.l_max} "
          f"(V = {pillar.v_number(geo, lam0):.2f})")


def _cmd_couple(cfg, session, args):
    geo = _geometry_from(cfg)
    spec = emitter.EmitterSpec(
        cfg.emitter.wavelength_x_nm, cfg.emitter.wavelength_xx_nm,
        cfg.emitter.bulk_lifetime_ps,
    )
    report = emitter.couple(geo, spec, _stack_from(cfg), model=_leaky_model_from(cfg))
    sp = report.spectrum
    output.write_columns(
        session.path("coupling_spectrum.tsv"),
        ("lambda_nm", "F_cav", "beta", "eta_int"),
        (sp.lambda_nm, sp.f_cav, sp.beta, sp.eta_int),
    )
    output.write_keyvalues(session.path("coupling_summary.txt"), {
        "resonance_nm": report.resonance_nm,
        "purcell_peak": report.purcell,
        "off_mode_rate": report.f_leaky_resonant,
        "beta": report.beta_resonant,
        "eta_top": report.planar.top_escape_fraction,
        "eta_int": report.eta_int_resonant,
        "mode_volume_um3": report.mode_volume_um3,
        "mode_field_radius_um": report.mode_field_radius_um,
        "numerical_aperture": report.numerical_aperture,
        "rate_on": report.rate_on,
        "rate_off": report.rate_off,
        "rate_ratio": report.rate_ratio,
        "lifetime_on_ps": report.lifetime_on_ps,
        "lifetime_off_ps": report.lifetime_off_ps,
    })
    print(f"beta = {report.beta_resonant:.3f}, eta_int = {report.eta_int_resonant:.3f}, "
          f"on/off rate ratio = {report.rate_ratio:.2f}")


def _cmd_cascade(cfg, session, args, seed):
    e_b = cascade.binding_energy_from_wavelengths(
        cfg.emitter.wavelength_x_nm, cfg.emitter.wavelength_xx_nm
    )
    params = cfg.cascade.to_params(e_b)
    records = cascade.trajectory_ensemble(
        params, cfg.cascade.n_pulses, seed, cfg.cascade.re_excitation_prob
    )
    output.write_columns(
        session.path("photons.tsv"),
        ("pulse_index", "channel", "time_ps"),
        (records["pulse_index"], records["channel"], records["emission_time_ps"]),
    )
    summary = {
        "binding_energy_mev": e_b,
        "excitation_probability": cascade.simulate_pulse(params, params.pulse_area_rad),
        "n_pulses": cfg.cascade.n_pulses,
        "n_photons": int(records.size),
        "seed": seed,
    }
    for channel in ("xx", "x"):
        try:
            g2 = cascade.g2_pulsed(records, channel, n_pulses=cfg.cascade.n_pulses)
            summary[f"g2_zero_{channel}"] = g2.g2_zero
            summary[f"g2_zero_{channel}_error"] = g2.error
        except PairPillarError:
            summary[f"g2_zero_{channel}"] = float("nan")
    vis = cascade.hom_visibility_cascade(params, n_pulses=cfg.cascade.n_pulses, seed=seed)
    summary["visibility_analytic"] = vis.analytic
    summary["visibility_trajectory"] = vis.trajectory
    summary["visibility_trajectory_error"] = vis.trajectory_error
    output.write_keyvalues(session.path("cascade_summary.txt"), summary)
    print(f"{records.size} photons over {cfg.cascade.n_pulses} pulses; "
          f"V_analytic = {vis.analytic:.3f}, V_trajectory = {vis.trajectory:.3f}")


def _cmd_fit(cfg, session, args, seed):
    tc = cfg.tcspc
    sigma = tc.irf_fwhm_ps / tcspc.FWHM_TO_SIGMA
    fixed = {"sigma": sigma}
    if tc.model == "cascade_gauss":
        # pin the fast component, as when the upper-transition lifetime is
        # known from its own fit
        fixed["tau_xx"] = cfg.cascade.tau_xx_ps
    if args.data:
        hist = tcspc.Histogram.from_file(args.data)
        synthetic = False
    else:
        # baseline density giving ~baseline_per_bin counts per bin after the
        # total-count normalization
        b = tc.baseline_per_bin * tc.tau_ps / max(
            tc.total_counts * tc.bin_width_ps - tc.baseline_per_bin * tc.window_ps, 1.0
        )
        if tc.model == "cascade_gauss":
            params = {
                "tau_xx": cfg.cascade.tau_xx_ps, "tau_x": tc.tau_ps, "sigma": sigma,
                "t0": 5 * sigma, "amplitude": 1.0, "baseline": b / tc.tau_ps,
            }
        else:
            params = {
                "tau": tc.tau_ps, "sigma": sigma, "t0": 5 * sigma,
                "amplitude": 1.0, "baseline": b,
            }
        hist = tcspc.synthesize_histogram(
            tc.model, params, tc.total_counts, tc.bin_width_ps, tc.window_ps, seed,
        )
        synthetic = True
    fit = tcspc.fit_lifetime(hist, model=tc.model, fixed=fixed)
    report = {"model": fit.model, "synthetic": synthetic, "seed": seed,
              "n_bins": fit.n_bins, "reduced_deviance": fit.reduced_deviance,
              "converged": fit.converged}
    for name in fit.param_names:
        report[name] = fit.params[name]
        report[f"{name}_error"] = fit.errors[name]
    for name, value in fit.fixed.items():
        report[f"{name}_fixed"] = value
    output.write_keyvalues(session.path("fit_report.txt"), report)
    t = hist.centers_ps
    model_fn = tcspc.exp_gauss_model if tc.model == "exp_gauss" else tcspc.cascade_gauss_model
    mu = model_fn(t, **fit.params)
    output.write_columns(session.path("fit_curve.tsv"),
                         ("time_ps", "counts", "model_counts_per_ps"),
                         (t, hist.counts, mu))
    tau_name = "tau" if tc.model == "exp_gauss" else "tau_x"
    tau, err = fit.params[tau_name], fit.errors[tau_name]
    print(f"{tau_name} = {tau:.1f} +/- {err:.1f} ps (reduced deviance {fit.reduced_deviance:.3f})")


def _cmd_budget(cfg, session, args):
    ch = cfg.chain
    chain = ch.to_chain()
    rate_xx = args.rate_xx if args.rate_xx is not None else ch.rate_xx_cps
    rate_x = args.rate_x if args.rate_x is not None else ch.rate_x_cps
    target = args.target if args.target is not None else ch.target_efficiency
    result = budget.budget_from_rates(
        {"xx": rate_xx, "x": rate_x}, chain,
        {"xx": ch.sigma_rate_xx_cps, "x": ch.sigma_rate_x_cps},
    )
    summary = {}
    lines = [f"{'channel':>8} {'rate_cps':>12} {'eta_source':>12} {'sigma':>10}"]
    for name, cb in result.channels.items():
        summary[f"eta_{name}"] = cb.eta_source
        summary[f"sigma_{name}"] = cb.sigma
        lines.append(f"{name:>8} {cb.rate_cps:>12.0f} {cb.eta_source:>12.4f} {cb.sigma:>10.4f}")
    summary["pair_efficiency"] = result.pair_efficiency
    summary["required_rate_for_target"] = budget.required_rate(target, chain)
    summary["target_efficiency"] = target
    output.write_keyvalues(session.path("budget_summary.txt"), summary)
    print("\n".join(lines))
    print(f"pair efficiency {result.pair_efficiency:.4f}")
    for note in result.notes:
        print(f"note: {note}")


def _cmd_sweep(cfg, session, args):
    grid = {}
    if cfg.sweep.diameter_um:
        grid["diameter_um"] = cfg.sweep.diameter_um
    if cfg.sweep.top_pairs:
        grid["n_top_pairs"] = [int(v) for v in cfg.sweep.top_pairs]
    if cfg.sweep.bottom_pairs:
        grid["n_bottom_pairs"] = [int(v) for v in cfg.sweep.bottom_pairs]
    if cfg.sweep.substrates:
        grid["substrate"] = [cfg.material(n) for n in cfg.sweep.substrates]
    base = optimizer.DesignPoint(
        cfg.pillar.diameter_um, cfg.stack.top_pairs, cfg.stack.bottom_pairs,
        cfg.material(cfg.stack.substrate), cfg.stack.design_wavelength_nm,
    )
    table = optimizer.sweep(grid, model=_leaky_model_from(cfg), base=base,
                            cap=cfg.sweep.cap, jobs=args.jobs)
    session.extra["grid"] = {
        name: len(values) if name != "substrate" else [m.name for m in values]
        for name, values in grid.items()
    }
    session.extra["n_points"] = len(table.points)
    names = list(table.fields) + ["eta_int", "beta", "quality_factor",
                                  "linewidth_nm", "eta_top", "purcell",
                                  "resonance_nm", "pair_compatible"]
    cols = []
    for name in names:
        if name == "substrate":
            cols.append([p.substrate.name for p in table.points])
        else:
            cols.append(table.column(name))
    output.write_columns(session.path("sweep.tsv"), names, cols)
    print(f"swept {len(table.points)} designs over {', '.join(table.fields)}")


def _cmd_optimize(cfg, session, args):
    op = cfg.optimize
    bounds = {
        "diameter_um": tuple(op.diameter_um),
        "n_top_pairs": tuple(int(v) for v in op.top_pairs),
        "n_bottom_pairs": tuple(int(v) for v in op.bottom_pairs),
        "substrate": [cfg.material(n) for n in op.substrates],
    }
    base = optimizer.DesignPoint(
        cfg.pillar.diameter_um, cfg.stack.top_pairs, cfg.stack.bottom_pairs,
        cfg.material(cfg.stack.substrate), cfg.stack.design_wavelength_nm,
    )
    result = optimizer.optimize(bounds, objective=op.objective,
                                model=_leaky_model_from(cfg), base=base)
    best, ev = result.best_point, result.best_evaluation
    output.write_keyvalues(session.path("optimize_summary.txt"), {
        "objective": result.objective,
        "diameter_um": best.diameter_um,
        "n_top_pairs": best.n_top_pairs,
        "n_bottom_pairs": best.n_bottom_pairs,
        "substrate": best.substrate.name,
        "eta_int": ev.eta_int,
        "beta": ev.beta,
        "quality_factor": ev.quality_factor,
        "linewidth_nm": ev.linewidth_nm,
        "eta_top": ev.eta_top,
        "pair_compatible": ev.pair_compatible,
        "n_evaluations": result.n_evaluations,
    })
    print(f"best: d = {best.diameter_um:.3f} um, {best.n_top_pairs}/{best.n_bottom_pairs} pairs, "
          f"{best.substrate.name} substrate -> eta_int = {ev.eta_int:.3f}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE

    config_path = args.config or str(config.baseline_config_path())

    if args.command == "validate":
        try:
            diags = config.validate_config(config_path)
        except OSError as exc:
            sys.stderr.write(f"cannot read {config_path}: {exc}\n")
            return EXIT_CONFIG
        if diags:
            for key, message in diags:
                sys.stderr.write(f"{key}: {message}\n")
            return EXIT_CONFIG
        print("ok")
        return EXIT_OK

    try:
        cfg = config.load_config(config_path)
    except ConfigError as exc:
        for key, message in exc.diagnostics:
            sys.stderr.write(f"{key}: {message}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"cannot read {config_path}: {exc}\n")
        return EXIT_CONFIG

    seed = args.seed if args.seed is not None else cfg.run.seed
    outdir = _resolve_outdir(args, cfg)
    session = output.OutputSession(outdir, args.command, config_path, seed, __version__)

    handlers = {
        "cavity": lambda: _cmd_cavity(cfg, session, args),
        "modes": lambda: _cmd_modes(cfg, session, args),
        "couple": lambda: _cmd_couple(cfg, session, args),
        "cascade": lambda: _cmd_cascade(cfg, session, args, seed),
        "fit": lambda: _cmd_fit(cfg, session, args, seed),
        "budget": lambda: _cmd_budget(cfg, session, args),
        "sweep": lambda: _cmd_sweep(cfg, session, args),
        "optimize": lambda: _cmd_optimize(cfg, session, args),
    }
    try:
        handlers[args.command]()
    except (ConfigError, InvalidParameterError) as exc:
        session.abort()
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except PairPillarError as exc:
        session.abort()
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    session.finalize()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
