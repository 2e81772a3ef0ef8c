"""Configuration loading and validation for the command-line front end.

One INI file (comment-capable, hierarchical through sections) feeds every
module.  All values are validated against the module preconditions before
any computation starts; ``validate_config`` is side-effect free and returns
a list of (key_path, message) diagnostics.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .budget import DetectionChain
from .cascade import CascadeParams
from .errors import ConfigError
from .layered import OpticalMaterial

BUILTIN_MATERIALS = {
    "gaas": 3.53 + 0.0j,
    "alas": 2.95 + 0.0j,
    "sio2": 1.45 + 0.0j,
    "air": 1.0 + 0.0j,
}


def baseline_config_path() -> Path:
    """Path of the bundled baseline-device configuration."""
    return Path(resources.files("pairpillar").joinpath("data/baseline.cfg"))


@dataclass(frozen=True)
class StackConfig:
    design_wavelength_nm: float = 910.0
    top_pairs: int = 5
    bottom_pairs: int = 18
    high: str = "gaas"
    low: str = "alas"
    spacer: str = "gaas"
    substrate: str = "gaas"
    incident: str = "air"
    spacer_optical_length: float = 1.0
    scan_halfwidth_nm: float = 25.0


@dataclass(frozen=True)
class PillarConfig:
    diameter_um: float = 2.02
    core: str = "gaas"
    cladding_index: float = 1.0
    l_max: int = 3


@dataclass(frozen=True)
class EmitterConfig:
    wavelength_xx_nm: float = 908.5
    wavelength_x_nm: float = 906.1
    bulk_lifetime_ps: float = 290.0


@dataclass(frozen=True)
class CascadeConfig:
    tau_xx_ps: float = 218.0
    tau_x_ps: float = 281.0
    dephasing_per_ns: float = 0.0
    pulse_fwhm_ps: float = 10.0
    pulse_area_pi: float = 1.0
    rep_period_ns: float = 12.5
    re_excitation_prob: float = 0.0
    n_pulses: int = 200_000

    def to_params(self, binding_energy_mev: float) -> CascadeParams:
        return CascadeParams(
            tau_xx_ps=self.tau_xx_ps,
            tau_x_ps=self.tau_x_ps,
            dephasing_per_ns=self.dephasing_per_ns,
            binding_energy_mev=binding_energy_mev,
            pulse_fwhm_ps=self.pulse_fwhm_ps,
            pulse_area_rad=self.pulse_area_pi * np.pi,
            rep_period_ns=self.rep_period_ns,
        )


@dataclass(frozen=True)
class ChainConfig:
    rep_rate_hz: float = 80e6
    eta_detector: float = 0.4
    sigma_detector: float = 0.0
    eta_fibre: float = 0.291
    sigma_fibre: float = 0.010
    eta_optics: float = 0.062
    sigma_optics: float = 0.010
    rate_xx_cps: float = 401_000.0
    sigma_rate_xx_cps: float = 1_000.0
    rate_x_cps: float = 198_000.0
    sigma_rate_x_cps: float = 1_000.0
    target_efficiency: float = 0.85

    def to_chain(self) -> DetectionChain:
        return DetectionChain(
            rep_rate_hz=self.rep_rate_hz,
            eta_detector=self.eta_detector,
            eta_fibre=self.eta_fibre,
            eta_optics=self.eta_optics,
            sigma_detector=self.sigma_detector,
            sigma_fibre=self.sigma_fibre,
            sigma_optics=self.sigma_optics,
        )


@dataclass(frozen=True)
class TcspcConfig:
    irf_fwhm_ps: float = 78.0
    bin_width_ps: float = 4.0
    window_ps: float = 12_500.0
    total_counts: int = 1_000_000
    model: str = "exp_gauss"
    tau_ps: float = 300.0
    baseline_per_bin: float = 2.0


@dataclass(frozen=True)
class SweepConfig:
    diameter_um: tuple = ()
    top_pairs: tuple = ()
    bottom_pairs: tuple = ()
    substrates: tuple = ()
    cap: int = 100_000


@dataclass(frozen=True)
class OptimizeConfig:
    objective: str = "eta_int_pair_compatible"
    diameter_um: tuple = (1.7, 2.1)
    top_pairs: tuple = (5, 7)
    bottom_pairs: tuple = (18, 25)
    substrates: tuple = ("gaas", "sio2")


@dataclass(frozen=True)
class RunSection:
    seed: int = 20260808
    output_dir: str = ""


@dataclass(frozen=True)
class RunConfig:
    materials: dict
    stack: StackConfig = field(default_factory=StackConfig)
    pillar: PillarConfig = field(default_factory=PillarConfig)
    emitter: EmitterConfig = field(default_factory=EmitterConfig)
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    tcspc: TcspcConfig = field(default_factory=TcspcConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    run: RunSection = field(default_factory=RunSection)

    def material(self, name: str) -> OpticalMaterial:
        return OpticalMaterial(name, self.materials[name.lower()])

    def to_ini(self) -> str:
        """Canonical serialization; re-parsing yields an equal RunConfig."""
        lines = ["[materials]"]
        for name in sorted(self.materials):
            n = self.materials[name]
            val = f"{n.real:.17g}" if n.imag == 0 else f"{n.real:.17g}{n.imag:+.17g}j"
            lines.append(f"{name} = {val}")
        for section, obj in (
            ("stack", self.stack), ("pillar", self.pillar), ("emitter", self.emitter),
            ("cascade", self.cascade), ("chain", self.chain), ("tcspc", self.tcspc),
            ("sweep", self.sweep), ("optimize", self.optimize), ("run", self.run),
        ):
            lines.append("")
            lines.append(f"[{section}]")
            for f in fields(obj):
                v = getattr(obj, f.name)
                if isinstance(v, tuple):
                    if not v:
                        continue
                    v = ", ".join(
                        x if isinstance(x, str) else f"{x:.17g}" for x in v
                    )
                elif isinstance(v, float):
                    v = f"{v:.17g}"
                lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {
    ("stack", "top_pairs"), ("stack", "bottom_pairs"), ("pillar", "l_max"),
    ("cascade", "n_pulses"), ("tcspc", "total_counts"), ("sweep", "cap"),
    ("run", "seed"),
}
_STR_KEYS = {
    ("stack", "high"), ("stack", "low"), ("stack", "spacer"),
    ("stack", "substrate"), ("stack", "incident"), ("pillar", "core"),
    ("tcspc", "model"), ("optimize", "objective"), ("run", "output_dir"),
}
_LIST_KEYS = {
    ("sweep", "diameter_um"), ("sweep", "top_pairs"), ("sweep", "bottom_pairs"),
    ("sweep", "substrates"),
    ("optimize", "diameter_um"), ("optimize", "top_pairs"),
    ("optimize", "bottom_pairs"), ("optimize", "substrates"),
}

_SECTION_TYPES = {
    "stack": StackConfig, "pillar": PillarConfig, "emitter": EmitterConfig,
    "cascade": CascadeConfig, "chain": ChainConfig, "tcspc": TcspcConfig,
    "sweep": SweepConfig, "optimize": OptimizeConfig, "run": RunSection,
}


def _parse_value_list(raw: str, key: tuple, diags, path: str):
    """Comma list ('a, b') or range syntax ('lo:hi:step') for sweep axes."""
    raw = raw.strip()
    if key[1] == "substrates":
        return tuple(x.strip().lower() for x in raw.split(",") if x.strip())
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            diags.append((path, f"range syntax is lo:hi:step, got {raw!r}"))
            return ()
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            diags.append((path, f"range values must be numeric, got {raw!r}"))
            return ()
        if step <= 0 or hi < lo:
            diags.append((path, "need step > 0 and hi >= lo"))
            return ()
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(float(lo + k * step) for k in range(n))
    try:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        diags.append((path, f"expected a comma list of numbers, got {raw!r}"))
        return ()


def _read_ini(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_file(fh)
    return parser


def validate_config(path) -> list:
    """All diagnostics for the file at ``path``; empty means valid."""
    try:
        parser = _read_ini(path)
    except configparser.Error as exc:
        return [("file", f"INI parse error: {exc}")]

    diags: list = []
    materials = dict(BUILTIN_MATERIALS)

    for section in parser.sections():
        if section != "materials" and section not in _SECTION_TYPES:
            diags.append((section, "unknown section"))

    if parser.has_section("materials"):
        for name, raw in parser.items("materials"):
            try:
                n = complex(raw.replace(" ", ""))
            except ValueError:
                diags.append((f"materials.{name}", f"cannot parse index {raw!r}"))
                continue
            if n.real <= 0:
                diags.append((f"materials.{name}", "Re(n) must be > 0"))
            elif n.imag < 0:
                diags.append((f"materials.{name}", "Im(n) must be >= 0 (passive medium)"))
            else:
                materials[name.lower()] = n

    values: dict = {}
    for section, cls in _SECTION_TYPES.items():
        kw = {}
        known = {f.name for f in fields(cls)}
        if parser.has_section(section):
            for key, raw in parser.items(section):
                path_key = f"{section}.{key}"
                if key not in known:
                    diags.append((path_key, "unknown key"))
                    continue
                if (section, key) in _LIST_KEYS:
                    kw[key] = _parse_value_list(raw, (section, key), diags, path_key)
                elif (section, key) in _STR_KEYS:
                    kw[key] = raw.strip().lower() if key != "output_dir" else raw.strip()
                elif (section, key) in _INT_KEYS:
                    try:
                        kw[key] = int(raw)
                    except ValueError:
                        diags.append((path_key, f"expected an integer, got {raw!r}"))
                else:
                    try:
                        kw[key] = float(raw)
                    except ValueError:
                        diags.append((path_key, f"expected a number, got {raw!r}"))
        try:
            values[section] = cls(**kw)
        except TypeError:
            values[section] = cls()

    def check(cond, key, message):
        if not cond:
            diags.append((key, message))

    st = values["stack"]
    check(st.design_wavelength_nm > 0, "stack.design_wavelength_nm", "must be > 0")
    check(st.top_pairs >= 1, "stack.top_pairs", "must be >= 1")
    check(st.bottom_pairs >= 1, "stack.bottom_pairs", "must be >= 1")
    check(
        st.spacer_optical_length in (0.5, 1.0, 1.5, 2.0),
        "stack.spacer_optical_length", "must be one of 0.5, 1.0, 1.5, 2.0",
    )
    for key in ("high", "low", "spacer", "substrate", "incident"):
        name = getattr(st, key)
        check(name in materials, f"stack.{key}", f"references undefined material {name!r}")

    pl = values["pillar"]
    check(pl.diameter_um > 0, "pillar.diameter_um", "must be > 0")
    check(pl.core in materials, "pillar.core", f"references undefined material {pl.core!r}")
    check(pl.cladding_index >= 1.0, "pillar.cladding_index", "must be >= 1")
    check(pl.l_max >= 0, "pillar.l_max", "must be >= 0")
    if pl.core in materials:
        check(
            materials[pl.core].real > pl.cladding_index,
            "pillar.core", "core index must exceed the cladding index",
        )

    em = values["emitter"]
    check(
        em.wavelength_xx_nm > em.wavelength_x_nm,
        "emitter.wavelength_xx_nm", "cascade upper line must be red of the lower line",
    )
    check(em.bulk_lifetime_ps > 0, "emitter.bulk_lifetime_ps", "must be > 0")

    ca = values["cascade"]
    check(ca.tau_xx_ps > 0, "cascade.tau_xx_ps", "must be > 0")
    check(ca.tau_x_ps > 0, "cascade.tau_x_ps", "must be > 0")
    check(ca.dephasing_per_ns >= 0, "cascade.dephasing_per_ns", "must be >= 0")
    check(ca.pulse_fwhm_ps > 0, "cascade.pulse_fwhm_ps", "must be > 0")
    check(ca.pulse_area_pi >= 0, "cascade.pulse_area_pi", "must be >= 0")
    check(ca.rep_period_ns > 0, "cascade.rep_period_ns", "must be > 0")
    check(
        0.0 <= ca.re_excitation_prob <= 1.0,
        "cascade.re_excitation_prob", "must be within [0, 1]",
    )
    check(ca.n_pulses >= 1, "cascade.n_pulses", "must be >= 1")

    ch = values["chain"]
    check(ch.rep_rate_hz > 0, "chain.rep_rate_hz", "must be > 0")
    for key in ("eta_detector", "eta_fibre", "eta_optics"):
        v = getattr(ch, key)
        check(0.0 < v <= 1.0, f"chain.{key}", f"efficiency outside (0, 1]: {v}")
    for key in ("sigma_detector", "sigma_fibre", "sigma_optics",
                "sigma_rate_xx_cps", "sigma_rate_x_cps"):
        check(getattr(ch, key) >= 0, f"chain.{key}", "must be >= 0")
    for key in ("rate_xx_cps", "rate_x_cps"):
        check(getattr(ch, key) >= 0, f"chain.{key}", "must be >= 0")
    check(0.0 < ch.target_efficiency <= 1.0, "chain.target_efficiency", "must be in (0, 1]")

    tc = values["tcspc"]
    check(tc.irf_fwhm_ps > 0, "tcspc.irf_fwhm_ps", "must be > 0")
    check(tc.bin_width_ps > 0, "tcspc.bin_width_ps", "must be > 0")
    check(tc.window_ps > tc.bin_width_ps, "tcspc.window_ps", "must exceed the bin width")
    check(tc.total_counts >= 1, "tcspc.total_counts", "must be >= 1")
    check(
        tc.model in ("exp_gauss", "cascade_gauss"),
        "tcspc.model", f"unknown model {tc.model!r}",
    )
    check(tc.tau_ps > 0, "tcspc.tau_ps", "must be > 0")
    check(tc.baseline_per_bin >= 0, "tcspc.baseline_per_bin", "must be >= 0")

    sw = values["sweep"]
    check(sw.cap >= 1, "sweep.cap", "must be >= 1")
    for name in sw.substrates:
        check(name in materials, "sweep.substrates", f"references undefined material {name!r}")

    op = values["optimize"]
    check(
        op.objective in ("eta_int", "eta_int_pair_compatible"),
        "optimize.objective", f"unknown objective {op.objective!r}",
    )
    check(len(op.diameter_um) == 2, "optimize.diameter_um", "needs exactly lo, hi")
    check(len(op.top_pairs) == 2, "optimize.top_pairs", "needs exactly lo, hi")
    check(len(op.bottom_pairs) == 2, "optimize.bottom_pairs", "needs exactly lo, hi")
    for name in op.substrates:
        check(name in materials, "optimize.substrates", f"references undefined material {name!r}")

    return diags


def load_config(path) -> RunConfig:
    """Parse and validate; raises ConfigError with diagnostics when invalid."""
    diags = validate_config(path)
    if diags:
        raise ConfigError(diags)
    parser = _read_ini(path)
    materials = dict(BUILTIN_MATERIALS)
    if parser.has_section("materials"):
        for name, raw in parser.items("materials"):
            materials[name.lower()] = complex(raw.replace(" ", ""))

    sections = {}
    for section, cls in _SECTION_TYPES.items():
        kw = {}
        known = {f.name for f in fields(cls)}
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in known:
                    continue
                if (section, key) in _LIST_KEYS:
                    kw[key] = _parse_value_list(raw, (section, key), [], "")
                elif (section, key) in _STR_KEYS:
                    kw[key] = raw.strip().lower() if key != "output_dir" else raw.strip()
                elif (section, key) in _INT_KEYS:
                    kw[key] = int(raw)
                else:
                    kw[key] = float(raw)
        sections[section] = cls(**kw)

    return RunConfig(
        materials=materials,
        stack=sections["stack"],
        pillar=sections["pillar"],
        emitter=sections["emitter"],
        cascade=sections["cascade"],
        chain=sections["chain"],
        tcspc=sections["tcspc"],
        sweep=sections["sweep"],
        optimize=sections["optimize"],
        run=sections["run"],
    )
