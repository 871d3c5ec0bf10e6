"""Scenario configuration, orchestration, and CSV reporting.

Configs are flat ``key = value`` text files ('#' starts a comment).
Every run is deterministic: the report echoes the full configuration in
its header as '# key = value' lines that re-parse to an equal config,
and all numbers are written with 17 significant digits.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields, replace

import numpy as np

from . import brackets as br
from . import gaussian as ga
from . import grid as gr
from .observables import ParseError, parse_observable

KNOWN_DIAGNOSTICS = ("negativity", "witness", "chsh", "brackets",
                     "tomography", "validate")


class ConfigError(ValueError):
    """Invalid scenario configuration (reported with a line number)."""


@dataclass(frozen=True)
class ScenarioConfig:
    g1: float = 1.0
    g2: float = 1.0
    variant: str = "EQ1"
    total_time: float = 1.0
    dt: float = 1.0 / 64.0
    sample_every: int = 8
    grid_points: tuple[int, int, int] = (64, 64, 64)
    grid_half_widths: tuple[float, float, float] = (14.0, 6.0, 10.0)
    hbar: float = 1.0
    q_mean: float = 0.0
    q_width: float | None = None
    q_tilt: float = 0.0
    qprime_mean: float = 0.0
    qprime_width: float | None = None
    qprime_tilt: float = 0.0
    c_mean: float = 0.0
    c_width: float | None = None
    c_tilt: float = 0.0
    c_xk: float = 0.0
    diagnostics: tuple[str, ...] = ("negativity", "witness")
    bracket_pairs: tuple[str, ...] = ()
    tomo_noise: float = 0.0
    seed: int = 0
    output_path: str | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.total_time < 0:
            raise ConfigError("total_time must be nonnegative")
        if self.total_time > 0 and self.dt > self.total_time:
            raise ConfigError("dt must not exceed total_time")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be >= 1")
        if self.variant not in ("EQ1", "PAPER_HEFF"):
            raise ConfigError(f"unknown hamiltonian variant {self.variant!r}")
        for d in self.diagnostics:
            if d not in KNOWN_DIAGNOSTICS:
                raise ConfigError(f"unknown diagnostic {d!r}")
        for pair in self.bracket_pairs:
            a, b = _split_pair(pair)
            parse_observable(a), parse_observable(b)

    # -- derived pieces ---------------------------------------------------

    def hamiltonian(self) -> ga.QuadraticHamiltonian:
        return ga.build_hamiltonian(self.g1, self.g2,
                                    ga.HamiltonianVariant[self.variant])

    def mode_params(self):
        widths = (self.q_width, self.qprime_width, self.c_width)
        means = (self.q_mean, self.qprime_mean, self.c_mean)
        tilts = (self.q_tilt, self.qprime_tilt, self.c_tilt)
        w_c = self.c_width if self.c_width is not None else np.sqrt(self.hbar / 2)
        chirps = (0.0, 0.0, self.c_xk / (w_c * w_c))
        return means, widths, tilts, chirps

    def initial_gaussian(self) -> ga.PhaseSpaceState:
        means, widths, tilts, chirps = self.mode_params()
        return ga.product_state(widths=widths, means=means, tilts=tilts,
                                chirps=chirps, hbar=self.hbar)

    def initial_grid(self) -> gr.GridState:
        means, widths, tilts, chirps = self.mode_params()
        spec = gr.GridSpec(self.grid_points, self.grid_half_widths, self.hbar)
        return gr.init_product_gaussian(spec, means=means, widths=widths,
                                        tilts=tilts, chirps=chirps)

    def sample_steps(self) -> tuple[int, list[int]]:
        n_steps = int(round(self.total_time / self.dt)) if self.total_time > 0 else 0
        samples = list(range(0, n_steps + 1, self.sample_every))
        if samples[-1] != n_steps:
            samples.append(n_steps)
        return n_steps, samples


def _split_pair(pair: str) -> tuple[str, str]:
    if pair.count("|") != 1:
        raise ConfigError(f"bracket pair {pair!r} must be 'SPEC|SPEC'")
    a, b = pair.split("|")
    return a.strip(), b.strip()


_FIELD_TYPES = {f.name: f for f in fields(ScenarioConfig)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in ("grid_points",):
        return tuple(int(v) for v in raw.split(","))
    if key in ("grid_half_widths",):
        return tuple(float(v) for v in raw.split(","))
    if key == "diagnostics":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    if key == "bracket_pairs":
        return tuple(v.strip() for v in raw.split(";") if v.strip())
    if key in ("sample_every", "seed"):
        return int(raw)
    if key == "variant":
        return raw
    if key == "output_path":
        return None if raw.lower() == "none" else raw
    if raw.lower() == "none":
        return None
    return float(raw)


def parse_config(text: str) -> ScenarioConfig:
    """Parse flat key = value lines; unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}")
    try:
        return ScenarioConfig(**values)
    except ConfigError:
        raise
    except (ParseError, ValueError) as exc:
        raise ConfigError(str(exc))


def format_config(config: ScenarioConfig) -> str:
    """Inverse of parse_config (round-trip guaranteed)."""
    out = []
    for f in fields(ScenarioConfig):
        v = getattr(config, f.name)
        if v is None:
            rep = "none"
        elif f.name in ("grid_points", "grid_half_widths"):
            rep = ",".join(_num(x) for x in v)
        elif f.name == "diagnostics":
            rep = ",".join(v)
        elif f.name == "bracket_pairs":
            rep = ";".join(v)
        elif isinstance(v, str):
            rep = v
        elif isinstance(v, int):
            rep = str(v)
        else:
            rep = _num(v)
        out.append(f"{f.name} = {rep}")
    return "\n".join(out) + "\n"


def _num(v) -> str:
    return "%.17g" % float(v)


@dataclass
class ScenarioReport:
    """CSV-writable table: metadata header, column names, numeric rows."""

    header_lines: list[str]
    columns: list[str]
    rows: list[list[float]]

    def __post_init__(self):
        times = [r[0] for r in self.rows]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("rows must be strictly increasing in t")
        for row in self.rows:
            if not all(np.isfinite(v) for v in row):
                raise ValueError("all report cells must be finite")

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header_lines:
            buf.write(f"# {line}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_num(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _report_header(config: ScenarioConfig, extra: list[str] = ()) -> list[str]:
    import hybridlab
    lines = [f"hybridlab {hybridlab.__version__}",
             f"numpy {np.__version__}"]
    lines += format_config(config).strip().splitlines()
    lines += list(extra)
    return lines


def _moment_residual(grid_state: gr.GridState, gauss: ga.PhaseSpaceState) -> float:
    m, v = gr.grid_moments(grid_state)
    return float(max(np.abs(m - gauss.means).max(),
                     np.abs(v - gauss.covariance).max()))


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Evolve both backends over the time grid and tabulate diagnostics."""
    h = config.hamiltonian()
    gauss0 = config.initial_gaussian()
    needs_grid = bool(set(config.diagnostics) & {"brackets", "validate"}) \
        or config.bracket_pairs
    grid_state = config.initial_grid() if needs_grid else None
    if needs_grid and config.variant != "EQ1":
        raise ConfigError("grid diagnostics support only the EQ1 variant")

    pair_specs = [tuple(parse_observable(s) for s in _split_pair(p))
                  for p in config.bracket_pairs]
    columns = ["t"]
    if "negativity" in config.diagnostics:
        columns.append("logneg_q_qprime")
    if "witness" in config.diagnostics:
        columns.append("witness")
    if "chsh" in config.diagnostics:
        columns.append("chsh_opt")
    for i, p in enumerate(config.bracket_pairs):
        columns.append(f"bracket_{i}")
    if "validate" in config.diagnostics:
        columns.append("backend_residual")

    n_steps, samples = config.sample_steps()
    rows = []
    mask_fractions = []
    prev_step = 0
    for step in samples:
        t = step * config.dt
        if grid_state is not None and step > prev_step:
            grid_state = gr.split_step_evolve(grid_state, config.g1, config.g2,
                                              config.dt, step - prev_step)
            prev_step = step
        gauss = ga.evolve_gaussian(gauss0, h, t)
        row = [t]
        if "negativity" in config.diagnostics:
            row.append(ga.logarithmic_negativity(gauss))
        if "witness" in config.diagnostics:
            row.append(ga.witness_expectation(gauss))
        if "chsh" in config.diagnostics:
            row.append(ga.optimize_chsh(gauss)[0])
        for a, b in pair_specs:
            row.append(br.hybrid_bracket(grid_state, a, b).value)
        if "validate" in config.diagnostics:
            row.append(_moment_residual(grid_state, gauss))
        if grid_state is not None:
            mask_fractions.append(gr.to_ensemble(grid_state).mask_fraction)
        rows.append(row)

    extra = []
    if mask_fractions:
        extra.append(f"max_mask_fraction = {_num(max(mask_fractions))}")
    report = ScenarioReport(_report_header(config, extra), columns, rows)
    if config.output_path:
        report.write(config.output_path)
    return report


@dataclass(frozen=True)
class ValidationSummary:
    max_residual: float
    max_residual_half_dt: float
    convergence_ratio: float


def validate_backends(config: ScenarioConfig) -> ValidationSummary:
    """Max cross-backend moment discrepancy, at dt and dt/2.

    The reported ratio is the dt-halving error ratio; 4 means clean
    second-order splitting error, 1 means the error floor dominates.
    """
    def max_residual(cfg: ScenarioConfig) -> float:
        h = cfg.hamiltonian()
        gauss0 = cfg.initial_gaussian()
        grid_state = cfg.initial_grid()
        _, samples = cfg.sample_steps()
        worst, prev = 0.0, 0
        for step in samples:
            if step > prev:
                grid_state = gr.split_step_evolve(grid_state, cfg.g1, cfg.g2,
                                                  cfg.dt, step - prev)
                prev = step
            gauss = ga.evolve_gaussian(gauss0, h, step * cfg.dt)
            worst = max(worst, _moment_residual(grid_state, gauss))
        return worst

    r1 = max_residual(config)
    half = replace(config, dt=config.dt / 2.0,
                   sample_every=config.sample_every * 2)
    r2 = max_residual(half)
    return ValidationSummary(r1, r2, r1 / r2 if r2 > 0 else float("inf"))


@dataclass(frozen=True)
class TomographyResult:
    planted: ga.MediatorEstimate
    recovered: ga.MediatorEstimate


def tomography_demo(config: ScenarioConfig) -> TomographyResult:
    """Forward-simulate probe moments, then invert for the mediator.

    The inversion sees only the probe series (plus the couplings); the
    planted mediator moments are used solely for the comparison table.
    """
    if config.g1 == 0.0 or config.g2 == 0.0:
        raise ConfigError("tomography needs nonzero couplings")
    n_steps, samples = config.sample_steps()
    times = np.array([s * config.dt for s in samples if s > 0])
    if np.unique(times).size < 3:
        raise ConfigError("tomography needs at least 3 distinct sample times")
    state0 = config.initial_gaussian()
    h = config.hamiltonian()
    states = [ga.evolve_gaussian(state0, h, t) for t in times]
    series = ga.ProbeMomentSeries.from_states(times, states)
    if config.tomo_noise > 0:
        series = series.with_noise(config.tomo_noise, config.seed)
    est = ga.mediator_moment_inversion(series, config.g1, config.g2)
    m, v = state0.means, state0.covariance
    planted = ga.MediatorEstimate(
        mean_x=float(m[ga.IDX_X]), mean_k=float(m[ga.IDX_K]),
        var_x=float(v[ga.IDX_X, ga.IDX_X]), var_k=float(v[ga.IDX_K, ga.IDX_K]),
        cov_xk=float(v[ga.IDX_X, ga.IDX_K]), residual=0.0)
    result = TomographyResult(planted, est)
    if config.output_path:
        _write_tomography_csv(config, result)
    return result


def _write_tomography_csv(config: ScenarioConfig, result: TomographyResult) -> None:
    names = ("mean_x", "mean_k", "var_x", "var_k", "cov_xk")
    with open(config.output_path, "w") as fh:
        for line in _report_header(config):
            fh.write(f"# {line}\n")
        fh.write("moment,planted,recovered\n")
        for n in names:
            fh.write("%s,%s,%s\n" % (n, _num(getattr(result.planted, n)),
                                     _num(getattr(result.recovered, n))))
        fh.write("residual,0,%s\n" % _num(result.recovered.residual))
