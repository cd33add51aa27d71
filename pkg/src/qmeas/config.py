"""Run configuration: flat sectioned key = value text, strictly validated.

Example::

    [run]
    scenario = zeno
    seed = 42

    [model]
    level_splitting = 2.0
    rabi = 1.0

    [zeno]
    kappa_list = 0.1 1 10 100
    n_traj = 400

Matrices are written as rows separated by ';' with complex entries like
``1+0i`` or ``0.5-0.25i`` separated by spaces. Unknown sections or keys are
rejected with the offending line number. The named presets cover the stock
scenarios so typical configs never spell out matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .hilbert import HermitianOperator, QuantumState, basis_state, pauli_x, pauli_z

SCENARIOS = (
    "lindblad",
    "chm",
    "sse-ensemble",
    "chain",
    "zeno",
    "rabi-monitor",
    "transition",
    "verify",
)

_MATRIX_SCENARIOS = {"lindblad", "chm", "sse-ensemble", "chain"}
_DRIVEN_SCENARIOS = {"zeno", "rabi-monitor", "transition"}

# section -> key -> applicable scenarios (None = all)
_SCHEMA: dict[str, dict[str, set[str] | None]] = {
    "run": {"scenario": None, "seed": None, "out": None},
    "model": {
        "preset": _MATRIX_SCENARIOS,
        "dim": _MATRIX_SCENARIOS,
        "h": _MATRIX_SCENARIOS - {"chain"},
        "a": _MATRIX_SCENARIOS,
        "kappa": _MATRIX_SCENARIOS - {"chain"} | _DRIVEN_SCENARIOS,
        "psi0": _MATRIX_SCENARIOS,
        "level_splitting": _DRIVEN_SCENARIOS,
        "rabi": _DRIVEN_SCENARIOS,
    },
    # zeno picks its grid per scan point and chains are discrete, so neither
    # accepts a [grid] section
    "grid": {
        "t0": (_MATRIX_SCENARIOS | _DRIVEN_SCENARIOS) - {"zeno", "chain"},
        "dt": (_MATRIX_SCENARIOS | _DRIVEN_SCENARIOS) - {"zeno", "chain"},
        "n_steps": (_MATRIX_SCENARIOS | _DRIVEN_SCENARIOS) - {"zeno", "chain"},
    },
    "chm": {"record_value": {"chm"}, "record_file": {"chm"}},
    "sse": {"n_traj": {"sse-ensemble"}},
    "chain": {
        "strength": {"chain"},
        "n_shots": {"chain"},
        "n_chains": {"chain"},
        "collapse_threshold": {"chain"},
    },
    "zeno": {"kappa_list": {"zeno"}, "n_traj": {"zeno"}},
    "rabi": {
        "search_bins": {"rabi-monitor"},
        "band_bins": {"rabi-monitor"},
        "max_offset_bins": {"rabi-monitor"},
    },
    "transition": {
        "smoothing_window": {"transition"},
        "threshold_fraction": {"transition"},
        "initial": {"transition"},
    },
}

_GRID_DEFAULTS = {
    "lindblad": (0.01, 200),
    "chm": (0.05, 40),
    "sse-ensemble": (1e-3, 2000),
    "zeno": (None, None),  # chosen per kappa internally
    "rabi-monitor": (1e-3, 100_000),
    "transition": (1e-3, 30_000),
    "chain": (None, None),  # chains are discrete; no grid
    "verify": (None, None),
}


@dataclass
class RunConfig:
    """Validated scenario configuration with all defaults resolved."""

    scenario: str
    seed: int = 0
    out: str = ""
    # matrix scenarios
    h: HermitianOperator | None = None
    a: HermitianOperator | None = None
    kappa: float = 0.5
    psi0: QuantumState | None = None
    # driven scenarios
    level_splitting: float = 2.0
    rabi: float = 1.0
    # grid
    t0: float = 0.0
    dt: float | None = None
    n_steps: int | None = None
    # scenario extras
    record_value: float = 1.0
    record_file: str | None = None
    n_traj: int = 2000
    zeno_kappas: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    zeno_n_traj: int = 400
    strength: float = 0.1
    n_shots: int = 500
    n_chains: int = 1
    collapse_threshold: float = 1e-4
    search_bins: int = 8
    band_bins: int = 25
    max_offset_bins: int = 2
    smoothing_window: float | None = None
    threshold_fraction: float = 0.25
    initial: str = "ground"
    raw: dict[str, dict[str, str]] = field(default_factory=dict, repr=False)


def _parse_complex(token: str, line: int) -> complex:
    t = token.strip().replace("i", "j")
    try:
        return complex(t)
    except ValueError:
        raise ConfigError(f"bad complex entry {token!r} (use forms like 1+0i)", line) from None


def parse_matrix(text: str, line: int) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    if not rows:
        raise ConfigError("empty matrix", line)
    data = [[_parse_complex(tok, line) for tok in row.split()] for row in rows]
    widths = {len(r) for r in data}
    if len(widths) != 1 or widths.pop() != len(data):
        raise ConfigError("matrix must be square (rows separated by ';')", line)
    return np.array(data, dtype=complex)


def _hermitian_from_text(text: str, line: int, name: str) -> HermitianOperator:
    m = parse_matrix(text, line)
    defect = np.abs(m - m.conj().T)
    if defect.max() > 1e-12:
        i, j = np.unravel_index(np.argmax(defect), m.shape)
        raise ConfigError(
            f"{name} is not Hermitian: entry ({i},{j})={m[i, j]:.6g} does not "
            f"conjugate-match ({j},{i})={m[j, i]:.6g}",
            line,
        )
    try:
        return HermitianOperator(m)
    except ValidationError as exc:
        raise ConfigError(f"{name}: {exc}", line) from None


def _state_from_text(text: str, line: int, dim: int) -> QuantumState:
    named = {
        "basis0": lambda: basis_state(dim, 0),
        "basis1": lambda: basis_state(dim, 1),
        "plus": lambda: QuantumState(np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)),
    }
    key = text.strip().lower()
    if key in named:
        return named[key]()
    amps = np.array([_parse_complex(tok, line) for tok in text.split()])
    if amps.size != dim:
        raise ConfigError(f"psi0 must have {dim} amplitudes, got {amps.size}", line)
    try:
        return QuantumState.from_vector(amps)
    except ValidationError as exc:
        raise ConfigError(f"psi0: {exc}", line) from None


def _tokenize(text: str):
    """Yield (line_no, section, key, value) triples; validates raw shape."""
    section = None
    for no, raw_line in enumerate(text.split("\n"), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", no)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", no)
        if section is None:
            raise ConfigError("key outside any [section]", no)
        key, value = line.split("=", 1)
        yield no, section, key.strip().lower(), value.strip()


_FLOAT_KEYS = {
    "kappa",
    "level_splitting",
    "rabi",
    "t0",
    "dt",
    "record_value",
    "strength",
    "collapse_threshold",
    "smoothing_window",
    "threshold_fraction",
}
_INT_KEYS = {
    "seed",
    "dim",
    "n_steps",
    "n_traj",
    "n_shots",
    "n_chains",
    "search_bins",
    "band_bins",
    "max_offset_bins",
}
_POSITIVE_KEYS = {
    "kappa",
    "level_splitting",
    "dt",
    "strength",
    "collapse_threshold",
    "smoothing_window",
    "n_steps",
    "n_traj",
    "n_shots",
    "n_chains",
    "dim",
    "search_bins",
    "band_bins",
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; raises ConfigError naming the first bad
    line. Missing optional keys get documented defaults."""
    entries: dict[str, dict[str, tuple[int, str]]] = {}
    for no, section, key, value in _tokenize(text):
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", no)
        entries.setdefault(section, {})
        if key in entries[section]:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", no)
        entries[section][key] = (no, value)

    run = entries.get("run", {})
    if "scenario" not in run:
        raise ConfigError("missing required key 'scenario' in section [run]")
    line, scen = run["scenario"]
    scen = scen.lower()
    if scen not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scen!r} (choose from {', '.join(SCENARIOS)})", line)

    cfg = RunConfig(scenario=scen)
    cfg.raw = {s: {k: v for k, (_, v) in kv.items()} for s, kv in entries.items()}

    def scalar(section: str, key: str, default):
        if section not in entries or key not in entries[section]:
            return default
        no, value = entries[section][key]
        if key in _INT_KEYS:
            try:
                v = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}", no) from None
        elif key in _FLOAT_KEYS:
            try:
                v = float(value)
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {value!r}", no) from None
        else:
            v = value
        if key in _POSITIVE_KEYS and v <= 0:
            raise ConfigError(f"{key} must be positive", no)
        if key == "seed" and v < 0:
            raise ConfigError("seed must be non-negative", no)
        return v

    # reject keys that exist in the schema but not for this scenario
    for section, kv in entries.items():
        for key, (no, _) in kv.items():
            allowed = _SCHEMA[section][key]
            if allowed is not None and scen not in allowed:
                raise ConfigError(f"key {key!r} does not apply to scenario {scen!r}", no)

    cfg.seed = scalar("run", "seed", 0)
    cfg.out = scalar("run", "out", "")

    if scen in _MATRIX_SCENARIOS:
        preset = scalar("model", "preset", None)
        h_text = entries.get("model", {}).get("h")
        a_text = entries.get("model", {}).get("a")
        if preset is not None and (h_text or a_text):
            raise ConfigError("give either a preset or explicit matrices, not both")
        if preset is not None:
            preset = preset.lower()
            if preset == "two-level":
                cfg.h, cfg.a = pauli_x(), pauli_z()
            elif preset == "three-level":
                cfg.h = HermitianOperator(np.zeros((3, 3)))
                cfg.a = HermitianOperator(np.diag([0.0, 1.0, 3.0]))
            else:
                no, _ = entries["model"]["preset"]
                raise ConfigError(f"unknown preset {preset!r} (two-level, three-level)", no)
        else:
            if a_text is None:
                cfg.h, cfg.a = pauli_x(), pauli_z()  # two-level default
            else:
                cfg.a = _hermitian_from_text(a_text[1], a_text[0], "A")
                if h_text is not None:
                    cfg.h = _hermitian_from_text(h_text[1], h_text[0], "H")
                else:
                    cfg.h = HermitianOperator(np.zeros((cfg.a.dim, cfg.a.dim)))
        if cfg.h is not None and cfg.a is not None and cfg.h.dim != cfg.a.dim:
            raise ConfigError("H and A must have the same dimension")
        declared_dim = scalar("model", "dim", None)
        if declared_dim is not None and declared_dim != cfg.a.dim:
            no, _ = entries["model"]["dim"]
            raise ConfigError(
                f"declared dim {declared_dim} does not match matrices of dim {cfg.a.dim}", no
            )
        cfg.kappa = scalar("model", "kappa", 0.5)
        dim = cfg.a.dim
        psi_entry = entries.get("model", {}).get("psi0")
        if psi_entry is not None:
            cfg.psi0 = _state_from_text(psi_entry[1], psi_entry[0], dim)
        else:
            cfg.psi0 = basis_state(dim, 0) if scen != "chain" else _state_from_text("plus", 0, dim)
    elif scen in _DRIVEN_SCENARIOS:
        cfg.level_splitting = scalar("model", "level_splitting", 2.0)
        cfg.rabi = scalar("model", "rabi", 1.0)
        default_kappa = {"zeno": 0.5, "rabi-monitor": 0.04, "transition": 4.0}[scen]
        cfg.kappa = scalar("model", "kappa", default_kappa)

    dt_default, n_default = _GRID_DEFAULTS[scen]
    cfg.t0 = scalar("grid", "t0", 0.0)
    cfg.dt = scalar("grid", "dt", dt_default)
    cfg.n_steps = scalar("grid", "n_steps", n_default)

    if scen == "chm":
        cfg.record_value = scalar("chm", "record_value", 1.0)
        cfg.record_file = scalar("chm", "record_file", None)
    elif scen == "sse-ensemble":
        cfg.n_traj = scalar("sse", "n_traj", 2000)
    elif scen == "chain":
        cfg.strength = scalar("chain", "strength", 0.1)
        cfg.n_shots = scalar("chain", "n_shots", 500)
        cfg.n_chains = scalar("chain", "n_chains", 1)
        cfg.collapse_threshold = scalar("chain", "collapse_threshold", 1e-4)
    elif scen == "zeno":
        if "zeno" in entries and "kappa_list" in entries["zeno"]:
            no, value = entries["zeno"]["kappa_list"]
            try:
                ks = tuple(float(tok) for tok in value.split())
            except ValueError:
                raise ConfigError(f"kappa_list must be numbers, got {value!r}", no) from None
            if not ks or any(k <= 0 for k in ks):
                raise ConfigError("kappa_list values must be positive", no)
            if any(b <= a for a, b in zip(ks, ks[1:])):
                raise ConfigError("kappa_list must be sorted ascending", no)
            cfg.zeno_kappas = ks
        cfg.zeno_n_traj = scalar("zeno", "n_traj", 400)
    elif scen == "rabi-monitor":
        cfg.search_bins = scalar("rabi", "search_bins", 8)
        cfg.band_bins = scalar("rabi", "band_bins", 25)
        cfg.max_offset_bins = scalar("rabi", "max_offset_bins", 2)
    elif scen == "transition":
        cfg.smoothing_window = scalar("transition", "smoothing_window", None)
        cfg.threshold_fraction = scalar("transition", "threshold_fraction", 0.25)
        cfg.initial = scalar("transition", "initial", "ground")
        if cfg.initial not in ("ground", "excited"):
            no, _ = entries["transition"]["initial"]
            raise ConfigError("initial must be 'ground' or 'excited'", no)

    return cfg
