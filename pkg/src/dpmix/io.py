"""CSV ingestion, run configuration and JSON model artifacts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dp import AlphaPrior, DirichletProcess, RetainedSample
from .errors import ConfigError, DataDomainError
from .hdp import HdpGroup, HierarchicalDirichletProcess
from .kernels import kernel_from_dict, make_kernel
from .stats import RandomSource

ARTIFACT_FORMAT = "dpmix-model"
ARTIFACT_VERSION = 1


@dataclass
class FitConfig:
    """Everything needed to reproduce a fit.

    ``seed`` has no default: every run is seeded explicitly.
    """

    seed: int
    kernel: str = "normal"
    g0_priors: list | None = None
    mh_step_sizes: list | None = None
    hyper_prior_parameters: list | None = None
    kernel_options: dict = field(default_factory=dict)
    alpha_prior: tuple = (2.0, 4.0)
    gamma_prior: tuple = (2.0, 4.0)
    alpha: float | None = None
    fix_alpha: bool = False
    iterations: int = 1000
    thinning: int = 1
    store_samples: bool = True
    update_prior: bool = False
    m: int = 3
    mh_steps: int = 1
    scale: bool = False
    columns: list | None = None
    group_col: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.seed is None or isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("iterations", "thinning", "m"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if not isinstance(self.mh_steps, int) or self.mh_steps < 0:
            raise ConfigError(f"mh_steps must be an integer >= 0, got {self.mh_steps!r}")
        for name in ("alpha_prior", "gamma_prior"):
            pair = getattr(self, name)
            if len(pair) != 2:
                raise ConfigError(f"{name} needs two values (shape, rate)")
            AlphaPrior(*pair)
            setattr(self, name, tuple(float(v) for v in pair))
        if self.alpha is not None and not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "seed" not in values:
            raise ConfigError("a seed is required")
        return cls(**values)

    def to_dict(self):
        out = asdict(self)
        out["alpha_prior"] = list(self.alpha_prior)
        out["gamma_prior"] = list(self.gamma_prior)
        return out

    def build_kernel(self, dim=None):
        opts = dict(self.kernel_options)
        if dim is not None and self.kernel.startswith("mvnormal") and self.g0_priors is None:
            opts.setdefault("dim", dim)
        g0 = self.g0_priors
        if g0 is not None and self.kernel.startswith("mvnormal"):
            g0 = [np.asarray(v, dtype=float) for v in g0]
        try:
            return make_kernel(self.kernel, g0_priors=g0, mh_step_sizes=self.mh_step_sizes,
                               hyper_prior_parameters=self.hyper_prior_parameters, **opts)
        except TypeError as exc:
            raise ConfigError(f"bad options for kernel {self.kernel!r}: {exc}") from None


# -- CSV -----------------------------------------------------------------------

def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


@dataclass
class Table:
    """Parsed CSV: column names and the raw cell strings of each data row."""

    names: list
    rows: list
    first_line: int

    def column_index(self, column):
        if isinstance(column, int) or (isinstance(column, str) and column.isdigit()
                                       and column not in self.names):
            idx = int(column)
            if not 0 <= idx < len(self.names):
                raise DataDomainError(f"column index {idx} out of range")
            return idx
        try:
            return self.names.index(column)
        except ValueError:
            raise DataDomainError(f"no column named {column!r}; have {self.names}") from None


def read_table(path):
    """Read a CSV file; the first row is a header if any of its cells is not numeric."""
    try:
        with open(path, newline="") as fh:
            raw = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except FileNotFoundError:
        raise DataDomainError(f"data file not found: {path}") from None
    except OSError as exc:
        raise DataDomainError(f"cannot read {path}: {exc}") from None
    if raw and not all(_is_number(c) for c in raw[0]):
        return Table([c.strip() for c in raw[0]], raw[1:], 2)
    width = len(raw[0]) if raw else 0
    return Table([str(i) for i in range(width)], raw, 1)


def ingest_csv(path, columns=None, exclude=()):
    """Load selected numeric columns of a CSV file as an ``(n, d)`` matrix.

    Parameters
    ----------
    columns : list of str or int, optional
        Column names (or 0-based indices); all columns by default.
    exclude : sequence
        Columns to leave out when ``columns`` is not given.

    Errors name the 1-based data row (and file line) of the offending cell.
    """
    table = read_table(path)
    if columns is None:
        skip = {table.column_index(c) for c in exclude}
        idx = [i for i in range(len(table.names)) if i not in skip]
    else:
        idx = [table.column_index(c) for c in columns]
    if not idx:
        raise DataDomainError("no columns selected")
    if not table.rows:
        raise DataDomainError(f"{path} contains no data rows")
    data = np.empty((len(table.rows), len(idx)))
    for r, row in enumerate(table.rows):
        for c, j in enumerate(idx):
            cell = row[j].strip() if j < len(row) else ""
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise DataDomainError(
                    f"non-numeric value {cell!r} in column {table.names[j]!r} at row {r + 1} "
                    f"(line {r + table.first_line})", r)
            data[r, c] = value
    return data


def ingest_grouped_csv(path, group_col, columns=None):
    """Split a CSV into one data matrix per distinct value of ``group_col``.

    Groups are ordered by first appearance.
    """
    table = read_table(path)
    g = table.column_index(group_col)
    keys = [row[g].strip() if g < len(row) else "" for row in table.rows]
    data = ingest_csv(path, columns, exclude=[table.names[g]])
    order = list(dict.fromkeys(keys))
    keys = np.array(keys, dtype=object)
    return order, [data[keys == k] for k in order]


@dataclass
class Standardization:
    """Per-column affine map ``(y - center) / scale``."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data):
        center = data.mean(axis=0)
        scale = data.std(axis=0, ddof=1) if data.shape[0] > 1 else np.ones(data.shape[1])
        scale = np.where(scale > 0, scale, 1.0)
        return cls(center, scale)

    def apply(self, data):
        return (data - self.center) / self.scale

    def invert(self, data):
        return data * self.scale + self.center

    def to_dict(self):
        return {"center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["center"], float), np.asarray(d["scale"], float))


def standardize(data):
    """Return standardised data and the transform that produced it."""
    t = Standardization.fit(data)
    return t.apply(data), t


# -- artifacts -----------------------------------------------------------------

def _params_to_json(theta):
    return [p.tolist() for p in theta]


def _params_from_json(values):
    return tuple(np.asarray(v, dtype=float) for v in values)


def _sample_to_json(s):
    return {"iteration": s.iteration, "alpha": s.alpha, "counts": s.counts.tolist(),
            "labels": s.labels.tolist(), "cluster_params": _params_to_json(s.cluster_params)}


def _sample_from_json(d):
    return RetainedSample(_params_from_json(d["cluster_params"]),
                          np.asarray(d["counts"], dtype=np.int64),
                          np.asarray(d["labels"], dtype=np.int64), d["alpha"], d["iteration"])


def _rng_to_json(rng):
    return {"seed": int(rng.seed) if isinstance(rng, RandomSource) else None,
            "state": rng.bit_generator.state}


def _rng_from_json(d):
    rng = RandomSource(d["seed"])
    rng.bit_generator.state = d["state"]
    return rng


@dataclass
class ModelArtifact:
    """A fitted model with the configuration and transform that produced it."""

    config: FitConfig
    state: object
    transform: Standardization | None = None
    extra: dict = field(default_factory=dict)

    @property
    def kind(self):
        return "hdp" if isinstance(self.state, HierarchicalDirichletProcess) else "dp"

    def to_dict(self):
        s = self.state
        out = {
            "format": ARTIFACT_FORMAT,
            "version": ARTIFACT_VERSION,
            "kind": self.kind,
            "config": self.config.to_dict(),
            "transform": None if self.transform is None else self.transform.to_dict(),
            "extra": self.extra,
            "kernel": s.md.to_dict(),
            "rng": _rng_to_json(s.rng),
        }
        common = {"m": s.m, "mh_steps": s.mh_steps, "iteration": s.iteration,
                  "mh_accepted": s.mh_accepted, "mh_proposed": s.mh_proposed}
        if self.kind == "dp":
            out["state"] = {
                **common,
                "data": s.data.tolist(),
                "labels": s.labels.tolist(),
                "cluster_params": _params_to_json(s.cluster_params),
                "alpha": s.alpha,
                "alpha_prior": [s.alpha_prior.a, s.alpha_prior.b],
                "history": [_sample_to_json(h) for h in s.history],
            }
        else:
            out["state"] = {
                **common,
                "dishes": _params_to_json(s.dishes),
                "gamma": s.gamma,
                "alpha_prior": [s.alpha_prior.a, s.alpha_prior.b],
                "gamma_prior": [s.gamma_prior.a, s.gamma_prior.b],
                "groups": [{
                    "data": g.data.tolist(),
                    "tables": g.tables.tolist(),
                    "table_dish": g.table_dish.tolist(),
                    "alpha": g.alpha,
                    "history": [_sample_to_json(h) for h in g.history],
                } for g in s.groups],
            }
        return out

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != ARTIFACT_FORMAT:
            raise ConfigError("not a dpmix model artifact")
        if d.get("version") != ARTIFACT_VERSION:
            raise ConfigError(f"unsupported artifact version {d.get('version')}")
        md = kernel_from_dict(d["kernel"])
        rng = _rng_from_json(d["rng"])
        st = d["state"]
        dim = md.data_dim
        if d["kind"] == "dp":
            data = np.asarray(st["data"], dtype=float).reshape(-1, dim or 1)
            state = DirichletProcess(data, md, st["labels"], _params_from_json(st["cluster_params"]),
                                     st["alpha"], AlphaPrior(*st["alpha_prior"]), st["m"],
                                     st["mh_steps"], rng,
                                     [_sample_from_json(h) for h in st["history"]],
                                     st["iteration"])
        else:
            groups = []
            for gd in st["groups"]:
                g = HdpGroup(np.asarray(gd["data"], dtype=float).reshape(-1, dim or 1),
                             gd["tables"], gd["table_dish"], gd["alpha"])
                g.history = [_sample_from_json(h) for h in gd["history"]]
                groups.append(g)
            state = HierarchicalDirichletProcess(
                groups, md, _params_from_json(st["dishes"]), st["gamma"],
                AlphaPrior(*st["alpha_prior"]), AlphaPrior(*st["gamma_prior"]), st["m"],
                st["mh_steps"], rng)
            state.iteration = st["iteration"]
        state.mh_accepted = st["mh_accepted"]
        state.mh_proposed = st["mh_proposed"]
        transform = None if d["transform"] is None else Standardization.from_dict(d["transform"])
        return cls(FitConfig.from_dict(d["config"]), state, transform, d.get("extra", {}))


def dumps_artifact(artifact):
    return json.dumps(artifact.to_dict(), sort_keys=True, allow_nan=False,
                      separators=(",", ":")) + "\n"


def save_artifact(artifact, path):
    with open(path, "w") as fh:
        fh.write(dumps_artifact(artifact))


def load_artifact(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"artifact not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"artifact {path} is not valid JSON: {exc}") from None
    return ModelArtifact.from_dict(payload)
