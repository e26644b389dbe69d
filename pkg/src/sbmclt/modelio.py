"""Model files and machine-readable outputs (CSV, JSON, gnuplot data)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
from scipy import stats

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ModelError
from .spectral import Kernel, TypeProfile

SCHEMA_VERSION = 1


def _matrix(values, d: int, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim == 2:
        a = a.reshape(-1)
    if a.size != d * d:
        raise ModelError(f"{name} must have d*d = {d * d} entries in row-major order, got {a.size}")
    return a.reshape(d, d)


def model_from_mapping(data: dict) -> tuple[Kernel, TypeProfile]:
    """Build a model from keys ``d``, ``K``, ``mu`` and optional ``Lambda``, ``beta``."""
    unknown = set(data) - {"d", "K", "Lambda", "mu", "beta"}
    if unknown:
        raise ModelError(f"unknown model keys: {sorted(unknown)}")
    for key in ("d", "K", "mu"):
        if key not in data:
            raise ModelError(f"model is missing required key {key!r}")
    d = data["d"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ModelError("d must be a positive integer")
    try:
        K = _matrix(data["K"], d, "K")
        Lam = _matrix(data["Lambda"], d, "Lambda") if "Lambda" in data else None
        mu = np.asarray(data["mu"], dtype=float).reshape(-1)
        beta = np.asarray(data["beta"], dtype=float).reshape(-1) if "beta" in data else None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"model entries must be numeric: {exc}") from exc
    if mu.size != d:
        raise ModelError(f"mu must have d = {d} entries, got {mu.size}")
    return Kernel(K, Lam), TypeProfile(mu, beta)


def load_model(path: str | Path) -> tuple[Kernel, TypeProfile]:
    """Read a flat key-value (TOML) model file."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"malformed model file {path}: {exc}") from exc
    return model_from_mapping(data)


def format_model(kernel: Kernel, profile: TypeProfile) -> str:
    def row(a):
        return "[" + ", ".join(fmt17(x) for x in np.asarray(a).reshape(-1)) + "]"

    return (
        f"d = {kernel.d}\n"
        f"K = {row(kernel.K)}\n"
        f"Lambda = {row(kernel.Lambda)}\n"
        f"mu = {row(profile.mu)}\n"
        f"beta = {row(profile.beta)}\n"
    )


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def fmt6(x: float) -> str:
    return format(float(x), ".6g")


def _json_encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_json_encode(str(k), indent, level + 1)}: {_json_encode(v, indent, level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_json_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _json_encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return "null"
        text = fmt17(obj)
        # keep floats recognisable as floats (2.0, not 2) so the schema is value-independent
        return text if any(ch in text for ch in ".e") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if hasattr(obj, "value"):  # enums
        return _json_encode(obj.value, indent, level)
    raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def dumps_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _json_encode(obj, 2, 0) + "\n"


def write_json(path: str | Path, obj: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **obj}
    Path(path).write_text(dumps_json(payload), encoding="utf-8")


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """CSV with a leading ``# schema_version: N`` comment line."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt17(x) if isinstance(x, (float, np.floating)) else x for x in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def component_rows(sample, d: int):
    for l, counts in enumerate(sample.tallies, start=1):
        yield [sample.seed, l, int(counts.sum()), *(int(c) for c in counts)]


def components_header(d: int) -> list[str]:
    return ["seed", "l", "size", *(f"count_{k + 1}" for k in range(d))]


def write_components_csv(path, samples) -> None:
    samples = list(samples)
    d = samples[0].tallies.shape[1]
    write_csv(path, components_header(d), (row for s in samples for row in component_rows(s, d)))


def write_path_csv(path, hpath) -> None:
    d = hpath.v.size
    header = ["l", "E", *(f"delta_{k + 1}" for k in range(d))]
    rows = ([l, float(e), *(float(x) for x in jv)] for l, (e, jv) in enumerate(zip(hpath.jump_locations, hpath.jump_vectors), 1))
    write_csv(path, header, rows)


def write_hist_qq(directory: str | Path, stem: str, values, mean: float, var: float, bins: int = 40) -> None:
    """Histogram (with the normal density) and normal QQ data as whitespace-separated columns."""
    directory = Path(directory)
    values = np.sort(np.asarray(values, dtype=float))
    sd = math.sqrt(var) if var > 0 else 1.0
    dens, edges = np.histogram(values, bins=bins, density=True)
    centres = (edges[:-1] + edges[1:]) / 2
    with (directory / f"hist_{stem}.dat").open("w", encoding="utf-8") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n# centre density normal_pdf\n")
        for c, p in zip(centres, dens):
            fh.write(f"{fmt17(c)} {fmt17(p)} {fmt17(stats.norm.pdf(c, mean, sd))}\n")
    probs = (np.arange(1, values.size + 1) - 0.5) / values.size
    theo = stats.norm.ppf(probs, mean, sd)
    with (directory / f"qq_{stem}.dat").open("w", encoding="utf-8") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n# theoretical empirical\n")
        for t, v in zip(theo, values):
            fh.write(f"{fmt17(t)} {fmt17(v)}\n")
