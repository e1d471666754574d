"""Model files: an INI dialect read with ``configparser``.

Grammar (keys are case-sensitive)::

    [model]
    family = single1d | lv2comp | predprey | expl2d | lv3comp | foodchain | custom
    n = 2                  # required for custom and foodchain
    n0 = 2                 # required for custom
    a1_1 = 0.5             # built-in family parameters, flat names

    [env.1]                # per-environment tables
    a.1 = 0.5              # built-ins: a.i means parameter a{i}_1 (likewise b, c, d)
    poly.1 = 1: 0.5, x1: -0.05, x1*x2: 0.1   # custom: fitness of species 1

    [switch]
    kind = constant        # or state
    q12 = 2                # rate from environment 1 to 2 (q.1.2 also accepted)
    q21 = 1: 1, x1: 0.5    # state kind: polynomial entries
    rate_bound = 4         # state kind only
    rate_floor = 0.5

    [gauge]
    kind = linear          # or sqrt
    env_weights = 1, 1
    species_weights = 1, 1

Unknown sections or keys are rejected with file/line context.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import replace
from pathlib import Path

from ..families import FAMILY_ALIASES, REQUIRED, from_params
from ..model import EnvironmentField, GaugeFunction, ModelError, ModelSpec, SwitchLaw
from ..polynomial import Poly, format_monomial, parse_monomial


class ModelFileError(ModelError):
    """Parse or validation failure with location context."""


GAUGE_PARAMS = {
    "Single1D": {"alpha", "beta"},
    "Expl2D": {"alpha", "beta"},
    "LV2Comp": {"alpha_1", "alpha_2"},
    "PredPrey": {"alpha_1", "alpha_2"},
    "LV3Comp": {"alpha_1", "alpha_2"},
}
_Q = re.compile(r"^q(?:(\d)(\d)|\.(\d+)\.(\d+))$")
_ENV = re.compile(r"^env\.(\d+)$")
_ENV_KEY = re.compile(r"^(a|b|c|d|poly)\.(\d+)$")


class _Source:
    """Locates keys in the raw text so errors can cite a line."""

    def __init__(self, path: str, text: str):
        self.path = path
        self.lines = text.splitlines()

    def line(self, section: str, key: str | None = None) -> int | None:
        current = None
        for no, raw in enumerate(self.lines, 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
                if key is None and current == section:
                    return no
                continue
            if current == section and key is not None:
                name = re.split(r"[=:]", s, maxsplit=1)[0].strip()
                if name == key:
                    return no
        return None

    def error(self, section: str, key: str | None, msg: str) -> ModelFileError:
        no = self.line(section, key)
        where = f"{self.path}:{no}" if no else self.path
        what = f"[{section}]" + (f" {key}" if key else "")
        return ModelFileError(f"{where}: {what}: {msg}")


def _float(src: _Source, section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise src.error(section, key, f"not a number: {text!r}") from None


def _floats(src: _Source, section: str, key: str, text: str) -> tuple[float, ...]:
    return tuple(_float(src, section, key, t) for t in text.split(",") if t.strip())


def parse_poly(text: str, nvars: int) -> Poly:
    """``"1: 0.5, x1: -0.05"`` into a polynomial; repeated monomials add up."""
    terms: dict = {}
    for item in text.split(","):
        if not item.strip():
            continue
        mono, sep, coef = item.rpartition(":")
        if not sep:
            raise ValueError(f"term {item.strip()!r} needs the form monomial: coefficient")
        m = parse_monomial(mono.strip(), nvars)
        terms[m] = terms.get(m, 0.0) + float(coef)
    return Poly.from_dict(nvars, terms)


def format_poly(p: Poly) -> str:
    return ", ".join(f"{format_monomial(m)}: {c!r}" for m, c in p.terms) or "1: 0.0"


def _switch_key(key: str) -> tuple[int, int] | None:
    m = _Q.match(key)
    if not m:
        return None
    i, j = (m.group(1), m.group(2)) if m.group(1) else (m.group(3), m.group(4))
    return int(i), int(j)


def parse_model_text(text: str, path: str = "<string>") -> ModelSpec:
    src = _Source(path, text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ModelFileError(f"{path}: {exc}") from None
    if "model" not in cp:
        raise ModelFileError(f"{path}: missing [model] section")
    for sec in cp.sections():
        if sec not in ("model", "switch", "gauge") and not _ENV.match(sec):
            raise src.error(sec, None, "unknown section")
    fam_text = cp["model"].get("family", "custom").strip()
    family = FAMILY_ALIASES.get(fam_text.lower())
    if family is None:
        raise src.error("model", "family", f"unknown family {fam_text!r}")
    try:
        if family == "Custom":
            model = _parse_custom(cp, src)
        else:
            model = _parse_family(cp, src, family)
        if "gauge" in cp:
            model = replace(model, gauge=_parse_gauge(cp, src))
    except ModelFileError:
        raise
    except (ModelError, ValueError) as exc:
        raise ModelFileError(f"{path}: {exc}") from None
    return model


def parse_model_file(path) -> ModelSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFileError(f"{path}: {exc.strerror}") from None
    return parse_model_text(text, str(path))


def _parse_family(cp, src: _Source, family: str) -> ModelSpec:
    params: dict[str, float] = {}
    origin: dict[str, tuple[str, str]] = {}

    def put(name, value, sec, key):
        if name in params:
            raise src.error(sec, key, f"parameter {name} given twice")
        params[name] = _float(src, sec, key, value)
        origin[name] = (sec, key)

    for key, value in cp["model"].items():
        if key in ("family",):
            continue
        if key == "n0":
            if int(_float(src, "model", key, value)) != 2 and family != "FoodChain":
                raise src.error("model", key, f"{family} has two environments")
            continue
        if key == "n" and family != "FoodChain":
            continue
        put(key, value, "model", key)
    for sec in cp.sections():
        m = _ENV.match(sec)
        if not m:
            continue
        k = int(m.group(1))
        for key, value in cp[sec].items():
            km = _ENV_KEY.match(key)
            if not km or km.group(1) == "poly":
                raise src.error(sec, key, f"unknown key for family {family}")
            put(f"{km.group(1)}{km.group(2)}_{k}", value, sec, key)
    if "switch" in cp:
        for key, value in cp["switch"].items():
            if key == "kind":
                if value.strip() != "constant":
                    raise src.error("switch", key, "built-in families use constant switching")
                continue
            ij = _switch_key(key)
            if ij is None:
                raise src.error("switch", key, "unknown key")
            put(f"q{ij[0]}{ij[1]}", value, "switch", key)
    if family != "FoodChain":
        allowed = set(REQUIRED[family]) | {"q12", "q21"} | GAUGE_PARAMS[family]
        for name in params:
            if name not in allowed:
                sec, key = origin[name]
                raise src.error(sec, key, f"unknown parameter {name!r} for {family}")
        for name in REQUIRED[family] + ("q12", "q21"):
            if name not in params:
                raise src.error("model", None, f"missing parameter {name!r} for {family}")
    for name, v in params.items():
        if name.startswith("q") and v < 0:
            sec, key = origin[name]
            raise src.error(sec, key, "switching rates must be nonnegative")
    if family == "FoodChain":
        n = params.pop("n", None)
        if n is None:
            raise src.error("model", None, "FoodChain needs n")
        return from_params(family, dict(params, n=n))
    return from_params(family, params)


def _parse_custom(cp, src: _Source) -> ModelSpec:
    sec = cp["model"]
    for key in sec:
        if key not in ("family", "n", "n0"):
            raise src.error("model", key, "unknown key for a custom model")
    if "n" not in sec or "n0" not in sec:
        raise src.error("model", None, "custom models need n and n0")
    n = int(_float(src, "model", "n", sec["n"]))
    n0 = int(_float(src, "model", "n0", sec["n0"]))
    if n < 1 or n0 < 1:
        raise src.error("model", None, "need n >= 1 and n0 >= 1")
    fields = []
    for k in range(1, n0 + 1):
        name = f"env.{k}"
        if name not in cp:
            raise src.error("model", None, f"missing section [{name}]")
        comps = [None] * n
        for key, value in cp[name].items():
            km = _ENV_KEY.match(key)
            if not km or km.group(1) != "poly":
                raise src.error(name, key, "custom environments take poly.i keys only")
            i = int(km.group(2))
            if not 1 <= i <= n:
                raise src.error(name, key, f"species index out of range 1..{n}")
            try:
                comps[i - 1] = parse_poly(value, n)
            except ValueError as exc:
                raise src.error(name, key, str(exc)) from None
        missing = [i + 1 for i, c in enumerate(comps) if c is None]
        if missing:
            raise src.error(name, None, f"missing poly entries for species {missing}")
        fields.append(EnvironmentField(tuple(comps)))
    for sec in cp.sections():
        m = _ENV.match(sec)
        if m and not 1 <= int(m.group(1)) <= n0:
            raise src.error(sec, None, f"environment out of range 1..{n0}")
    switch = _parse_switch(cp, src, n, n0)
    return ModelSpec(n, n0, tuple(fields), switch, None, "Custom", ())


def _parse_switch(cp, src: _Source, n: int, n0: int) -> SwitchLaw:
    if "switch" not in cp:
        if n0 == 1:
            return SwitchLaw.constant([[0.0]])
        raise src.error("model", None, "missing [switch] section")
    sec = cp["switch"]
    kind = sec.get("kind", "constant").strip()
    if kind not in ("constant", "state"):
        raise src.error("switch", "kind", f"unknown switch kind {kind!r}")
    entries = {}
    bound = floor = None
    for key, value in sec.items():
        if key == "kind":
            continue
        if key in ("rate_bound", "rate_floor"):
            if kind != "state":
                raise src.error("switch", key, "only used with kind = state")
            v = _float(src, "switch", key, value)
            if key == "rate_bound":
                bound = v
            else:
                floor = v
            continue
        ij = _switch_key(key)
        if ij is None:
            raise src.error("switch", key, "unknown key")
        i, j = ij
        if i == j or not (1 <= i <= n0 and 1 <= j <= n0):
            raise src.error("switch", key, f"bad rate index {(i, j)}")
        if kind == "constant":
            v = _float(src, "switch", key, value)
            if v < 0:
                raise src.error("switch", key, "switching rates must be nonnegative")
            entries[ij] = v
        else:
            try:
                entries[ij] = float(value) if ":" not in value else parse_poly(value, n)
            except ValueError as exc:
                raise src.error("switch", key, str(exc)) from None
            if isinstance(entries[ij], float) and entries[ij] < 0:
                raise src.error("switch", key, "switching rates must be nonnegative")
    if kind == "constant":
        q = [[entries.get((i, j), 0.0) for j in range(1, n0 + 1)] for i in range(1, n0 + 1)]
        return SwitchLaw.constant(q)
    if bound is None:
        raise src.error("switch", None, "state-dependent switching needs rate_bound")
    return SwitchLaw.state_dependent(n0, entries, bound, floor)


def _parse_gauge(cp, src: _Source) -> GaugeFunction:
    sec = cp["gauge"]
    for key in sec:
        if key not in ("kind", "env_weights", "species_weights"):
            raise src.error("gauge", key, "unknown key")
    for key in ("kind", "env_weights", "species_weights"):
        if key not in sec:
            raise src.error("gauge", None, f"missing {key}")
    try:
        return GaugeFunction(sec["kind"].strip(),
                             _floats(src, "gauge", "env_weights", sec["env_weights"]),
                             _floats(src, "gauge", "species_weights", sec["species_weights"]))
    except ModelError as exc:
        raise src.error("gauge", None, str(exc)) from None


# --------------------------------------------------------------------------
# writing


def _family_gauge(model: ModelSpec) -> GaugeFunction | None:
    if model.family == "Custom":
        return None
    try:
        return from_params(model.family, model.param_dict).gauge
    except ModelError:
        return None


def format_model(model: ModelSpec) -> str:
    """Text that ``parse_model_text`` turns back into an equal ModelSpec."""
    out = ["[model]"]
    if model.family != "Custom":
        out.append(f"family = {model.family.lower()}")
        for key, v in model.params:
            out.append(f"{key} = {int(v) if key == 'n' else repr(float(v))}")
    else:
        out += ["family = custom", f"n = {model.n}", f"n0 = {model.n0}"]
        for k, fld in enumerate(model.fields, 1):
            out += ["", f"[env.{k}]"]
            for i, p in enumerate(fld.fitness, 1):
                out.append(f"poly.{i} = {format_poly(p)}")
        out += ["", "[switch]"]
        sw = model.switch
        if sw.is_constant:
            out.append("kind = constant")
            for i, row in enumerate(sw.matrix, 1):
                for j, v in enumerate(row, 1):
                    if i != j and v != 0:
                        out.append(f"q.{i}.{j} = {float(v)!r}")
        else:
            out.append("kind = state")
            for (i, j), v in sw.entries:
                if isinstance(v, Poly):
                    out.append(f"q.{i}.{j} = {format_poly(v)}")
                elif callable(v):
                    raise ModelError("callable switching rates cannot be written to a model file")
                else:
                    out.append(f"q.{i}.{j} = {float(v)!r}")
            out.append(f"rate_bound = {float(sw.rate_bound)!r}")
            if sw.rate_floor is not None:
                out.append(f"rate_floor = {float(sw.rate_floor)!r}")
    if model.gauge is not None and model.gauge != _family_gauge(model):
        g = model.gauge
        out += ["", "[gauge]", f"kind = {g.kind}",
                "env_weights = " + ", ".join(repr(float(v)) for v in g.env_weights),
                "species_weights = " + ", ".join(repr(float(v)) for v in g.species_weights)]
    return "\n".join(out) + "\n"


def write_model_file(model: ModelSpec, path) -> None:
    Path(path).write_text(format_model(model))
