"""INI-like configuration files with typed values.

Grammar (informal EBNF):

    file     := { section }
    section  := "[" name "]" NL { entry }
    entry    := key "=" value NL
    value    := list | scalar
    list     := "[" [ value { "," value } ] "]"
    scalar   := int | float | bool | text
    bool     := "true" | "false"

Commas inside parentheses do not split list items, so expressions such as
`sqrt(kappa*p/rho)` survive intact. Lines starting with `#` or `;` are comments.
"""

import configparser
import re

# section -> allowed keys; None means free keys (names chosen by the user)
SCHEMA = {
    "chart": {"names"},
    "parameters": None,
    "fields": None,
    "sample_domain": {"bounds", "count", "seed"},
    "tolerances": {"span_tol", "independence_tol", "const_tol", "flag_tol"},
    "sim": {"system", "kappa", "u0", "scheme", "cfl", "N", "t_end", "bc", "x_min", "x_max",
            "stride", "window", "plot_components", "plot_times", "matrix"},
    "ic": None,
    "output": {"formats", "prefix"},
    "module": set("abcdefghi"),
    "phi": {"phi1", "phi2", "phi3"},
    "euler": {"kappa", "t3", "count"},
    "separable": {"A", "B", "x_range", "t_range", "Nx", "Nt", "t1_corner", "branch"},
}

DEFAULTS = {
    "sample_domain": {"count": 64, "seed": 0},
    "tolerances": {"span_tol": 1e-9, "independence_tol": 1e-9, "const_tol": 1e-8, "flag_tol": 1e-6},
    "sim": {"scheme": "maccormack", "cfl": 0.4, "N": 200, "t_end": 0.2, "bc": "extrapolate",
            "x_min": 0.0, "x_max": 1.0, "stride": 1},
    "output": {"formats": ["json"], "prefix": "report"},
}


class ConfigError(ValueError):
    pass


_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def split_top(text, sep=","):
    """Split at separators that are not nested in () or []."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise ConfigError(f"unbalanced brackets in {text!r}")
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ConfigError(f"unbalanced brackets in {text!r}")
    out.append("".join(cur))
    return out


def parse_value(text):
    s = text.strip()
    if s.startswith("[") and s.endswith("]") and _balanced_outer(s):
        inner = s[1:-1].strip()
        if not inner:
            return []
        return [parse_value(p) for p in split_top(inner)]
    if _INT.match(s):
        return int(s)
    if _FLOAT.match(s):
        return float(s)
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    return s


def _balanced_outer(s):
    depth = 0
    for k, ch in enumerate(s):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth == 0 and k != len(s) - 1:
                return False
    return depth == 0


def parse_text(text, source="<config>"):
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        allowed = SCHEMA[sec]
        entries = {}
        for key, raw in cp.items(sec):
            if allowed is not None and key not in allowed:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            entries[key] = parse_value(raw)
        out[sec] = entries
    return out


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(path))


def merge(base, extra):
    out = {k: dict(v) for k, v in base.items()}
    for sec, entries in extra.items():
        out.setdefault(sec, {}).update(entries)
    return out


def resolve(cfg):
    """Apply defaults for the sections that have them."""
    out = {k: dict(v) for k, v in cfg.items()}
    for sec, d in DEFAULTS.items():
        merged = dict(d)
        merged.update(out.get(sec, {}))
        out[sec] = merged
    return out
