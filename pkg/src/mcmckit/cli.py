"""Batch command-line front end.

Every command resolves its options from an optional ``key=value`` config file
(``--config``) overlaid by command-line flags, records the resolved config in
each output file and prints a one-line summary with the seed.

Exit codes: 0 success, 2 invalid configuration, 3 divergence, 1 other errors.
Errors are reported on stderr as one JSON line.
"""
import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ebm, io, mcint, optim, pssmlt, sde
from ._spec import as_array, as_float, as_int, format_spec, parse_spec
from .diagnostics import diagnose
from .exceptions import ConfigurationError, DivergenceError, McmcError
from .samplers import SamplerConfig, run_chain
from .targets import make_target

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3

SPEC, INT, FLOAT, STR = "spec", "int", "float", "str"


def _opt(type_, default=None, required=False, help=""):
    return {"type": type_, "default": default, "required": required, "help": help}


_SEED = _opt(INT, 0, help="unsigned integer seed (default 0)")

COMMANDS = {
    "sample": {
        "target": _opt(SPEC, required=True, help="e.g. gaussian:dim=2"),
        "sampler": _opt(SPEC, "mh:sigma=1.0", help="mh:sigma= | ula:tau= | mala:tau= | hmc:eps=,L= | almc:tau=,t_max=,levels=,steps_per_level="),
        "steps": _opt(INT, 10000),
        "burn_in": _opt(INT, 0),
        "thin": _opt(INT, 1),
        "x0": _opt(STR, help="start point, '/'-separated (default: origin)"),
        "chains": _opt(INT, 1, help="independent chains with seeds seed..seed+N-1"),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="samples CSV"),
        "report": _opt(STR, help="optional diagnostics JSON"),
    },
    "diagnose": {
        "input": _opt(STR, required=True, help="samples CSV written by 'sample'"),
        "target": _opt(SPEC, help="target for the histogram TV distance"),
        "bounds": _opt(STR, help="histogram range, 'lo/hi' per dimension joined by ';'"),
        "bins": _opt(INT, 50),
        "burn_in": _opt(INT, 0, help="rows to drop from the start of each chain"),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="report JSON"),
    },
    "sde": {
        "process": _opt(STR, "brownian", help="brownian | langevin"),
        "target": _opt(SPEC, help="target whose score drives the langevin process"),
        "steps": _opt(INT, 1000),
        "dt": _opt(FLOAT, 0.01, help="time step of the langevin process"),
        "step_sigma": _opt(FLOAT, 1.0, help="per-step sd of the brownian walk"),
        "dim": _opt(INT, 2),
        "x0": _opt(STR),
        "constraint": _opt(SPEC, help="disk:radius=,center= | annulus:inner=,outer="),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="path CSV"),
    },
    "pssmlt": {
        "estimator": _opt(SPEC, "spike", help="constant:c= | spike:width=,radius= | two-island | half-plane"),
        "width": _opt(INT, 32),
        "height": _opt(INT, 32),
        "n_mutations": _opt(INT, 100000),
        "large_step_prob": _opt(FLOAT, 0.3),
        "sigma": _opt(FLOAT, 0.05),
        "splat": _opt(STR, "expected"),
        "n_mc": _opt(INT, 100000),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="PGM image"),
        "raw": _opt(STR, help="optional CSV of raw pixel values"),
    },
    "sgld": {
        "model": _opt(SPEC, "conjugate", help="conjugate:n=,true_mean=,prior_var=,noise_var="),
        "data": _opt(STR, help="one-column CSV of observations (overrides synthetic data)"),
        "eta": _opt(FLOAT, 1e-3),
        "steps": _opt(INT, 100000),
        "burn_in": _opt(INT, 1000),
        "theta0": _opt(FLOAT, 0.0),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="trace CSV"),
        "report": _opt(STR, help="optional JSON comparing with the closed-form posterior"),
    },
    "ebm-train": {
        "family": _opt(STR, "gaussian_energy", help="gaussian_energy | quadratic_form"),
        "data": _opt(STR, help="CSV of observations, one column per dimension"),
        "synthetic": _opt(SPEC, "gaussian:mean=3,sd=1,n=1000", help="used when no data file is given"),
        "inner": _opt(SPEC, "ula:eps=0.05", help="ula:eps= | mh:sigma="),
        "k": _opt(INT, 20),
        "init": _opt(STR, "from_data"),
        "persistent": _opt(INT, 0),
        "eta": _opt(FLOAT, 0.05),
        "steps": _opt(INT, 2000),
        "batch_size": _opt(INT, 200),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="model JSON"),
    },
    "ebm-sample": {
        "model": _opt(STR, required=True, help="model JSON written by ebm-train"),
        "n": _opt(INT, 1000),
        "steps": _opt(INT, 500),
        "inner": _opt(SPEC, "ula:eps=0.01"),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="samples CSV"),
    },
    "mis": {
        "integrand": _opt(SPEC, "two-bump", help="two-bump:narrow=c/sd/mass,wide=c/sd/mass"),
        "n": _opt(INT, 100000, help="draws per strategy"),
        "seed": _SEED,
        "out": _opt(STR, required=True, help="estimates JSON"),
    },
}


# --- configuration ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError("args", message)


def read_config_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment; blank lines are ignored."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigurationError("config", f"cannot read {path}: {exc.strerror}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip() if not raw.lstrip().startswith("#") else ""
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError("config", f"line {n}: expected key=value, got {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _convert(key, type_, value):
    if value is None or type_ in (STR, SPEC):
        return value
    spec = {key: value}
    if type_ == INT:
        return as_int(spec, key)
    return as_float(spec, key)


def _merge_file_values(command, file_values):
    options = COMMANDS[command]
    plain, sections = {}, {}
    for key, value in file_values.items():
        if key == "command":
            continue
        head, dot, sub = key.partition(".")
        if dot:
            if options.get(head, {}).get("type") != SPEC:
                raise ConfigurationError(key, f"unknown key for '{command}'")
            sections.setdefault(head, {})[sub] = value
        elif key in options:
            plain[key] = value
        else:
            raise ConfigurationError(key, f"unknown key for '{command}'")
    for head, params in sections.items():
        base = parse_spec(plain[head], field=head) if head in plain else {}
        base.update(params)
        if "kind" not in base:
            raise ConfigurationError(f"{head}.kind", "required")
        plain[head] = format_spec(base)
    return plain


def build_parser(command):
    parser = _Parser(prog=f"mcmckit {command}", description=f"mcmckit {command}")
    parser.add_argument("--config", help="key=value config file (flags override it)")
    for key, opt in COMMANDS[command].items():
        default = opt["default"]
        extra = f" [default: {default}]" if default is not None else ""
        parser.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=opt["help"] + extra)
    return parser


def parse_config(argv):
    """Resolve ``argv`` (plus any ``--config`` file) into a flat config dict."""
    argv = list(argv)
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    file_values = read_config_file(known.config) if known.config else {}
    if rest and rest[0] in COMMANDS:
        command = rest.pop(0)
    elif "command" in file_values:
        command = file_values["command"]
        if command not in COMMANDS:
            raise ConfigurationError("command", f"unknown command {command!r}; expected one of {sorted(COMMANDS)}")
    else:
        raise ConfigurationError("command", f"expected one of {sorted(COMMANDS)}")
    flags = {k: v for k, v in vars(build_parser(command).parse_args(rest)).items()
             if v is not None and k != "config"}
    merged = _merge_file_values(command, file_values)
    merged.update(flags)
    resolved = {"command": command}
    for key, opt in COMMANDS[command].items():
        value = _convert(key, opt["type"], merged.get(key, opt["default"]))
        if value is None and opt["required"]:
            raise ConfigurationError(key, "required")
        if opt["type"] == SPEC and value is not None:
            value = format_spec(parse_spec(value, field=key))
        resolved[key] = value
    if resolved["seed"] < 0:
        raise ConfigurationError("seed", f"must be an unsigned integer, got {resolved['seed']}")
    return resolved


# --- commands -----------------------------------------------------------------


def _vector(text, key, dim=None):
    v = as_array({key: text}, key)
    if dim is not None and v.size != dim:
        raise ConfigurationError(key, f"expected {dim} values, got {v.size}")
    return v


def _check_min(cfg, key, minimum):
    if cfg[key] < minimum:
        raise ConfigurationError(key, f"must be >= {minimum}, got {cfg[key]}")


def cmd_sample(cfg):
    target = make_target(cfg["target"])
    sampler = SamplerConfig.from_spec(cfg["sampler"])
    _check_min(cfg, "steps", 1)
    _check_min(cfg, "chains", 1)
    x0 = np.zeros(target.dim) if cfg["x0"] is None else _vector(cfg["x0"], "x0", target.dim)

    def one(i):
        return run_chain(sampler, target, x0, cfg["steps"], cfg["burn_in"], cfg["thin"],
                         cfg["seed"] + i)

    if cfg["chains"] == 1:
        chains = [one(0)]
    else:
        with ThreadPoolExecutor(max_workers=min(cfg["chains"], 8)) as pool:
            chains = list(pool.map(one, range(cfg["chains"])))

    header = ["step"] + [f"x{k}" for k in range(target.dim)] + ["accepted"]
    if len(chains) == 1:
        c = chains[0]
        rows = list(io.sample_rows(c.samples, c.accept_flags, c.kept_steps))
    else:
        header = ["chain"] + header
        rows = [(i, *row) for i, c in enumerate(chains)
                for row in io.sample_rows(c.samples, c.accept_flags, c.kept_steps)]
    io.write_csv(cfg["out"], cfg, header, rows)
    if cfg["report"]:
        stacked = np.stack([c.samples for c in chains], axis=1) if len(chains) > 1 else chains[0].samples
        flags = np.concatenate([c.accept_flags for c in chains])
        report = diagnose(stacked)
        report.acceptance_rate = float(flags.mean())
        io.atomic_write(cfg["report"], report.to_json(config=cfg) + "\n")
    return f"wrote {len(rows)} samples to {cfg['out']}"


def cmd_diagnose(cfg):
    _, header, data = io.read_csv(cfg["input"])
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not xcols:
        raise ConfigurationError("input", "no x0, x1, ... columns found")
    acc_col = header.index("accepted") if "accepted" in header else None
    if header[0] == "chain":
        ids = data[:, 0].astype(int)
        groups = [data[ids == c][cfg["burn_in"]:] for c in np.unique(ids)]
        n = min(len(g) for g in groups)
        groups = [g[:n] for g in groups]
        samples = np.stack([g[:, xcols] for g in groups], axis=1)
        flags = np.concatenate([g[:, acc_col] for g in groups]) if acc_col is not None else None
    else:
        rows = data[cfg["burn_in"]:]
        samples = rows[:, xcols]
        flags = rows[:, acc_col] if acc_col is not None else None
    target = make_target(cfg["target"]) if cfg["target"] else None
    bounds = None
    if cfg["bounds"]:
        bounds = np.asarray(as_array({"bounds": cfg["bounds"]}, "bounds", ndim=2))
        if bounds.shape != (len(xcols), 2):
            raise ConfigurationError("bounds", f"expected {len(xcols)} 'lo/hi' pairs")
    report = diagnose(samples, target, bounds, cfg["bins"])
    if flags is not None:
        report.acceptance_rate = float(np.mean(flags))
    io.atomic_write(cfg["out"], report.to_json(config=cfg) + "\n")
    return f"wrote diagnostics to {cfg['out']} (min ESS {report.min_ess:.1f})"


def _constraint(text):
    spec = parse_spec(text, field="constraint")
    kind, p = spec.get("kind"), "constraint."
    allowed = {"disk": {"radius", "center"}, "annulus": {"inner", "outer"}}
    if kind not in allowed:
        raise ConfigurationError("constraint.kind", f"expected disk or annulus, got {kind!r}")
    unknown = set(spec) - allowed[kind] - {"kind"}
    if unknown:
        raise ConfigurationError(f"constraint.{sorted(unknown)[0]}", f"unknown parameter for {kind}")
    if kind == "disk":
        center = as_array(spec, "center", "0/0", p) if "center" in spec else None
        return sde.RegionConstraint.disk(as_float(spec, "radius", 1.0, p), center)
    return sde.RegionConstraint.annulus(as_float(spec, "inner", 1.0, p), as_float(spec, "outer", 2.0, p))


def cmd_sde(cfg):
    _check_min(cfg, "steps", 1)
    if cfg["process"] == "brownian":
        _check_min(cfg, "dim", 1)
        dim = cfg["dim"] if cfg["x0"] is None else None
        x0 = np.zeros(dim) if cfg["x0"] is None else _vector(cfg["x0"], "x0")
        constraint = _constraint(cfg["constraint"]) if cfg["constraint"] else None
        path = sde.simulate_brownian(x0, cfg["steps"], cfg["step_sigma"], constraint, cfg["seed"])
    elif cfg["process"] == "langevin":
        if not cfg["target"]:
            raise ConfigurationError("target", "required for the langevin process")
        target = make_target(cfg["target"])
        x0 = np.zeros(target.dim) if cfg["x0"] is None else _vector(cfg["x0"], "x0", target.dim)
        path = sde.simulate_langevin_sde(target, x0, cfg["steps"], cfg["dt"], cfg["seed"])
    else:
        raise ConfigurationError("process", f"expected brownian or langevin, got {cfg['process']!r}")
    dim = path.points.shape[-1]
    rows = ((t, *x) for t, x in zip(path.times, path.points))
    io.write_csv(cfg["out"], cfg, ["t"] + [f"x{k}" for k in range(dim)], rows)
    return f"wrote {len(path)} path points to {cfg['out']}"


def cmd_pssmlt(cfg):
    spec = parse_spec(cfg["estimator"], field="estimator")
    kind = spec.pop("kind")
    params = {}
    for key, value in spec.items():
        try:
            params[key] = float(value)
        except ValueError:
            raise ConfigurationError(f"estimator.{key}", f"expected a number, got {value!r}") from None
    est = pssmlt.make_estimator(kind, **params)
    rng = np.random.default_rng(cfg["seed"])
    raw = pssmlt.pssmlt_render(est, cfg["width"], cfg["height"], cfg["n_mutations"],
                               cfg["large_step_prob"], cfg["sigma"], rng, cfg["splat"])
    img = pssmlt.normalize_image(raw, est, cfg["n_mc"], rng)
    io.write_pgm(cfg["out"], cfg, img.pixels)
    if cfg["raw"]:
        io.write_pixels_csv(cfg["raw"], cfg, img.pixels)
    return f"wrote {cfg['width']}x{cfg['height']} image to {cfg['out']}"


def _read_column_data(path, key="data"):
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(key, f"cannot read {path}: {exc}") from None
    if data.size == 0:
        raise ConfigurationError(key, f"{path} holds no observations")
    return data


def cmd_sgld(cfg):
    spec = parse_spec(cfg["model"], field="model")
    if spec.get("kind") != "conjugate":
        raise ConfigurationError("model.kind", f"expected conjugate, got {spec.get('kind')!r}")
    unknown = set(spec) - {"kind", "n", "true_mean", "prior_var", "noise_var"}
    if unknown:
        raise ConfigurationError(f"model.{sorted(unknown)[0]}", "unknown parameter for conjugate")
    p = "model."
    noise_var = as_float(spec, "noise_var", 1.0, p)
    rng = np.random.default_rng(cfg["seed"])
    if cfg["data"]:
        data = _read_column_data(cfg["data"])[:, 0]
    else:
        n = as_int(spec, "n", 20, p)
        if n < 1:
            raise ConfigurationError("model.n", f"must be >= 1, got {n}")
        data = as_float(spec, "true_mean", 1.0, p) + np.sqrt(noise_var) * rng.standard_normal(n)
    model = optim.ConjugateGaussianModel(data, as_float(spec, "prior_var", 1.0, p), noise_var)
    trace = optim.sgld_sample_posterior(model.gradient(), [cfg["theta0"]], cfg["eta"],
                                        cfg["steps"], cfg["burn_in"], rng)
    thetas = trace.thetas[:, 0]
    start = cfg["burn_in"] + 1
    io.write_csv(cfg["out"], cfg, ["iter", "theta0"],
                 ((start + i, t) for i, t in enumerate(thetas)))
    if cfg["report"]:
        map_theta = optim.map_estimate(model.gradient(), [cfg["theta0"]], 0.5 * model.posterior_var, 200)
        io.write_json(cfg["report"], cfg, {
            "n_data": int(model.n),
            "posterior_mean": model.posterior_mean,
            "posterior_var": model.posterior_var,
            "map": float(map_theta[0]),
            "sample_mean": float(thetas.mean()),
            "sample_var": float(thetas.var(ddof=1)) if thetas.size > 1 else 0.0,
        })
    return f"wrote {thetas.size} iterates to {cfg['out']}"


def _inner_config(cfg, k=0, init="from_data", persistent=False):
    try:
        return ebm.CdConfig.from_spec(cfg["inner"], k=k, init=init, persistent=persistent)
    except ConfigurationError as exc:
        if exc.field.startswith("inner"):
            raise
        raise ConfigurationError(exc.field if exc.field in cfg else "inner." + exc.field, exc.message) from None


def cmd_ebm_train(cfg):
    rng = np.random.default_rng(cfg["seed"])
    if cfg["data"]:
        data = _read_column_data(cfg["data"])
    else:
        spec = parse_spec(cfg["synthetic"], field="synthetic")
        if spec.get("kind") != "gaussian":
            raise ConfigurationError("synthetic.kind", f"expected gaussian, got {spec.get('kind')!r}")
        unknown = set(spec) - {"kind", "mean", "sd", "n"}
        if unknown:
            raise ConfigurationError(f"synthetic.{sorted(unknown)[0]}", "unknown parameter for gaussian")
        p = "synthetic."
        mean = as_array(spec, "mean", "0", p)
        n = as_int(spec, "n", 1000, p)
        if n < 2:
            raise ConfigurationError("synthetic.n", f"must be >= 2, got {n}")
        data = mean + as_float(spec, "sd", 1.0, p) * rng.standard_normal((n, mean.size))
    dim = data.shape[1]
    if cfg["family"] == "gaussian_energy":
        model = ebm.gaussian_energy(np.zeros(dim), 1.0)
    elif cfg["family"] == "quadratic_form":
        model = ebm.quadratic_energy(-0.5 * np.eye(dim), np.zeros(dim))
    else:
        raise ConfigurationError("family", f"expected gaussian_energy or quadratic_form, got {cfg['family']!r}")
    cd = _inner_config(cfg, cfg["k"], cfg["init"], bool(cfg["persistent"]))
    _check_min(cfg, "batch_size", 1)
    trained = ebm.train_cd(model, data, cd, cfg["eta"], cfg["steps"], rng, cfg["batch_size"])
    payload = trained.to_dict()
    if trained.family == "gaussian_energy":
        payload["mean"] = [float(v) for v in trained.theta[:-1]]
        payload["sigma"] = float(np.exp(trained.theta[-1]))
    payload["data_mean"] = [float(v) for v in data.mean(axis=0)]
    io.write_json(cfg["out"], cfg, payload)
    return f"wrote {trained.family} model to {cfg['out']}"


def cmd_ebm_sample(cfg):
    payload = io.read_json(cfg["model"]) if cfg["model"] else None
    try:
        model = ebm.model_from_dict(payload)
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ConfigurationError):
            raise ConfigurationError("model." + exc.field, exc.message) from None
        raise ConfigurationError("model", f"{cfg['model']} is not a saved model") from None
    _check_min(cfg, "n", 1)
    inner = _inner_config(cfg)
    rng = np.random.default_rng(cfg["seed"])
    x0 = rng.standard_normal((cfg["n"], model.dim))
    if inner.inner == "ula":
        x = ebm.ebm_ula_sample(model, x0, inner.step, cfg["steps"], rng)
    else:
        x = ebm.ebm_mh_sample(model, x0, inner.step, cfg["steps"], rng)
    io.write_csv(cfg["out"], cfg, ["sample"] + [f"x{k}" for k in range(model.dim)],
                 ((i, *row) for i, row in enumerate(x)))
    return f"wrote {len(x)} samples to {cfg['out']}"


def _bump(spec, key, default):
    v = as_array(spec, key, default, "integrand.")
    if v.size != 3:
        raise ConfigurationError(f"integrand.{key}", "expected center/sd/mass")
    return tuple(float(e) for e in v)


def cmd_mis(cfg):
    spec = parse_spec(cfg["integrand"], field="integrand")
    if spec.get("kind") != "two-bump":
        raise ConfigurationError("integrand.kind", f"expected two-bump, got {spec.get('kind')!r}")
    unknown = set(spec) - {"kind", "narrow", "wide"}
    if unknown:
        raise ConfigurationError(f"integrand.{sorted(unknown)[0]}", "unknown parameter for two-bump")
    try:
        f, integral, strategies = mcint.two_bump(_bump(spec, "narrow", "1/0.1/0.3"),
                                                 _bump(spec, "wide", "0/2/0.7"))
    except ConfigurationError as exc:
        raise ConfigurationError("integrand." + exc.field, exc.message) from None
    _check_min(cfg, "n", 1)
    rng = np.random.default_rng(cfg["seed"])
    mis = mcint.mis_estimate(f, strategies, cfg["n"], rng)
    singles = []
    for s in strategies:
        e = mcint.mc_estimate(f, s, cfg["n"], rng)
        singles.append({"strategy": s.name, "value": e.value, "std_error": e.std_error, "n": e.n})
    io.write_json(cfg["out"], cfg, {
        "integral": integral,
        "mis": {"value": mis.value, "std_error": mis.std_error, "n": mis.n},
        "single_strategy": singles,
    })
    return f"wrote MIS estimate {mis.value:.6g} +/- {mis.std_error:.2g} to {cfg['out']}"


HANDLERS = {
    "sample": cmd_sample, "diagnose": cmd_diagnose, "sde": cmd_sde, "pssmlt": cmd_pssmlt,
    "sgld": cmd_sgld, "ebm-train": cmd_ebm_train, "ebm-sample": cmd_ebm_sample, "mis": cmd_mis,
}


def run(cfg):
    """Execute a resolved config; returns the summary line."""
    summary = HANDLERS[cfg["command"]](cfg)
    return f"{cfg['command']}: {summary} (seed={cfg['seed']})"


def _fail(kind, message, field=None):
    payload = {"error": kind, "message": message}
    if field is not None:
        payload["field"] = field
    print(json.dumps(payload), file=sys.stderr)


USAGE = "usage: mcmckit [--config FILE] {" + ",".join(COMMANDS) + "} [options]\n"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        sys.stdout.write(USAGE)
        return EXIT_OK if argv else EXIT_CONFIG
    try:
        cfg = parse_config(argv)
        print(run(cfg))
    except ConfigurationError as exc:
        _fail("config", exc.message, exc.field)
        return EXIT_CONFIG
    except DivergenceError as exc:
        _fail("divergence", str(exc))
        return EXIT_DIVERGENCE
    except (McmcError, OSError, ValueError) as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
