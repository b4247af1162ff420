"""Command line entry point: enumerate | solve | sweep | exhaustive | simulate.

Settings come from the built-in defaults, then an optional ``--config`` file
of ``key=value`` lines, then command line flags (flags win).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import analysis
from .dynamics import ModelConfig
from .graphs import HARD_CAP, catalog
from .policy import LocalPolicy, always_root, lcr, policy_count, read_policy, write_policy
from .solver import PolicyCycleError, TIE_RULES, best_response_iteration
from .states import CONVENTIONS, DEFAULT_CONVENTION, count_states, state_space

log = logging.getLogger("nakamoto_mfg")

COMMANDS = ("enumerate", "solve", "sweep", "exhaustive", "simulate")
BUILTIN_POLICIES = {"lcr": lcr, "root": always_root}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "solve"
    n_agents: int = 1000
    max_blocks: int = 5
    alpha: float = 0.001
    delta: float = 0.01
    gamma: float = 0.99
    epsilon: float = 0.01
    reward: float = 1.0
    convention: str = DEFAULT_CONVENTION
    initial_policy: str = "lcr"
    rho: list = field(default_factory=lambda: list(analysis.RHO_GRID))
    deltas: list = field(default_factory=list)   # empty: analysis.default_deltas(alpha)
    mode: str = "best-response"                  # RA best response drives the mean field
    tie_rule: str = "incumbent"
    tie_tol: float = 1e-9
    block_steps: int = 100_000
    delivery: str = "shared"
    seed: int = 0
    threads: int = 0                             # 0: one per CPU
    basins: bool = True
    out: str = "out"

    @property
    def model(self) -> ModelConfig:
        return ModelConfig(self.n_agents, self.max_blocks, self.alpha, self.delta, self.gamma,
                           self.epsilon, self.reward, self.convention)

    @property
    def solve_ra(self) -> bool:
        return self.mode == "best-response"


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s: str) -> list:
    return [float(x) for x in s.split(",") if x.strip()]


_CASTS = {
    "n_agents": int, "max_blocks": int, "alpha": float, "delta": float, "gamma": float,
    "epsilon": float, "reward": float, "convention": str, "initial_policy": str,
    "rho": _parse_floats, "deltas": _parse_floats, "mode": str, "tie_rule": str,
    "tie_tol": float, "block_steps": int, "delivery": str, "seed": int, "threads": int,
    "basins": _parse_bool, "out": str, "command": str,
}
_CHOICES = {"convention": tuple(CONVENTIONS), "mode": ("best-response", "symmetric"),
            "tie_rule": TIE_RULES, "delivery": ("shared", "independent"), "command": COMMANDS}


def read_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; keys may use dashes or underscores."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``overrides``; everything validated."""
    raw = read_config_file(path) if path else {}
    raw.update({k.replace("-", "_"): v for k, v in (overrides or {}).items() if v is not None})
    cfg = ExperimentConfig()
    values = {}
    for key, value in raw.items():
        if key not in _CASTS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = _CASTS[key](value) if isinstance(value, str) else value
        except ValueError as e:
            raise ConfigError(f"bad value for {key!r}: {e}") from None
        if key in _CHOICES and values[key] not in _CHOICES[key]:
            raise ConfigError(f"bad value for {key!r}: {values[key]!r} not in {_CHOICES[key]}")
    cfg = replace(cfg, **values)
    for key in ("tie_tol",):
        if getattr(cfg, key) < 0:
            raise ConfigError(f"bad value for {key!r}: must be nonnegative")
    if cfg.block_steps < 2:
        raise ConfigError("bad value for 'block_steps': need at least 2")
    if any(not 0.0 < r < 1.0 for r in cfg.rho):
        raise ConfigError("bad value for 'rho': each entry must lie in (0, 1)")
    try:
        cfg.model
    except ValueError as e:
        key = next((f.name for f in fields(ModelConfig) if f.name in str(e)), "model")
        raise ConfigError(f"bad value for {key!r}: {e}") from None
    return cfg


def load_policy(spec: str, max_blocks: int) -> LocalPolicy:
    if spec in BUILTIN_POLICIES:
        return BUILTIN_POLICIES[spec](max_blocks)
    if os.path.exists(spec):
        pol = read_policy(spec)
    else:
        try:
            pol = LocalPolicy.from_code(spec, max_blocks)
        except ValueError as e:
            raise ConfigError(f"bad value for 'initial_policy': {spec!r} is neither a built-in "
                              f"({', '.join(BUILTIN_POLICIES)}), a file, nor a policy code: {e}") from None
    if pol.max_blocks != max_blocks:
        raise ConfigError(f"policy covers graphs up to {pol.max_blocks} blocks, "
                          f"but max_blocks={max_blocks}")
    return pol


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s (%d rows)", path, len(rows))


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if x != x else repr(x)
    return str(x)


# --------------------------------------------------------------------------
# subcommands


def cmd_enumerate(cfg: ExperimentConfig, out: Path) -> int:
    M = cfg.max_blocks
    cat = catalog(HARD_CAP)
    classes = [g for g in cat.classes if g.size <= M]
    space = state_space(M, cfg.convention)
    (out / "classes.tsv").write_text(
        "".join(line + "\n" for line in cat.dump().splitlines() if int(line.split("\t")[1]) <= M),
        encoding="utf-8")
    (out / "states.tsv").write_text(space.dump(), encoding="utf-8")
    per_size = count_states(M, cfg.convention)
    rows = [(n, sum(1 for g in classes if g.size == n), per_size.get(n, 0)) for n in range(1, M + 1)]
    _write_csv(out / "counts.csv", ("size", "classes", "states"), rows)
    log.info("max_blocks=%d classes=%d states=%d policies=%d convention=%s",
             M, len(classes), len(space), policy_count(M), cfg.convention)
    return 0


def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    model = cfg.model
    start = load_policy(cfg.initial_policy, cfg.max_blocks)
    log.info("best response iteration from %s (%s)", start.code(), cfg.initial_policy)
    try:
        res = best_response_iteration(start, model, solve_ra=cfg.solve_ra, tie_rule=cfg.tie_rule)
    except PolicyCycleError as e:
        _write_csv(out / "trace.csv", ("outer", "policy"),
                   [(i, p.code()) for i, p in enumerate(e.trace)])
        log.error("%s", e)
        return 3
    write_policy(res.policy, out / "policy.txt")
    _write_csv(out / "trace.csv", ("outer", "policy"),
               [(i, p.code()) for i, p in enumerate(res.trace)])
    diag_rows = []
    for outer, residuals in enumerate(res.residuals):
        for it, r in enumerate(residuals, 1):
            diag_rows.append((outer, it, _fmt(float(r))))
    _write_csv(out / "diagnostics.csv", ("outer", "iteration", "residual"), diag_rows)
    eff = analysis.policy_efficiency(res.policy, model, solve_ra=cfg.solve_ra)[0]
    log.info("converged after %d outer iterations to %s; lcr=%s efficiency=%.6f",
             res.outer_iterations, res.policy.code(), res.policy == lcr(cfg.max_blocks), eff)
    return 0


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    deltas = cfg.deltas or analysis.default_deltas(cfg.alpha)
    policy = load_policy(cfg.initial_policy, cfg.max_blocks)
    rows = analysis.delay_sweep(cfg.model, deltas, cfg.rho, policy, cfg.solve_ra)
    _write_csv(out / "sweep.csv", ("delta", "rho", "delay_steps", "theoretical", "measured", "rel_error"),
               [(_fmt(r.delta), _fmt(r.rho), r.delay_steps, _fmt(r.theoretical), _fmt(r.measured),
                 _fmt(r.rel_error)) for r in rows])
    for r in rows:
        if r.error:
            log.warning("delta=%g failed: %s", r.delta, r.error)
    return 1 if any(r.error for r in rows) else 0


def cmd_exhaustive(cfg: ExperimentConfig, out: Path) -> int:
    model = cfg.model
    threads = cfg.threads or None
    log.info("exhaustive search over %d policies", policy_count(cfg.max_blocks))
    res = analysis.exhaustive_search(model, tie_tol=cfg.tie_tol, solve_ra=False, threads=threads)
    if cfg.basins:
        basins = analysis.basin_frequencies(model, threads=threads, solve_ra=cfg.solve_ra,
                                            tie_rule=cfg.tie_rule)
        analysis.attach_basins(res, basins)
        log.info("basins: %d distinct end points, %d starts without convergence",
                 len(basins.counts), len(basins.failures))
    _write_csv(out / "policies.csv", ("policy", "is_equilibrium", "efficiency", "basin_count", "gap"),
               [(r.policy, "" if r.is_equilibrium is None else int(r.is_equilibrium),
                 _fmt(r.efficiency), r.basin_count, _fmt(r.gap)) for r in res.reports])
    best = res.best
    log.info("equilibria=%d best=%s efficiency=%.6f ties_at_best=%d lcr_uniquely_best=%s",
             len(res.equilibria), best.policy if best else None,
             best.efficiency if best else float("nan"), len(res.best_efficiency_ties),
             res.lcr_uniquely_best)
    failed = [r for r in res.reports if r.error]
    for r in failed:
        log.warning("policy %s failed: %s", r.policy, r.error)
    return 0


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    model = cfg.model
    policy = load_policy(cfg.initial_policy, cfg.max_blocks)
    rep = analysis.monte_carlo_oracle(model, policy, cfg.block_steps, seed=cfg.seed,
                                      delivery=cfg.delivery)
    _write_csv(out / "oracle.csv", ("metric", "estimate", "std_error"),
               [(m, _fmt(e), _fmt(s)) for m, e, s in rep.rows()])
    try:
        cmp = analysis.compare_oracle(model, policy, rep)
        log.info("efficiency simulated=%.6f chain=%.6f z=%.2f worst_cell_z=%.2f within_4se=%s",
                 cmp.efficiency_sim, cmp.efficiency_chain, cmp.efficiency_z, cmp.worst_cell_z,
                 cmp.passed)
    except Exception as e:  # the simulation itself succeeded
        log.warning("chain comparison unavailable: %s: %s", type(e).__name__, e)
    return 0


HANDLERS = {"enumerate": cmd_enumerate, "solve": cmd_solve, "sweep": cmd_sweep,
            "exhaustive": cmd_exhaustive, "simulate": cmd_simulate}


def run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        log.error("cannot create output directory %s: %s", out, e.strerror)
        return 2
    log.info("command=%s config=%s", cfg.command,
             " ".join(f"{k}={v}" for k, v in asdict(cfg).items() if k != "command"))
    try:
        return HANDLERS[cfg.command](cfg, out)
    except ConfigError as e:
        log.error("%s", e)
        return 2
    except Exception as e:
        log.error("%s failed: %s: %s", cfg.command, type(e).__name__, e)
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    add = common.add_argument
    add("--n-agents", type=str)
    add("--max-blocks", type=str)
    add("--alpha", type=str)
    add("--delta", type=str, help="per-step delivery probability")
    add("--gamma", type=str)
    add("--epsilon", type=str)
    add("--reward", type=str)
    add("--convention", type=str, help=f"one of {', '.join(CONVENTIONS)}")
    add("--initial-policy", type=str, help="lcr, root, a policy file, or a dotted code")
    add("--rho", type=str, help="comma separated quantiles for the delay bound")
    add("--deltas", type=str, help="comma separated delta grid for sweep")
    add("--mode", type=str, help="best-response or symmetric mean-field iteration")
    add("--tie-rule", type=str)
    add("--tie-tol", type=str)
    add("--block-steps", type=str)
    add("--delivery", type=str, help="shared or independent (simulate)")
    add("--seed", type=str)
    add("--threads", type=str)
    add("--basins", type=str, help="exhaustive: also run best response from every policy")
    add("--out", type=str, help="output directory")
    add("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="nakamoto-mfg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as e:
        log.error("%s", e)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
