"""Command line interface.

Subcommands:

- run: execute experiment blocks from a config file, write CSV + manifest
- example: print a commented example config
- calibrate: sampling-count calibration, or a power audit of the
  tabulated effect sizes (--table-audit)
- list-methods: show correction method ids and their settings
- list-experiments: show experiment kinds

Exit codes: 0 on success, 2 for unusable configuration or arguments,
3 when a run aborted on the candidate-draw budget (partial CSV is still
written).
"""
from __future__ import annotations

import argparse
import sys

import yaml

from . import __version__, engine, kernels, reporting
from .distributions import (
    LOGNORMAL,
    NORMAL,
    PopulationSpec,
    lognormal,
    normal,
)
from .engine import (
    CALIBRATE,
    EXPERIMENTS,
    PHACK,
    ConfigError,
    ExperimentConfig,
    IncompleteRunError,
    InjectionSpec,
    run_all,
    verify_power,
)
from .methods import ALL_METHOD_IDS, MethodSpec, default_methods
from .reporting import ResultRow
from .stat_tests import MANN_WHITNEY, PERMUTATION, TTEST, TestSpec

_DEFAULT_TESTS = (TTEST, MANN_WHITNEY, PERMUTATION)

_METHOD_ALIASES = {
    "threshold": "mad_threshold",
    "limit": "winsorize_limit",
    "alpha": "grubbs_alpha",
}
_TEST_ALIASES = {"exact_max_n": "exact_mw_max_n", "permutations": "n_permutations"}


def _parse_method(entry) -> MethodSpec:
    if isinstance(entry, str):
        try:
            return MethodSpec(id=entry)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if isinstance(entry, dict):
        entry = dict(entry)
        if "id" not in entry:
            raise ConfigError(f"method entry needs an id: {entry!r}")
        kwargs = {}
        for key, value in entry.items():
            if key == "id":
                continue
            kwargs[_METHOD_ALIASES.get(key, key)] = value
        try:
            return MethodSpec(id=entry["id"], **kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad method entry {entry!r}: {exc}") from None
    raise ConfigError(f"method entries are strings or mappings, got {entry!r}")


def _parse_test(entry) -> TestSpec:
    if isinstance(entry, str):
        try:
            return TestSpec(id=entry)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if isinstance(entry, dict):
        entry = dict(entry)
        if "id" not in entry:
            raise ConfigError(f"test entry needs an id: {entry!r}")
        kwargs = {}
        for key, value in entry.items():
            if key == "id":
                continue
            kwargs[_TEST_ALIASES.get(key, key)] = value
        try:
            return TestSpec(id=entry["id"], **kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad test entry {entry!r}: {exc}") from None
    raise ConfigError(f"test entries are strings or mappings, got {entry!r}")


def _parse_distribution(entry) -> PopulationSpec:
    if entry is None:
        raise ConfigError("each experiment block needs a distribution")
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict):
        raise ConfigError(f"distribution must be a mapping, got {entry!r}")
    kind = entry.get("kind")
    mu = float(entry.get("mu", 0.0))
    sigma = float(entry.get("sigma", 1.0))
    if kind == NORMAL:
        return normal(mu, sigma)
    if kind == LOGNORMAL:
        return lognormal(mu, sigma)
    raise ConfigError(
        f"distribution kind must be {NORMAL!r} or {LOGNORMAL!r}, got {kind!r}"
    )


def _parse_injection(entry) -> "InjectionSpec | None":
    if entry is None:
        return None
    if not isinstance(entry, dict):
        raise ConfigError(f"injection must be a mapping, got {entry!r}")
    kwargs = {}
    for key in ("count", "lo_sigma", "hi_sigma"):
        if key in entry:
            kwargs[key] = entry[key]
    unknown = set(entry) - {"count", "lo_sigma", "hi_sigma"}
    if unknown:
        raise ConfigError(f"unknown injection keys: {sorted(unknown)}")
    return InjectionSpec(**kwargs)


_BLOCK_KEYS = {
    "name",
    "experiment",
    "distribution",
    "ns",
    "methods",
    "tests",
    "reps",
    "max_draws",
    "power_target",
    "mu2",
    "injection",
    "calibration_counts",
    "calibration_repeats",
}
_TOP_KEYS = {"master_seed", "reps", "max_draws", "experiments"}


def _default_tests_for(experiment: str) -> "tuple[TestSpec, ...]":
    if experiment in (PHACK, CALIBRATE):
        return (TestSpec(id=TTEST),)
    if experiment in engine._TEST_BASED:
        return tuple(TestSpec(id=t) for t in _DEFAULT_TESTS)
    return ()


def _block_to_config(block: dict, top: dict, overrides: dict) -> ExperimentConfig:
    unknown = set(block) - _BLOCK_KEYS
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    experiment = block.get("experiment")
    if experiment is None:
        raise ConfigError("each experiment block needs an 'experiment' kind")
    if "methods" in block:
        raw = block["methods"] or []
        methods = tuple(_parse_method(m) for m in raw)
    else:
        methods = default_methods()
    if "tests" in block:
        raw = block["tests"] or []
        tests = tuple(_parse_test(t) for t in raw)
    else:
        tests = _default_tests_for(experiment)
    ns = block.get("ns")
    if ns is None:
        raise ConfigError("each experiment block needs 'ns'")
    if isinstance(ns, int):
        ns = [ns]
    reps = overrides.get("reps", block.get("reps", top.get("reps", 10000)))
    seed = overrides.get("master_seed", top.get("master_seed", 0))
    max_draws = overrides.get(
        "max_draws", block.get("max_draws", top.get("max_draws", 10**9))
    )
    kwargs = {}
    if "calibration_counts" in block:
        kwargs["calibration_counts"] = tuple(block["calibration_counts"])
    if "calibration_repeats" in block:
        kwargs["calibration_repeats"] = int(block["calibration_repeats"])
    try:
        return ExperimentConfig(
            experiment=experiment,
            distribution=_parse_distribution(block.get("distribution")),
            ns=tuple(int(n) for n in ns),
            methods=methods,
            tests=tests,
            reps=int(reps),
            power_target=(
                float(block["power_target"])
                if block.get("power_target") is not None
                else None
            ),
            mu2=float(block["mu2"]) if block.get("mu2") is not None else None,
            injection=_parse_injection(block.get("injection")),
            master_seed=int(seed),
            max_draws=int(max_draws),
            name=block.get("name"),
            **kwargs,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path: str, overrides: "dict | None" = None):
    """Parse a config file (or a manifest from a previous run) to blocks."""
    overrides = overrides or {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if isinstance(data, dict) and "config" in data and "tool" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    if "experiments" in data:
        top = {k: v for k, v in data.items() if k != "experiments"}
        unknown = set(top) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        blocks = data["experiments"]
        if not isinstance(blocks, list) or not blocks:
            raise ConfigError("'experiments' must be a non-empty list")
    else:
        # single-block shorthand: the block keys sit at the top level
        top = {k: v for k, v in data.items() if k in _TOP_KEYS}
        blocks = [{k: v for k, v in data.items() if k in _BLOCK_KEYS}]
        unknown = set(data) - _TOP_KEYS - _BLOCK_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return [_block_to_config(b, top, overrides) for b in blocks]


def _config_snapshot(configs) -> dict:
    """Loader-schema dict for the manifest, so a manifest re-runs as-is."""
    blocks = []
    for cfg in configs:
        block = {
            "experiment": cfg.experiment,
            "distribution": {
                "kind": cfg.distribution.kind,
                "mu": cfg.distribution.mu,
                "sigma": cfg.distribution.sigma,
            },
            "ns": list(cfg.ns),
            "methods": [
                {
                    "id": m.id,
                    "mad_threshold": m.mad_threshold,
                    "winsorize_limit": m.winsorize_limit,
                    "grubbs_alpha": m.grubbs_alpha,
                    "std_divisor": m.std_divisor,
                }
                for m in cfg.methods
            ],
            "tests": [
                {
                    "id": t.id,
                    "n_permutations": t.n_permutations,
                    "exact_mw_max_n": t.exact_mw_max_n,
                    "exhaustive": t.exhaustive,
                }
                for t in cfg.tests
            ],
            "reps": cfg.reps,
            "max_draws": cfg.max_draws,
        }
        if cfg.name:
            block["name"] = cfg.name
        if cfg.power_target is not None:
            block["power_target"] = cfg.power_target
        if cfg.mu2 is not None:
            block["mu2"] = cfg.mu2
        if cfg.injection is not None:
            block["injection"] = {
                "count": cfg.injection.count,
                "lo_sigma": cfg.injection.lo_sigma,
                "hi_sigma": cfg.injection.hi_sigma,
            }
        if cfg.experiment == CALIBRATE:
            block["calibration_counts"] = list(cfg.calibration_counts)
            block["calibration_repeats"] = cfg.calibration_repeats
        blocks.append(block)
    seed = configs[0].master_seed if configs else 0
    return {"master_seed": seed, "experiments": blocks}


def _manifest(configs, jobs, rows, output, incomplete, diagnostics) -> dict:
    return {
        "tool": "outliersim",
        "version": __version__,
        "backend": kernels.backend_name,
        "jobs": jobs,
        "output": output,
        "row_count": len(rows),
        "incomplete": incomplete,
        "config": _config_snapshot(configs),
        "diagnostics": diagnostics,
    }


EXPERIMENT_SUMMARIES = {
    "RsoProbability": "chance a fresh sample contains at least one flagged point",
    "ParamEstimation": "mean/sd estimation error before and after correction on samples kept for containing outliers",
    "Type1": "false positive rate of tests on selected null pairs, before and after correction",
    "Type2": "false negative rate on selected shifted pairs, before and after correction",
    "EffectError": "percent error of the estimated mean difference on selected pairs",
    "PHack": "false positive rate when the analyst may pick any of several corrected analyses",
    "ContamEstimation": "estimation error with planted outliers, swept over the injected count",
    "ContamType1": "test false positive rate with planted outliers in one sample",
    "ContamType2": "test false negative rate with planted outliers in one sample",
    "CalibrateSampling": "spread of the measured type-1 rate across repeat runs, by sampling count",
}


EXAMPLE_CONFIG = """\
# outliersim run configuration
#
# Top-level keys apply to every experiment block unless the block
# overrides them. Values shown for methods/tests are the defaults;
# omitting 'methods' or 'tests' entirely selects the full default set,
# while an explicit empty list for 'methods' runs only the uncorrected
# baseline phase.

master_seed: 1
reps: 10000        # replicates per condition
max_draws: 1000000000   # total candidate-draw budget per condition pass

experiments:
  - name: null-calibration
    experiment: Type1
    distribution: {kind: normal, mu: 0.0, sigma: 1.0}
    ns: [6, 20, 100]
    methods: []                 # baseline only: no selection, no correction
    tests: [ttest, mann_whitney, permutation]

  - name: selection-inflation
    experiment: Type1
    distribution: {kind: normal}
    ns: [20]
    methods:
      - sigma2
      - sigma3
      - accommodation_sigma2
      - iqr
      - {id: mad, threshold: 2.24}
      - grubbs
      - {id: winsorize, limit: 0.05}
    tests:
      - ttest
      - mann_whitney
      - {id: permutation, permutations: 600}

  - name: lognormal-power
    experiment: Type2
    distribution: {kind: lognormal}
    ns: [10, 30, 100]
    power_target: 0.5           # looks up the tabulated mean shift
    methods: [mad]
    tests: [ttest]

  - name: planted-outliers
    experiment: ContamType1
    distribution: {kind: normal}
    ns: [20]
    methods: [mad]
    tests: [ttest]
    injection: {count: 3, lo_sigma: 4.0, hi_sigma: 8.0}
"""


def _add_run_parser(sub):
    p = sub.add_parser("run", help="run experiments from a config file")
    p.add_argument("--config", required=True, help="YAML config or manifest JSON")
    p.add_argument("--output", required=True, help="CSV output path")
    p.add_argument(
        "--manifest",
        help="manifest JSON path (default: <output>.manifest.json)",
    )
    p.add_argument(
        "--experiment",
        action="append",
        default=None,
        help="run only blocks with this name or kind (repeatable)",
    )
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--reps", type=int, help="override reps for every block")
    p.add_argument("--max-draws", type=int, help="override the draw budget")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return p


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.max_draws is not None:
        overrides["max_draws"] = args.max_draws
    configs = load_config(args.config, overrides)
    if args.experiment:
        wanted = set(args.experiment)
        configs = [
            c for c in configs if (c.name or c.experiment) in wanted or c.experiment in wanted
        ]
        if not configs:
            raise ConfigError(
                f"no experiment blocks match {sorted(wanted)}"
            )
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    manifest_path = args.manifest or args.output + ".manifest.json"
    try:
        result = run_all(configs, jobs=args.jobs)
    except IncompleteRunError as exc:
        reporting.write_csv(exc.partial_rows, args.output)
        manifest = _manifest(
            configs, args.jobs, exc.partial_rows, args.output, True, exc.diagnostics
        )
        manifest["abort"] = {
            "condition": exc.condition,
            "method": exc.method,
            "replicate": exc.replicate,
            "budget": exc.budget,
        }
        reporting.write_manifest(manifest, manifest_path)
        print(f"error: {exc}", file=sys.stderr)
        print(
            f"partial results: {len(exc.partial_rows)} rows -> {args.output}",
            file=sys.stderr,
        )
        return 3
    reporting.write_csv(result.rows, args.output)
    reporting.write_manifest(
        _manifest(
            configs, args.jobs, result.rows, args.output, False, result.diagnostics
        ),
        manifest_path,
    )
    print(f"{len(result.rows)} rows -> {args.output}")
    print(f"manifest -> {manifest_path}")
    return 0


def _parse_audit_entries(text: "str | None"):
    """Entries look like kind:n:power or kind:n:power:mu2, comma separated."""
    if not text:
        return [
            (NORMAL, 6, 0.5, None),
            (NORMAL, 20, 0.5, None),
            (NORMAL, 10, 0.95, None),
            (NORMAL, 100, 0.95, None),
            (LOGNORMAL, 10, 0.5, None),
            (LOGNORMAL, 20, 0.5, None),
            (LOGNORMAL, 6, 0.95, None),
            (LOGNORMAL, 12, 0.95, None),
        ]
    out = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(
                f"audit entries look like kind:n:power[:mu2], got {chunk!r}"
            )
        kind, n, target = parts[0], int(parts[1]), float(parts[2])
        mu2 = float(parts[3]) if len(parts) == 4 else None
        if kind not in (NORMAL, LOGNORMAL):
            raise ConfigError(f"unknown distribution kind {kind!r}")
        out.append((kind, n, target, mu2))
    return out


def _cmd_calibrate(args) -> int:
    if args.table_audit:
        rows = []
        entries = _parse_audit_entries(args.entries)
        for kind, n, target, mu2 in entries:
            dist = normal() if kind == NORMAL else lognormal()
            # The tabulated shifts target the t test for normal
            # populations and the Mann-Whitney test for log-normal ones.
            if args.test == "auto":
                test = TestSpec(id=TTEST if kind == NORMAL else MANN_WHITNEY)
            else:
                test = TestSpec(id=args.test)
            est = verify_power(
                dist,
                n,
                test,
                mu2=mu2,
                power_target=target,
                reps=args.reps,
                master_seed=args.seed,
            )
            rows.append(
                ResultRow(
                    experiment="VerifyPower",
                    distribution=dist.label(),
                    method="none",
                    test=test.label(),
                    n=n,
                    power_target=target,
                    injected_count=None,
                    phase="baseline",
                    metric="power",
                    value=est.rate,
                    ci_lo=est.ci_lo,
                    ci_hi=est.ci_hi,
                    reps=est.trials,
                    seed=args.seed,
                )
            )
            gap = (est.rate - target) * 100.0
            print(
                f"{kind:10s} n={n:<5d} target {target:4.2f}  "
                f"measured {est.rate:.4f} [{est.ci_lo:.4f}, {est.ci_hi:.4f}]  "
                f"gap {gap:+.2f} pp"
            )
        if args.output:
            reporting.write_csv(rows, args.output)
            print(f"{len(rows)} rows -> {args.output}")
        return 0
    dist = (
        normal(args.mu, args.sigma)
        if args.distribution == NORMAL
        else lognormal(args.mu, args.sigma)
    )
    counts = tuple(int(c) for c in args.counts.split(","))
    cfg = ExperimentConfig(
        experiment=CALIBRATE,
        distribution=dist,
        ns=(args.n,),
        methods=(),
        tests=(TestSpec(id=TTEST),),
        reps=1,
        master_seed=args.seed,
        max_draws=10**9,
        calibration_counts=counts,
        calibration_repeats=args.repeats,
    )
    result = engine.run_experiment(cfg, jobs=args.jobs)
    by_count = {}
    for row in result.rows:
        by_count.setdefault(row.reps, {})[row.metric] = row
    for count in counts:
        mean_row = by_count[count]["type1_mean"]
        sd_row = by_count[count]["type1_sd"]
        print(
            f"count {count:>6d}: type1 mean {mean_row.value:.4f} "
            f"[{mean_row.ci_lo:.4f}, {mean_row.ci_hi:.4f}], "
            f"sd {sd_row.value:.5f} over {args.repeats} repeats"
        )
    if args.output:
        reporting.write_csv(result.rows, args.output)
        print(f"{len(result.rows)} rows -> {args.output}")
    return 0


def _cmd_list_methods(_args) -> int:
    spec_by_id = {m.id: m for m in default_methods()}
    lines = {
        "sigma2": "remove points more than 2 sample sd from the sample mean",
        "sigma3": "remove points more than 3 sample sd from the sample mean",
        "accommodation_sigma2": "clamp flagged points to mean +/- 2 sd (2 sd flagging)",
        "iqr": "remove points beyond 1.5 IQR outside the quartiles",
        "mad": "remove points with |x - median| / (1.4826 MAD) above the threshold",
        "grubbs": "iterative two-sided extreme-value test, removing until none rejects",
        "winsorize": "clip each tail's most extreme values to the nearest kept order statistic",
        "none": "no detection and no correction (baseline)",
    }
    for mid in ALL_METHOD_IDS:
        spec = spec_by_id[mid]
        extra = ""
        if mid == "mad":
            extra = f" (default threshold {spec.mad_threshold})"
        elif mid == "winsorize":
            extra = f" (default limit {spec.winsorize_limit})"
        elif mid == "grubbs":
            extra = f" (default alpha {spec.grubbs_alpha})"
        print(f"{mid:22s} {lines[mid]}{extra}")
    print(f"{'none':22s} {lines['none']}")
    return 0


def _cmd_list_experiments(_args) -> int:
    for name in EXPERIMENTS:
        print(f"{name:18s} {EXPERIMENT_SUMMARIES[name]}")
    return 0


def _cmd_example(args) -> int:
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(EXAMPLE_CONFIG)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(EXAMPLE_CONFIG)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outliersim",
        description="Monte Carlo study of outlier screening and statistical inference",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)

    p = sub.add_parser("example", help="print an example config file")
    p.add_argument("--output", help="write to a file instead of stdout")

    p = sub.add_parser(
        "calibrate",
        help="calibrate the sampling count, or audit tabulated effect sizes",
    )
    p.add_argument("--table-audit", action="store_true", help="measure power at tabulated mean shifts")
    p.add_argument("--entries", help="audit entries kind:n:power[:mu2], comma separated")
    p.add_argument(
        "--test",
        default="auto",
        help="test id for --table-audit (auto: ttest for normal, mann_whitney for lognormal)",
    )
    p.add_argument("--reps", type=int, default=10000, help="replicates per audit entry")
    p.add_argument("--distribution", default=NORMAL, choices=[NORMAL, LOGNORMAL])
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=10, help="points per sample")
    p.add_argument(
        "--counts",
        default="100,300,1000,3000,10000,30000",
        help="sampling counts to calibrate, comma separated",
    )
    p.add_argument("--repeats", type=int, default=100, help="repeat runs per count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", help="optionally write rows as CSV")

    sub.add_parser("list-methods", help="show correction method ids")
    sub.add_parser("list-experiments", help="show experiment kinds")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "example": _cmd_example,
        "calibrate": _cmd_calibrate,
        "list-methods": _cmd_list_methods,
        "list-experiments": _cmd_list_experiments,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
