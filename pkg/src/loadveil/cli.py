"""Command line: synth, train, obfuscate, evaluate, epsilon.

Each subcommand wraps one pipeline stage so stages can be scripted and
inspected independently. Exit codes: 0 success, 1 runtime or I/O failure,
2 usage or validation error. Flags override values from an optional
``key = value`` config file (`#` starts a comment).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .evaluation import AttackConfig, compare_report
from .meterdata import (
    ApplianceProfile,
    format_timestamp,
    generate_synthetic,
    load_csv,
    load_truth_csv,
    parse_timestamp,
    write_csv,
    write_truth_csv,
)
from .pipeline import compose_stream_budget, process_stream
from .randomized_response import PrivacyParams, epsilon_closed_form, epsilon_empirical, \
    build_transition_matrix
from .sparse_coding import (
    DivergenceError,
    TrainingConfig,
    load_dictionary,
    save_dictionary,
    train_dictionary,
)

import numpy as np


def _load_config(path) -> dict[str, str]:
    config: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected `key = value`, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            config[key.strip().lower().replace("-", "_")] = value.strip()
    return config


def _pick(flag_value, config: dict[str, str], key: str, convert, default=None):
    if flag_value is not None:
        return flag_value
    if key in config:
        return convert(config[key])
    return default


def _require(value, flag: str, parser: argparse.ArgumentParser):
    if value is None:
        parser.error(f"{flag} is required (flag or config file)")
    return value


def _parse_appliances(specs: list[str]) -> list[ApplianceProfile]:
    profiles = []
    for chunk in specs:
        for spec in chunk.split(","):
            spec = spec.strip()
            if not spec:
                continue
            parts = spec.split(":")
            if len(parts) not in (4, 5):
                raise ValueError(
                    f"appliance spec must be name:watts:mean_on:mean_off[:jitter], got {spec!r}")
            name = parts[0]
            try:
                numbers = [float(p) for p in parts[1:]]
            except ValueError:
                raise ValueError(f"non-numeric field in appliance spec {spec!r}") from None
            jitter = numbers[3] if len(numbers) == 4 else 0.0
            profiles.append(ApplianceProfile(name, numbers[0], numbers[1], numbers[2], jitter))
    if not profiles:
        raise ValueError("at least one appliance spec is required")
    return profiles


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_synth(args) -> int:
    parser = args._parser
    config = _load_config(args.config) if args.config else {}
    t = _require(_pick(args.t, config, "t", int), "--t", parser)
    batches = _pick(args.batches, config, "batches", int, 1)
    seed = _pick(args.seed, config, "seed", int, 0)
    period = _pick(args.period_seconds, config, "period_seconds", int, 900)
    meter_id = _pick(args.meter_id, config, "meter_id", str, "synth-0")
    start = _pick(args.start, config, "start", str, "2020-01-01T00:00:00Z")
    out = _pick(args.out, config, "out", str, "readings.csv")
    truth_out = _pick(args.truth_out, config, "truth_out", str, "truth.csv")
    specs = args.appliances if args.appliances else (
        [config["appliances"]] if "appliances" in config else [])
    if not specs:
        parser.error("--appliances is required (flag or config file)")
    profiles = _parse_appliances(specs)

    readings, truth = generate_synthetic(
        profiles, t=t, batches=batches, seed=seed,
        meter_id=meter_id, start_time=parse_timestamp(start), period_seconds=period)
    write_csv(readings, out)
    write_truth_csv(truth, truth_out, meter_id=meter_id)
    _log(f"wrote {len(readings)} batches of t={t} to {out}; ground truth to {truth_out}")
    return 0


def cmd_train(args) -> int:
    parser = args._parser
    config = _load_config(args.config) if args.config else {}
    data = _require(_pick(args.data, config, "data", str), "--data", parser)
    t = _pick(args.t, config, "t", int, 96)
    n = _require(_pick(args.n, config, "n", int), "--n", parser)
    lam = _pick(getattr(args, "sparsity_weight"), config, "lambda", float)
    max_iters = _pick(args.max_iters, config, "max_iters", int, 500)
    tol = _pick(args.tol, config, "tol", float, 1e-6)
    seed = _pick(args.seed, config, "seed", int, 0)
    sigma = _pick(args.sigma, config, "sigma", float)
    init_mode = _pick(args.init_mode, config, "init_mode", str, "data_segments")
    dict_out = _pick(args.dict_out, config, "dict", str, "dictionary.txt")

    batches = load_csv(data, batch_length=t)
    full = [b for b in batches if b.t == t]
    if len(full) < len(batches):
        _log(f"dropping {len(batches) - len(full)} partial batch(es) shorter than t={t}")
    training = TrainingConfig(n=n, sparsity_weight=lam, max_outer_iters=max_iters,
                              tol=tol, sigma=sigma, seed=seed, init_mode=init_mode)
    result = train_dictionary(full, training)
    save_dictionary(result.dictionary, dict_out)
    if result.objectives:
        _log(f"final objective {result.objectives[-1]:.6g} after {result.n_iters} "
             f"iterations (converged={result.converged}, lambda={result.sparsity_weight:.6g})")
    else:
        _log("0 iterations requested; wrote the seeded initial dictionary")
    _log(f"wrote dictionary t={result.dictionary.t} n={result.dictionary.n} to {dict_out}")
    return 0


def cmd_obfuscate(args) -> int:
    parser = args._parser
    config = _load_config(args.config) if args.config else {}
    data = _require(_pick(args.data, config, "data", str), "--data", parser)
    dict_path = _require(_pick(args.dict, config, "dict", str), "--dict", parser)
    f = _require(_pick(args.f, config, "f", float), "--f", parser)
    delta0 = _pick(args.delta0_override, config, "delta0_override", float)
    lam = _pick(getattr(args, "sparsity_weight"), config, "lambda", float, 0.0)
    seed = _pick(args.seed, config, "seed", int, 0)
    sigma = _pick(args.sigma, config, "sigma", float)
    out = _pick(args.out, config, "out", str, "obfuscated.csv")
    meta_out = _pick(args.meta_out, config, "meta_out", str, "obfuscation_meta.json")

    dictionary = load_dictionary(dict_path)
    batches = load_csv(data, batch_length=dictionary.t)
    full = [b for b in batches if b.t == dictionary.t]
    if not full:
        lengths = sorted({b.t for b in batches})
        raise ValueError(
            f"dictionary expects t={dictionary.t} but the data only yields "
            f"batches of t={lengths}")
    if len(full) < len(batches):
        _log(f"dropping {len(batches) - len(full)} partial batch(es) shorter "
             f"than t={dictionary.t}")

    params = PrivacyParams(f=f, delta0=delta0, seed=seed)
    results = process_stream(full, dictionary, params, lam, sigma=sigma)
    write_csv([r.obfuscated for r in results], out)

    eps_paper, eps_mech = compose_stream_budget(results)
    stream_meta = []
    for index, r in enumerate(results):
        distortion = float(np.mean(np.abs(r.obfuscated.values - r.original.values)))
        stream_meta.append({
            "batch_index": index,
            "meter_id": r.original.meter_id,
            "start_time": format_timestamp(r.original.start_time),
            "epsilon_paper": r.epsilon_paper,
            "epsilon_mechanism": r.epsilon_mechanism,
            "delta0": r.delta0,
            "reconstruction_error": r.reconstruction_error,
            "mean_abs_distortion_watts": distortion,
            "warnings": list(r.warnings),
        })
        _log(f"batch {index}: epsilon_paper={r.epsilon_paper:.6g} "
             f"epsilon_mechanism={r.epsilon_mechanism:.6g}")
    meta = {
        "schema_version": 1,
        "f": f,
        "seed": seed,
        "sparsity_weight": lam,
        "dictionary": {"t": dictionary.t, "n": dictionary.n},
        "stream": stream_meta,
        "composed": {
            "epsilon_paper": eps_paper,
            "epsilon_mechanism": eps_mech,
            "caveat": "max over batches (parallel composition); one meter's "
                      "batches are not disjoint datasets",
        },
    }
    _write_json(meta, meta_out)
    _log(f"wrote {len(results)} obfuscated batches to {out}; metadata to {meta_out}")
    return 0


def cmd_evaluate(args) -> int:
    parser = args._parser
    config = _load_config(args.config) if args.config else {}
    original = _require(_pick(args.original, config, "original", str), "--original", parser)
    truth_path = _require(_pick(args.truth, config, "truth", str), "--truth", parser)
    obfuscated = _require(_pick(args.obfuscated, config, "obfuscated", str),
                          "--obfuscated", parser)
    t = _pick(args.t, config, "t", int, 96)
    f = _require(_pick(args.f, config, "f", float), "--f", parser)
    delta0 = _pick(args.delta0_override, config, "delta0_override", float)
    fraction = _pick(args.threshold_fraction, config, "threshold_fraction", float, 0.5)
    hysteresis = _pick(args.hysteresis, config, "hysteresis", int, 1)
    report_out = _pick(args.report_out, config, "report", str, "report.json")
    specs = args.appliances if args.appliances else (
        [config["appliances"]] if "appliances" in config else [])
    if not specs:
        parser.error("--appliances is required (flag or config file)")
    profiles = _parse_appliances(specs)

    original_batches = load_csv(original, batch_length=t)
    obfuscated_batches = load_csv(obfuscated, batch_length=t)
    truths = load_truth_csv(truth_path)
    if not (len(original_batches) == len(truths) == len(obfuscated_batches)):
        raise ValueError(
            f"batch counts differ: {len(original_batches)} original, {len(truths)} truth, "
            f"{len(obfuscated_batches)} obfuscated")

    epsilons = None
    if args.meta or "meta" in config:
        meta_path = args.meta if args.meta else config["meta"]
        with open(meta_path) as fh:
            meta = json.load(fh)
        composed = meta.get("composed", {})
        eps_paper = composed.get("epsilon_paper")
        eps_mech = composed.get("epsilon_mechanism")
        epsilons = (
            math.nan if eps_paper is None else float(eps_paper),
            math.inf if eps_mech is None else float(eps_mech),
        )

    params = PrivacyParams(f=f, delta0=delta0, seed=0)
    attack = AttackConfig.for_profiles(profiles, fraction=fraction,
                                       hysteresis_slots=hysteresis)
    report = compare_report(original_batches, truths, obfuscated_batches, profiles,
                            params, attack_config=attack, epsilons=epsilons)
    report.to_json(report_out)
    worst = max((row.obfuscated.f1 - row.original.f1 for row in report.appliances),
                default=0.0)
    _log(f"wrote report for {len(report.appliances)} appliances to {report_out} "
         f"(max obfuscated-minus-original F1 delta {worst:+.3f})")
    return 0


def cmd_epsilon(args) -> int:
    parser = args._parser
    config = _load_config(args.config) if args.config else {}
    f = _require(_pick(args.f, config, "f", float), "--f", parser)
    delta0 = _pick(args.delta0, config, "delta0", float)
    n = _pick(args.n, config, "n", int)
    if delta0 is None and n is None:
        parser.error("provide --delta0 and/or --n")
    print(f"f = {f:g}")
    if delta0 is not None:
        eps = epsilon_closed_form(f, delta0)
        print(f"epsilon_paper      (delta0={delta0:g}): {eps:.6f}")
    if n is not None:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if f == 0:
            raise ValueError("f = 0 applies no noise; the mechanism budget is unbounded")
        tm = build_transition_matrix(np.arange(n, dtype=float), f)
        print(f"epsilon_mechanism  (n={n}): {epsilon_empirical(tm):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadveil",
        description="Obfuscate smart-meter load profiles with sparse coding "
                    "and randomized response.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic readings plus ground truth")
    p.add_argument("--appliances", action="append",
                   help="name:watts:mean_on:mean_off[:jitter], comma-separated or repeated")
    p.add_argument("--t", type=int, help="slots per batch")
    p.add_argument("--batches", type=int, help="number of batches (default 1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--period-seconds", type=int, help="slot length (default 900)")
    p.add_argument("--meter-id")
    p.add_argument("--start", help="ISO-8601 start time (default 2020-01-01T00:00:00Z)")
    p.add_argument("--out", help="readings CSV (default readings.csv)")
    p.add_argument("--truth-out", help="ground-truth CSV (default truth.csv)")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_synth, _parser=p)

    p = sub.add_parser("train", help="train a dictionary from readings")
    p.add_argument("--data", help="training readings CSV")
    p.add_argument("--t", type=int, help="slots per batch (default 96)")
    p.add_argument("--n", type=int, help="number of basis functions (must exceed t)")
    p.add_argument("--lambda", dest="sparsity_weight", type=float,
                   help="L1 weight (default: scaled from the data)")
    p.add_argument("--max-iters", type=int, help="outer iteration cap (default 500)")
    p.add_argument("--tol", type=float, help="relative objective-decrease stop (default 1e-6)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float, help="optional reconstruction-norm bound")
    p.add_argument("--init-mode", choices=("data_segments", "random"))
    p.add_argument("--dict-out", help="output dictionary file (default dictionary.txt)")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_train, _parser=p)

    p = sub.add_parser("obfuscate", help="obfuscate readings against a dictionary")
    p.add_argument("--data", help="readings CSV")
    p.add_argument("--dict", help="dictionary file from `train`")
    p.add_argument("--f", type=float, help="substitution probability in [0, 1)")
    p.add_argument("--delta0-override", type=float,
                   help="fix the zero-ratio statistic instead of measuring it")
    p.add_argument("--lambda", dest="sparsity_weight", type=float,
                   help="L1 weight for activation inference (default 0)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float, help="warn when reconstruction error exceeds this")
    p.add_argument("--out", help="obfuscated CSV (default obfuscated.csv)")
    p.add_argument("--meta-out", help="per-batch metadata JSON (default obfuscation_meta.json)")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_obfuscate, _parser=p)

    p = sub.add_parser("evaluate", help="attack original vs obfuscated and report")
    p.add_argument("--original", help="original readings CSV")
    p.add_argument("--truth", help="ground-truth CSV from `synth`")
    p.add_argument("--obfuscated", help="obfuscated readings CSV")
    p.add_argument("--appliances", action="append",
                   help="name:watts:mean_on:mean_off[:jitter] (thresholds derive from watts)")
    p.add_argument("--t", type=int, help="slots per batch (default 96)")
    p.add_argument("--f", type=float, help="substitution probability used upstream")
    p.add_argument("--delta0-override", type=float)
    p.add_argument("--threshold-fraction", type=float,
                   help="attack threshold as a fraction of rated power (default 0.5)")
    p.add_argument("--hysteresis", type=int, help="suppress ON-runs shorter than this")
    p.add_argument("--meta", help="obfuscation metadata JSON for composed budgets")
    p.add_argument("--report-out", help="report JSON (default report.json)")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_evaluate, _parser=p)

    p = sub.add_parser("epsilon", help="print privacy budgets for given parameters")
    p.add_argument("--f", type=float, help="substitution probability")
    p.add_argument("--delta0", type=float, help="zero-ratio statistic for the closed form")
    p.add_argument("--n", type=int, help="candidate count for the mechanism budget")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_epsilon, _parser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors (and --help)
        return int(exc.code or 0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DivergenceError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
