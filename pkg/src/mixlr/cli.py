"""Command-line entry point: toy benchmark, LR computation, simulation
studies, and calibration audits.

Every subcommand is reproducible from its flags, input files, and the
explicit seed; outputs carry a metadata stamp (format, version, seed,
config hash). Exit codes: 0 success, 2 I/O error, 3 golden-check
failure, 4 validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

from . import io as mio
from . import toy
from .calibration import calibrate
from .genotypes import RareAllelePolicy
from .integrate import PriorSpec, lr_int, marginal_quadrature
from .mle import SearchSpec, fit_both, table3_report
from .model import HD, HP, ModelConfig, Proposition
from .study import StudyConfig, divergence_summary, run_study

EXIT_OK = 0
EXIT_IO = 2
EXIT_GOLDEN = 3
EXIT_VALIDATION = 4


class GoldenFailure(Exception):
    pass


def _parse_policy(text: str) -> RareAllelePolicy:
    t = text.lower()
    if t == "5over2n":
        return RareAllelePolicy.five_over_2n()
    if t == "betamean":
        return RareAllelePolicy.beta_mean()
    if t.startswith("fixed:"):
        return RareAllelePolicy.fixed(float(t.split(":", 1)[1]))
    raise ValueError(f"unknown policy {text!r} (want 5over2n, betamean, or fixed:<v>)")


def _load_model_config(path) -> ModelConfig:
    if path is None:
        return ModelConfig()
    with open(path) as fh:
        return ModelConfig(**json.load(fh))


def _load_proposition(path: str, default_label: str) -> Proposition:
    """Proposition from JSON: {"noc": int, "fixed": {"0": genotype-csv}, "label": ...}."""
    with open(path) as fh:
        spec = json.load(fh)
    fixed = {
        int(slot): mio.read_genotype_csv(os.path.join(os.path.dirname(path), rel))
        for slot, rel in spec.get("fixed", {}).items()
    }
    return Proposition(
        noc=int(spec["noc"]), fixed_contributors=fixed, label=spec.get("label", default_label)
    )


def _cmd_toy(args) -> int:
    reports = toy.toy_report(args.mode)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        grid = toy.toy_grid()
        with open(os.path.join(args.out, "toy_grid.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t1"] + [f"t2={t:g}" for t in toy.T2_LATTICE])
            for i, t1 in enumerate(toy.T1_LATTICE):
                w.writerow([f"{t1:g}"] + [repr(v) for v in grid[i]])
        payload = {name: asdict(rep) for name, rep in reports.items()}
        payload["metadata"] = mio.output_metadata(config={"mode": args.mode})
        mio.write_json(os.path.join(args.out, "toy_report.json"), payload)
    for name, rep in reports.items():
        print(
            f"{name}: mle_h1={rep.mle_h1:.4f} mle_h2={rep.mle_h2:.4f} "
            f"lr_ml={rep.lr_ml:.4f} int_h1={rep.int_h1:.6g} "
            f"int_h2={rep.int_h2:.6g} lr_int={rep.lr_int:.6g}"
        )
    if args.check:
        failures = toy.check_golden()
        for f in failures:
            print(f"golden check FAIL: {f}", file=sys.stderr)
        if failures:
            raise GoldenFailure(f"{len(failures)} golden values out of tolerance")
        print("golden check passed")
    return EXIT_OK


def _cmd_lr(args) -> int:
    profile = mio.read_profile_csv(args.profile, args.at)
    table = mio.read_frequency_table(args.freq)
    policy = _parse_policy(args.policy)
    config = _load_model_config(args.config)
    hp = _load_proposition(args.hp, HP)
    hd = _load_proposition(args.hd, HD)
    out = {"metadata": mio.output_metadata(seed=args.seed, config=vars(args))}
    if args.engine in ("mle", "both"):
        report = fit_both(
            profile, hp, hd, table, policy, config, SearchSpec(seed=args.seed)
        )
        out["mle"] = table3_report(report)
        shown = "EXCLUSION" if report.lr_ml == 0 else f"{report.log10_lr_ml:.4f}"
        print(f"MLE log10 LR: {shown}")
    if args.engine in ("int", "both"):
        prior = PriorSpec()
        num = marginal_quadrature(profile, hp, table, policy, config, prior)
        den = marginal_quadrature(profile, hd, table, policy, config, prior)
        ratio = lr_int(num, den)
        out["int"] = {
            "marginal_hp": num.marginal,
            "marginal_hd": den.marginal,
            "lr_int": ratio,
        }
        shown = "EXCLUSION" if ratio == 0 else f"{ratio:.6g}"
        print(f"Integrated LR: {shown}")
    if args.out:
        mio.write_json(args.out, out)
    return EXIT_OK


def _cmd_study(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    table = mio.read_frequency_table(
        os.path.join(os.path.dirname(args.config), raw.pop("freq"))
    )
    policy = _parse_policy(raw.pop("policy", "5over2n"))
    raw.pop("seed", None)
    cfg = StudyConfig(
        table=table,
        policy=policy,
        engines=tuple(raw.pop("engines", ["MLE", "INT"])),
        **raw,
    )
    records = run_study(cfg, seed=args.seed)
    summary = divergence_summary(records)
    for k in sorted(summary["groups"]):
        g = summary["groups"][k]
        print(f"{k}: n={g['n']} frac_lr>1={g['fraction_lr_gt_1']:.3f}")
    os.makedirs(args.out, exist_ok=True)
    mio.write_records_csv(os.path.join(args.out, "records.csv"), records)
    summary["metadata"] = mio.output_metadata(seed=args.seed, config=raw)
    for g in summary["groups"].values():
        g.pop("c2_pairs", None)  # scatter data lives in records.csv
    mio.write_json(os.path.join(args.out, "summary.json"), summary)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    grouped = mio.read_calibration_csv(args.records)
    if not grouped:
        raise ValueError("no calibration records")
    os.makedirs(args.out, exist_ok=True)
    verdicts = {"metadata": mio.output_metadata(config=vars(args)), "systems": {}}
    for system, records in grouped.items():
        result = calibrate(records, bin_width=args.binwidth)
        tag = system or "all"
        mio.write_calibration_csv(os.path.join(args.out, f"calibration_{tag}.csv"), result)
        plot_path = os.path.join(args.out, f"plotdata_{tag}.csv")
        with open(plot_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_center", "logit_observed", "logit_p_lo", "logit_p_hi"])
            from .calibration import logit

            for b in result["bins"]:
                if b.observed is None or not 0 < b.observed < 1:
                    continue
                w.writerow(
                    [(b.lo + b.hi) / 2, logit(b.observed), logit(b.p_lo), logit(b.p_hi)]
                )
        verdicts["systems"][tag] = {
            "n_hp": result["n_hp"],
            "n_ha": result["n_ha"],
            "n_miss": result["n_miss"],
            "excluded_counts": result["excluded_counts"],
            "misses": [
                [b.lo, b.hi] for b in result["bins"] if b.verdict == "MISS"
            ],
        }
        print(f"{tag}: {result['n_miss']} MISS bins of {len(result['bins'])}")
    mio.write_json(os.path.join(args.out, "verdicts.json"), verdicts)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixlr", description=__doc__)
    p.add_argument(
        "--threads", type=int, default=1,
        help="worker cap; results are identical for any value",
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("toy", help="run the two-peak benchmark")
    t.add_argument("--mode", choices=["lattice", "refined", "both"], default="both")
    t.add_argument("--out", help="output directory for grid CSV + report JSON")
    t.add_argument("--check", action="store_true", help="verify golden values (exit 3 on miss)")
    t.set_defaults(func=_cmd_toy)

    l = sub.add_parser("lr", help="compute an LR for one profile")
    l.add_argument("--profile", required=True)
    l.add_argument("--freq", required=True)
    l.add_argument("--hp", required=True, help="proposition JSON")
    l.add_argument("--hd", required=True, help="proposition JSON")
    l.add_argument("--engine", choices=["mle", "int", "both"], default="both")
    l.add_argument("--policy", default="5over2n", help="5over2n | betamean | fixed:<v>")
    l.add_argument("--config", help="model-config JSON")
    l.add_argument("--at", type=float, help="analytical threshold override")
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--out", help="JSON report path")
    l.set_defaults(func=_cmd_lr)

    s = sub.add_parser("study", help="run a seeded divergence study")
    s.add_argument("--config", required=True, help="study-config JSON")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_study)

    c = sub.add_parser("calibrate", help="calibration audit of labelled LRs")
    c.add_argument("--records", required=True)
    c.add_argument("--binwidth", type=float, default=1.0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GoldenFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GOLDEN
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
