"""Command line front end.

    ecpsim run    --alpha-sq 0.8 --rounds 1,2 --trials 100000 --seed 7
    ecpsim sweep  --sweep 0.5,0.6,0.7,0.8,0.9 --rounds 1 --format json
    ecpsim report --alpha-sq 0.8 --round 2
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace

from . import analysis
from .protocol import ProtocolError, SchmidtPair, run_multipartite
from .rng import default_seed, stream
from .state import fidelity_up_to_phase, ghz_state, layout_of

CSV_HEADER = [
    "alpha_sq",
    "n_parties",
    "max_rounds",
    "exact_success",
    "mc_success",
    "mc_trials",
    "mc_stderr",
    "mean_rounds_to_success",
]


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass
class RunConfig:
    alpha_sq: float | None = None
    n_parties: int = 2
    max_rounds: list[int] = field(default_factory=lambda: [1])
    trials: int = 0
    seed: int = 0
    output_format: str = "csv"
    sweep: list[float] | None = None
    ancilla_mismatch: float = 0.0

    def points(self) -> list[float]:
        return sorted(self.sweep) if self.sweep is not None else [self.alpha_sq]

    def validate(self) -> None:
        if self.sweep is not None:
            if not self.sweep:
                raise ConfigError("sweep", "sweep list is empty")
            if len(set(self.sweep)) != len(self.sweep):
                raise ConfigError("sweep", "sweep values must be distinct")
        elif self.alpha_sq is None:
            raise ConfigError("alpha_sq", "missing (use --alpha-sq)")
        name = "sweep" if self.sweep is not None else "alpha_sq"
        for x in self.points():
            if not math.isfinite(x) or x <= 0.0 or x >= 1.0:
                raise ConfigError(name, f"degenerate Schmidt pair at alpha_sq={x!r} (must lie strictly between 0 and 1)")
        if not math.isfinite(self.ancilla_mismatch) or abs(self.ancilla_mismatch) >= math.pi / 4:
            raise ConfigError("ancilla_mismatch", f"must be an angle below pi/4 in magnitude, got {self.ancilla_mismatch!r}")
        if self.n_parties < 2:
            raise ConfigError("n_parties", f"must be >= 2, got {self.n_parties}")
        if not self.max_rounds or any(r < 1 for r in self.max_rounds):
            raise ConfigError("max_rounds", f"every value must be >= 1, got {self.max_rounds}")
        if len(set(self.max_rounds)) != len(self.max_rounds):
            raise ConfigError("max_rounds", "values must be distinct")
        if self.trials < 0:
            raise ConfigError("trials", f"must be >= 0, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output_format", f"must be csv or json, got {self.output_format!r}")


def compute_rows(config: RunConfig) -> list[analysis.SweepRow]:
    rows = []
    for x in config.points():
        c = SchmidtPair.from_alpha_sq(x)
        for r in sorted(config.max_rounds):
            row = analysis.monte_carlo(c, config.n_parties, r, config.trials, config.seed, config.ancilla_mismatch)
            rows.append(replace(row, alpha_sq=x))
    return rows


def trace_run(config: RunConfig) -> dict:
    """Replay the first sampled trial of the first point (same stream as the Monte Carlo)."""
    alpha_sq = config.points()[0]
    c = SchmidtPair.from_alpha_sq(alpha_sq)
    rounds = sorted(config.max_rounds)[0]
    report = run_multipartite(c, config.n_parties, rounds, stream(config.seed), ancilla_mismatch=config.ancilla_mismatch)
    fidelity = None
    if report.final_state is not None:
        fidelity = fidelity_up_to_phase(report.final_state, ghz_state(layout_of(report.final_state)))
    return {
        "alpha_sq": alpha_sq,
        "max_rounds": rounds,
        "rounds": [
            {
                "round": o.round_index,
                "charge": o.charge_result,
                "charge_probability": o.charge_probability,
                "spin": o.spin_result,
                "correction": o.correction_applied,
                "branch_probability": o.branch_probability,
            }
            for o in report.rounds
        ],
        "messages": [
            {"from": m.sender, "to": list(m.recipients), "content": m.content, "round": m.round_index}
            for m in report.messages
        ],
        "succeeded": report.succeeded,
        "final_fidelity": fidelity,
        "cumulative_success_probability": report.cumulative_success_probability,
    }


def mismatch_summary(config: RunConfig) -> list[dict]:
    out = []
    for x in config.points():
        c = SchmidtPair.from_alpha_sq(x)
        for r in sorted(config.max_rounds):
            tree = analysis.enumerate_branches(c, config.n_parties, r, config.ancilla_mismatch)
            f = tree.mean_success_fidelity()
            out.append({"alpha_sq": x, "max_rounds": r, "mean_success_fidelity": f, "fidelity_loss": 1.0 - f})
    return out


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def to_json(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits; NaN becomes null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render(config: RunConfig, with_trace: bool) -> str:
    rows = compute_rows(config)
    trace = trace_run(config) if with_trace and config.trials >= 1 else None
    mismatch = mismatch_summary(config) if config.ancilla_mismatch else None
    if config.output_format == "json":
        doc = {"config": asdict(config), "rows": [asdict(r) for r in rows]}
        if trace is not None:
            doc["trace"] = trace
        if mismatch is not None:
            doc["ancilla_mismatch"] = mismatch
        return to_json(doc) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([_num(getattr(r, name)) for name in CSV_HEADER])
    if mismatch is not None:
        for m in mismatch:
            buf.write(
                f"# ancilla_mismatch={_num(config.ancilla_mismatch)} alpha_sq={_num(m['alpha_sq'])} "
                f"max_rounds={m['max_rounds']} mean_success_fidelity={_num(m['mean_success_fidelity'])} "
                f"fidelity_loss={_num(m['fidelity_loss'])}\n"
            )
    if trace is not None:
        buf.write(f"# trace alpha_sq={_num(trace['alpha_sq'])} max_rounds={trace['max_rounds']}\n")
        for o in trace["rounds"]:
            buf.write(
                f"# round {o['round']}: charge={o['charge']} (p={_num(o['charge_probability'])}) "
                f"spin={o['spin']} correction={o['correction']}\n"
            )
        for m in trace["messages"]:
            to = ",".join(str(k) for k in m["to"])
            buf.write(f"# message {m['from']} -> {to}: {m['content']}\n")
        fid = "none" if trace["final_fidelity"] is None else _num(trace["final_fidelity"])
        buf.write(f"# succeeded={_num(trace['succeeded'])} final_fidelity={fid}\n")
    return buf.getvalue()


def render_report(alpha_sq: float, round_k: int, output_format: str) -> str:
    report = analysis.discrepancy_report(SchmidtPair.from_alpha_sq(alpha_sq), round_k)
    report["alpha_sq"] = alpha_sq
    if output_format == "json":
        return to_json(report) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(report))
    writer.writerow([_num(v) for v in report.values()])
    return buf.getvalue()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ecpsim", description="Charge-detection entanglement concentration simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--n-parties", type=int, default=2)
        p.add_argument("--rounds", type=_ints, default=[1], help="max rounds, comma-separated for several")
        p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (0 = exact only)")
        p.add_argument("--seed", type=int, default=None, help="defaults to $ECPSIM_SEED or 0")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument(
            "--ancilla-mismatch", type=float, default=0.0, help="ancilla mixing-angle offset in radians (default 0)"
        )

    run = sub.add_parser("run", help="exact and sampled success probability for one alpha^2")
    run.add_argument("--alpha-sq", type=float, required=True)
    common(run)

    sweep = sub.add_parser("sweep", help="table over several alpha^2 values")
    sweep.add_argument("--sweep", type=_floats, required=True, help="comma-separated alpha^2 values")
    common(sweep)

    report = sub.add_parser("report", help="round-k exact probability vs the 2|ab|^(2k) estimate")
    report.add_argument("--alpha-sq", type=float, required=True)
    report.add_argument("--round", type=int, default=2)
    report.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        alpha_sq=getattr(args, "alpha_sq", None),
        n_parties=args.n_parties,
        max_rounds=args.rounds,
        trials=args.trials,
        seed=default_seed() if args.seed is None else args.seed,
        output_format=args.format,
        sweep=getattr(args, "sweep", None),
        ancilla_mismatch=args.ancilla_mismatch,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            if not 0.0 < args.alpha_sq < 1.0:
                raise ConfigError("alpha_sq", f"degenerate Schmidt pair at alpha_sq={args.alpha_sq!r}")
            if args.round < 1:
                raise ConfigError("round", f"must be >= 1, got {args.round}")
            out = render_report(args.alpha_sq, args.round, args.format)
        else:
            config = config_from_args(args)
            config.validate()
            out = render(config, with_trace=args.command == "run")
    except (ConfigError, ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
