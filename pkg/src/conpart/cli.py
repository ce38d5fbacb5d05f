"""Command-line entry point: ``conpart <command> [flags]``.

Exit status: 0 pass, 1 failed verdict, 2 usage or parse error, 3 guard violation.
Seeds are always explicit; stochastic commands refuse to run without one.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

from .combinatorics import (ConstraintSeq, constrained_compositions, d_lambda,
                            enumerate_partitions)
from .errors import GuardViolation, ParseError
from .exact import _check_q_domain, decrement_matrix, p_fixed_H, p_product, q_formation
from .experiments import chain_record_clt, clt_blocks, ctime_jump_clt, ctime_sojourn_check
from .models import Beta, FixedH, FrequencyModel, IIDStick, TwoParameter, parse_model
from .oracles import shape_enumeration_counts
from .partition import shape
from .rng import RandomStream
from .samplers import (delete_chain, delete_transition_probs, paintbox_sample,
                       sample_partition)
from .verify import VerifySettings, report_json, run_verify, verdict_table

COMMANDS = ("sample", "exact", "enumerate", "delete-chain", "clt", "ctime", "chain-records", "verify")
STOCHASTIC = {"sample", "delete-chain", "clt", "ctime", "chain-records", "verify"}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully resolved settings of one command; embedded in every output."""

    command: str
    rho: str = ";1"
    model: str = "iid:uniform"
    seed: int | None = None
    n: int | None = None
    n_list: list = field(default_factory=list)
    T_list: list = field(default_factory=list)
    reps: int = 1
    lam: list = field(default_factory=list)
    d: int = 2
    format: str = "json"
    out: str | None = None
    threads: int = 1
    sampler: str = "sequential"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise UsageError(f"format must be json or csv, got {self.format!r}")
        if self.sampler not in ("sequential", "paintbox"):
            raise UsageError(f"sampler must be sequential or paintbox, got {self.sampler!r}")
        if self.reps < 1 or self.threads < 1 or self.d < 1:
            raise UsageError("reps, threads and d must be positive")
        if self.command in STOCHASTIC and self.seed is None:
            raise UsageError(f"'{self.command}' needs an explicit --seed")
        self.n_list = [int(v) for v in self.n_list]
        self.T_list = [float(v) for v in self.T_list]
        self.lam = [int(v) for v in self.lam]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def rho_seq(self, real: bool = False) -> ConstraintSeq:
        return ConstraintSeq.parse(self.rho, real=real)

    def frequency_model(self) -> FrequencyModel:
        return parse_model(self.model)

    def stream(self) -> RandomStream:
        return RandomStream(self.seed)


# --- parsing ---------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) if "e" in t.lower() else int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _horizon(token: str) -> float:
    token = token.strip()
    if token.startswith("e^"):
        return math.exp(float(token[2:]))
    return float(token)


def _float_list(text: str) -> list[float]:
    try:
        return [_horizon(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers or e^x, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conpart", description="Constrained exchangeable partitions.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file of RunConfig fields; flags override it")
    parser.add_argument("--rho")
    parser.add_argument("--model")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--n-list", dest="n_list", type=_int_list)
    parser.add_argument("--T-list", dest="T_list", type=_float_list)
    parser.add_argument("--reps", type=int)
    parser.add_argument("--lambda", dest="lam", type=_int_list)
    parser.add_argument("--d", type=int)
    parser.add_argument("--format", choices=("json", "csv"))
    parser.add_argument("--out")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--sampler", choices=("sequential", "paintbox"))
    return parser


def resolve_config(argv: Sequence[str]) -> RunConfig:
    args = vars(build_parser().parse_args(list(argv)))
    data = {}
    path = args.pop("config")
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    data.update({k: v for k, v in args.items() if v is not None})
    return RunConfig.from_dict(data)


# --- commands --------------------------------------------------------------

def _dumps(body: dict) -> str:
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _csv(config: RunConfig, header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config.to_dict(), sort_keys=True) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(v) for v in row) + "\n")
    return buf.getvalue()


def _require(config: RunConfig, name: str):
    value = getattr(config, name)
    if value is None or value == []:
        flag = {"lam": "--lambda", "n_list": "--n-list", "T_list": "--T-list"}.get(name, f"--{name}")
        raise UsageError(f"'{config.command}' needs {flag}")
    return value


def cmd_sample(config: RunConfig) -> tuple[str, bool]:
    n = _require(config, "n")
    rho, model, stream = config.rho_seq(), config.frequency_model(), config.stream()
    if config.sampler == "paintbox":
        traces = [paintbox_sample(model, n, stream.child(r), rho) for r in range(config.reps)]
        draws = [t.partition for t in traces]
        if config.format == "csv":
            rows = ([r] + line.split(",") for r, t in enumerate(traces)
                    for line in t.to_csv().splitlines()[1:])
            return _csv(config, ["rep", "index", "value", "replaced", "block"], rows), True
    else:
        draws = [sample_partition(model, n, stream.child(r), rho) for r in range(config.reps)]
        if config.format == "csv":
            header = [f"x{i}" for i in range(1, n + 1)]
            return _csv(config, header, (p.labels.tolist() for p in draws)), True
    body = {"config": config.to_dict(), "partitions": [str(p) for p in draws],
            "shapes": [list(shape(p)) for p in draws]}
    return _dumps(body), True


def _decrement_rows(law: Beta, r: int, n_max: int) -> list:
    dm = decrement_matrix(r, law.a, law.b, n_max)
    return dm.q[1:, 1:].tolist()


def cmd_exact(config: RunConfig) -> tuple[str, bool]:
    lam = tuple(_require(config, "lam"))
    rho, model = config.rho_seq(), config.frequency_model()
    d = d_lambda(lam, rho)
    diagnostics = {"d_lambda": d}
    if isinstance(model, FixedH):
        p = float(p_fixed_H(lam, rho, model))
        method = "fixed-H formula"
    else:
        p = p_product(lam, rho, model)
        method = "product of decrement-matrix entries"
        source = model.as_indep_beta() if isinstance(model, TwoParameter) else model
        mats = []
        for k in range(1, len(lam) + 1):
            law = source.w_law(k)
            if isinstance(law, Beta):
                mats.append({"k": k, "rho_k": rho(k), "a": law.a, "b": law.b,
                             "q": _decrement_rows(law, rho(k), sum(lam))})
        diagnostics["decrement_matrices"] = mats
    diagnostics["p_partition"] = p / d
    try:
        _check_q_domain(lam, rho)
        diagnostics["q_formation"] = float(q_formation(lam, rho, model))
    except ValueError as exc:
        diagnostics["q_formation"] = None
        diagnostics["q_note"] = str(exc)
    body = {"config": config.to_dict(), "composition": list(lam), "rho": str(rho),
            "model": model.describe(), "p": p, "method": method, "diagnostics": diagnostics}
    return _dumps(body), True


def cmd_enumerate(config: RunConfig) -> tuple[str, bool]:
    n = _require(config, "n")
    rho = config.rho_seq()
    parts = enumerate_partitions(n, rho)
    counts = shape_enumeration_counts(n, rho)
    rows = [{"shape": list(lam), "enumerated": counts.get(lam, 0), "d_lambda": d_lambda(lam, rho)}
            for lam in constrained_compositions(n, rho)]
    ok = all(r["enumerated"] == r["d_lambda"] for r in rows) and set(counts) <= {
        tuple(r["shape"]) for r in rows}
    if config.format == "csv":
        return _csv(config, ["partition", "shape"],
                    ([str(p), " ".join(map(str, shape(p)))] for p in parts)), ok
    body = {"config": config.to_dict(), "count": len(parts), "partitions": [str(p) for p in parts],
            "shapes": rows, "passed": ok}
    return _dumps(body), ok


def cmd_delete_chain(config: RunConfig) -> tuple[str, bool]:
    lam = tuple(_require(config, "lam"))
    rho, stream = config.rho_seq(), config.stream()
    chains = [delete_chain(lam, rho, stream.child(r)) for r in range(config.reps)]
    if config.format == "csv":
        rows = ([r, step, " ".join(map(str, c))] for r, chain in enumerate(chains)
                for step, c in enumerate(chain))
        return _csv(config, ["rep", "step", "composition"], rows), True
    first = {" ".join(map(str, k)): v for k, v in delete_transition_probs(lam, rho).items()}
    body = {"config": config.to_dict(), "first_step": first,
            "chains": [[list(c) for c in chain] for chain in chains]}
    return _dumps(body), True


def _iid(config: RunConfig) -> IIDStick:
    model = config.frequency_model()
    if not isinstance(model, IIDStick):
        raise UsageError(f"'{config.command}' needs an iid model, got {config.model!r}")
    return model


def _report_output(config: RunConfig, report, raw_header=None, raw_rows=None) -> tuple[str, bool]:
    if config.format == "csv" and raw_header:
        return _csv(config, raw_header, raw_rows), report.passed
    body = report.to_dict()
    body["config"] = {"run": config.to_dict(), "experiment": report.config}
    return json.dumps(body, indent=2, sort_keys=True) + "\n", report.passed


def cmd_clt(config: RunConfig) -> tuple[str, bool]:
    n_list = _require(config, "n_list")
    report = clt_blocks(_iid(config), config.rho_seq(), n_list, config.reps, config.stream(),
                        threads=config.threads, keep_raw=config.format == "csv")
    rows = ([e["n"], r, k] for e in report.entries for r, k in enumerate(e.get("raw", [])))
    return _report_output(config, report, ["n", "rep", "K_n"], rows)


def cmd_ctime(config: RunConfig) -> tuple[str, bool]:
    T_list = _require(config, "T_list")
    rho = config.rho_seq(real=True)
    stream = config.stream()
    report = ctime_jump_clt(_iid(config), rho, T_list, config.reps, stream.child(0),
                            threads=config.threads)
    check = ctime_sojourn_check(_iid(config), rho, T_list[0], min(config.reps, 2000), stream.child(1))
    for e in check.entries:
        e["kind"] = "sojourn_mean"
    report.entries.extend(check.entries)
    return _report_output(config, report)


def cmd_chain_records(config: RunConfig) -> tuple[str, bool]:
    n_list = _require(config, "n_list")
    report = chain_record_clt(config.d, n_list, config.reps, config.stream(), threads=config.threads)
    return _report_output(config, report)


def cmd_verify(config: RunConfig) -> tuple[str, bool]:
    checks = run_verify(config.rho_seq(), config.frequency_model(), config.seed, VerifySettings())
    print(verdict_table(checks), file=sys.stderr if config.out is None else sys.stdout)
    text = report_json(checks, {"run": config.to_dict(),
                                "settings": dataclasses.asdict(VerifySettings())})
    return text, all(c.passed is not False for c in checks)


HANDLERS = {
    "sample": cmd_sample, "exact": cmd_exact, "enumerate": cmd_enumerate,
    "delete-chain": cmd_delete_chain, "clt": cmd_clt, "ctime": cmd_ctime,
    "chain-records": cmd_chain_records, "verify": cmd_verify,
}


def run(config: RunConfig) -> int:
    text, ok = HANDLERS[config.command](config)
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(resolve_config(argv))
    except (UsageError, ParseError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except GuardViolation as exc:
        print(f"guard violation ({exc.guard}): {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
