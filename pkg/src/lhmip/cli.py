"""Command-line interface: ``lhmip <command> ...``.

Every JSON document the tool writes carries a ``manifest`` (tool version,
command line, input digests, seed, timestamp, outputs). Exit status is 0 on
success, 1 on validation or I/O errors and 2 on usage errors. Set
``LHMIP_THREADS`` to run optimizer restarts in parallel.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import jsonschema
import numpy as np

from . import code5, extraction, optimizer, protocol, reporting
from . import hamiltonian as ham
from . import strategy as strat
from .qmath import fidelity


class CliError(Exception):
    """Validation or I/O failure reported with exit status 1."""


# ---------------------------------------------------------------- loading


def _read_json(path):
    try:
        with open(path, "rb") as fh:
            return json.loads(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON: {exc}") from exc


def _load_instance(path) -> ham.HamiltonianInstance:
    data = _read_json(path)
    try:
        reporting.validate(data, "instance")
    except jsonschema.ValidationError as exc:
        raise CliError(f"{path}: {exc.message}") from exc
    try:
        return ham.instance_from_dict(data)
    except ham.InstanceError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _load_strategy(path) -> strat.ProverStrategy:
    data = _read_json(path)
    try:
        reporting.validate(data, "strategy")
        return strat.strategy_from_dict(data)
    except jsonschema.ValidationError as exc:
        raise CliError(f"{path}: {exc.message}") from exc
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _complex_pairs(vec) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vec).reshape(-1)]


# ---------------------------------------------------------------- output


class _Run:
    """Collects inputs and outputs of one invocation and writes the documents."""

    def __init__(self, argv, args):
        self.argv = ["lhmip"] + list(argv)
        self.args = args
        self.inputs: list = []

    def manifest(self, seed=None) -> dict:
        outputs = [p for p in (getattr(self.args, "out", None), getattr(self.args, "csv", None)) if p]
        extra = getattr(self.args, "strategy_out", None)
        if extra:
            outputs.append(extra)
        return reporting.manifest(self.argv, self.inputs, seed, outputs)

    def emit(self, doc: dict, schema: str, seed=None) -> None:
        doc = dict(doc)
        doc["manifest"] = self.manifest(seed)
        reporting.validate(doc, schema)
        try:
            reporting.emit(doc, getattr(self.args, "out", None))
        except OSError as exc:
            raise CliError(f"cannot write {self.args.out}: {exc.strerror}") from exc

    def write_csv(self, header, rows) -> None:
        path = getattr(self.args, "csv", None)
        if not path:
            return
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") if isinstance(v, float) else ("" if v is None else v) for v in row])
        try:
            reporting.write_atomic(path, buf.getvalue())
        except OSError as exc:
            raise CliError(f"cannot write {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------- commands


def cmd_gen(run: _Run) -> None:
    a = run.args
    if a.family == "epr-chain":
        inst = ham.gen_epr_chain(a.n)
    elif a.family == "random":
        inst = ham.gen_random(a.n, a.k, a.m, a.seed)
    else:
        inst = ham.single_qubit_terms(a.n)
    run.emit(ham.instance_to_dict(inst), "instance", seed=getattr(a, "seed", None))


def cmd_validate(run: _Run) -> None:
    inst = _load_instance(run.args.instance)
    run.inputs.append(run.args.instance)
    run.emit({"valid": True, "n": inst.n, "k": inst.k, "m": inst.m}, "validate")


def cmd_ground(run: _Run) -> None:
    inst = _load_instance(run.args.instance)
    run.inputs.append(run.args.instance)
    try:
        e0, gamma = ham.ground(inst)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    doc = {"n": inst.n, "m": inst.m, "energy": e0, "normalized_energy": e0 / inst.m}
    if run.args.witness:
        doc["witness"] = _complex_pairs(gamma.amplitudes)
    run.emit(doc, "ground")


def cmd_strategy(run: _Run) -> None:
    a = run.args
    seed = None
    if a.kind == "honest":
        inst = _load_instance(a.instance)
        run.inputs.append(a.instance)
        try:
            _, gamma = ham.ground(inst)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        s = strat.honest(inst, gamma, aux=a.aux)
    elif a.kind == "epr-cheat":
        s = strat.epr_pair_cheat(a.n, a.k)
    elif a.kind == "random":
        s = strat.random_strategy(a.n, a.k, a.seed, aux=a.aux)
        seed = a.seed
    else:
        base = _load_strategy(a.strategy)
        run.inputs.append(a.strategy)
        s = strat.perturb(base, a.theta, a.seed)
        seed = a.seed
    run.emit(strat.strategy_to_dict(s), "strategy", seed=seed)


def _pair(run: _Run):
    inst = _load_instance(run.args.instance)
    s = _load_strategy(run.args.strategy)
    run.inputs += [run.args.instance, run.args.strategy]
    if s.n != inst.n:
        raise CliError(f"strategy has n={s.n} but the instance has n={inst.n}")
    return inst, s


def cmd_run(run: _Run) -> None:
    a = run.args
    inst, s = _pair(run)
    try:
        if a.mode == "exact":
            rep = protocol.accept_probability_exact(inst, s)
            seed = None
        else:
            rep = protocol.accept_probability_sampled(inst, s, a.shots, a.seed)
            seed = a.seed
    except MemoryError as exc:
        raise CliError(str(exc)) from exc
    doc = rep.to_dict()
    run.emit(doc, "run", seed=seed)
    keys = ["p_test1", "p_test2", "p_overall", "mode", "shots", "seed", "std_error"]
    run.write_csv(keys, [[doc.get(k) for k in keys]])


def cmd_extract(run: _Run) -> None:
    inst, s = _pair(run)
    try:
        res = extraction.extract_witness(s, inst, method=run.args.method)
        e0, gamma = ham.ground(inst)
    except (MemoryError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    sigma = res.sigma.matrix
    doc = {
        "n": inst.n,
        "sigma": [_complex_pairs(row) for row in sigma],
        "normalized_energy": res.normalized_energy,
        "method": res.method,
        "steps": res.steps_applied,
        "diagnostics": {
            "trace": res.sigma.trace,
            "ground_normalized_energy": e0 / inst.m,
            "fidelity_to_ground": fidelity(res.sigma, gamma.density()),
        },
    }
    run.emit(doc, "extraction")


def _parse_set(text: str) -> tuple:
    try:
        return tuple(sorted(int(q) for q in text.split(",") if q.strip()))
    except ValueError as exc:
        raise CliError(f"bad set {text!r}; expected comma-separated qubit indices") from exc


def cmd_diagnose(run: _Run) -> None:
    a = run.args
    s = _load_strategy(a.strategy)
    run.inputs.append(a.strategy)
    S = _parse_set(a.set)
    if not S or S[-1] >= s.n or S[0] < 0 or len(S) > s.k or a.qubit not in S:
        raise CliError(f"set {S} must contain qubit {a.qubit} and be a valid question for n={s.n}, k={s.k}")
    provers = range(s.layout.r) if a.prover is None else [a.prover]
    try:
        per = [{"prover": t, "deviation": extraction.claim1_deviation(s, t, a.qubit, S)} for t in provers]
        aggregate = extraction.claim1_average(s) if a.aggregate else None
    except (MemoryError, IndexError) as exc:
        raise CliError(str(exc)) from exc
    doc = {
        "qubit": a.qubit,
        "set": list(S),
        "per_prover": per,
        "mean_over_provers": float(np.mean([p["deviation"] for p in per])),
        "aggregate": aggregate,
    }
    run.emit(doc, "claim1")
    run.write_csv(["prover", "deviation"], [[p["prover"], p["deviation"]] for p in per])


def cmd_optimize(run: _Run) -> None:
    a = run.args
    inst = _load_instance(a.instance)
    run.inputs.append(a.instance)
    config = optimizer.OptimizerConfig(max_sweeps=a.sweeps, seed=a.seed, aux_qubits=a.aux)
    try:
        trace = optimizer.restart_sweep(inst, config, a.restarts)
    except MemoryError as exc:
        raise CliError(str(exc)) from exc
    if a.strategy_out:
        doc = strat.strategy_to_dict(trace.strategy)
        doc["manifest"] = run.manifest(a.seed)
        try:
            reporting.write_atomic(a.strategy_out, reporting.dumps(doc))
        except OSError as exc:
            raise CliError(f"cannot write {a.strategy_out}: {exc.strerror}") from exc
    doc = {
        "best_acceptance": trace.final,
        "verified_acceptance": optimizer.verify_trace(inst, trace),
        "acceptance": trace.acceptance,
        "converged": trace.converged,
        "best_restart": trace.restart,
        "restarts_best": trace.restarts_best,
        "restarts": a.restarts,
        "sweeps": a.sweeps,
        "seed": a.seed,
        "aux": a.aux,
        "strategy_out": a.strategy_out,
    }
    run.emit(doc, "optimize", seed=a.seed)
    run.write_csv(["sweep", "acceptance"], list(enumerate(trace.acceptance)))


def cmd_code(run: _Run) -> None:
    run.emit(code5.tables(), "code_tables")


# ---------------------------------------------------------------- parser


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _theta(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("theta must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lhmip", description="Five-prover k-local Hamiltonian protocol simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def out(sp, csv_flag=False):
        sp.add_argument("--out", help="output file (default: standard output)")
        if csv_flag:
            sp.add_argument("--csv", help="also write a flat CSV table to this path")

    g = sub.add_parser("gen", help="generate an instance")
    gsub = g.add_subparsers(dest="family", required=True)
    sp = gsub.add_parser("epr-chain")
    sp.add_argument("--n", type=_positive, required=True)
    out(sp)
    sp = gsub.add_parser("random")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--k", type=_positive, required=True)
    sp.add_argument("--m", type=_positive, required=True)
    sp.add_argument("--seed", type=int, required=True)
    out(sp)
    sp = gsub.add_parser("single-qubit", help="sum of |1><1| on every qubit (satisfiable)")
    sp.add_argument("--n", type=_positive, required=True)
    out(sp)

    sp = sub.add_parser("validate", help="check an instance file")
    sp.add_argument("instance")
    out(sp)

    sp = sub.add_parser("ground", help="exact ground energy")
    sp.add_argument("instance")
    sp.add_argument("--witness", action="store_true", help="include the ground-state amplitudes")
    out(sp)

    s = sub.add_parser("strategy", help="build a prover strategy")
    ssub = s.add_subparsers(dest="kind", required=True)
    sp = ssub.add_parser("honest", help="encoded ground state, identity unitaries")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--aux", type=_nonneg, default=0)
    out(sp)
    sp = ssub.add_parser("epr-cheat", help="two provers share one EPR pair")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--k", type=_positive, default=2)
    out(sp)
    sp = ssub.add_parser("random", help="Haar-random state and unitaries")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--k", type=_positive, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--aux", type=_nonneg, default=0)
    out(sp)
    sp = ssub.add_parser("perturb", help="rotate every unitary by exp(i theta G)")
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--theta", type=_theta, required=True)
    sp.add_argument("--seed", type=int, required=True)
    out(sp)

    for name, helptext in (("run", "acceptance probability"), ("sample", "Monte Carlo protocol runs")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--instance", required=True)
        sp.add_argument("--strategy", required=True)
        if name == "run":
            sp.add_argument("--mode", choices=["exact", "sample"], default="exact")
        sp.add_argument("--shots", type=_positive, default=10000)
        sp.add_argument("--seed", type=int, default=0)
        out(sp, csv_flag=True)

    sp = sub.add_parser("extract", help="extract the witness from a strategy")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--method", choices=["auto", "purified", "channel"], default="auto")
    out(sp)

    d = sub.add_parser("diagnose", help="extraction diagnostics")
    dsub = d.add_subparsers(dest="what", required=True)
    sp = dsub.add_parser("claim1", help="||(C_i^t - D_{i,S}^t)|Psi~>||^2")
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--qubit", type=_nonneg, required=True)
    sp.add_argument("--set", required=True, help='comma-separated set, e.g. "0,1"')
    sp.add_argument("--prover", type=_nonneg, choices=range(code5.R), default=None)
    sp.add_argument("--aggregate", action="store_true", help="also average over all qubits, sets and provers")
    out(sp, csv_flag=True)

    sp = sub.add_parser("optimize", help="see-saw search for high-acceptance strategies")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--restarts", type=_positive, default=10)
    sp.add_argument("--sweeps", type=_positive, default=30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--aux", type=_nonneg, default=0)
    sp.add_argument("--strategy-out", help="write the best strategy to this file")
    out(sp, csv_flag=True)

    c = sub.add_parser("code", help="[[5,1,3]] code tables")
    csub = c.add_subparsers(dest="what", required=True)
    sp = csub.add_parser("tables")
    out(sp)
    return p


COMMANDS = {
    "gen": cmd_gen,
    "validate": cmd_validate,
    "ground": cmd_ground,
    "strategy": cmd_strategy,
    "run": cmd_run,
    "sample": cmd_run,
    "extract": cmd_extract,
    "diagnose": cmd_diagnose,
    "optimize": cmd_optimize,
    "code": cmd_code,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "sample":
        args.mode = "sample"
    run = _Run(argv, args)
    try:
        COMMANDS[args.command](run)
    except CliError as exc:
        print(f"lhmip: error: {exc}", file=sys.stderr)
        return 1
    except (ham.InstanceError, ValueError) as exc:
        print(f"lhmip: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
