"""Command-line entry point: provisioning fixtures, single-scenario runs, and sweeps.

Exit codes are a function of the outcome: `run` exits 0 on normal
termination, 2 when the machine aborted (an attack was detected), 1 on any
internal error; `verify` exits 0 iff the sweep reports zero violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .adversary import (
    AttackScenario,
    ScenarioConfig,
    ScenarioError,
    apply_supply_chain,
    load_scenario,
    scenario_from_json_dict,
)
from .crypto import CONCRETE, SYMBOLIC, CryptoError, make_provider
from .domain import END
from .provisioning import (
    DEFAULT_AP_SEED,
    DEFAULT_BSP_SEED,
    DEFAULT_OEM_SEED,
    ProvisionError,
    provision,
    write_record,
)
from .trace import trace_of_run, write_trace
from .verifier import ExplorationLimitError, full_lattice, single_run, verify_all, write_report

TABLE4_FIXTURES = ("apr", "cpm", "crpm", "rpm", "rct", "apct")
ALL_FIXTURES = ("benign",) + TABLE4_FIXTURES


class CliError(Exception):
    """User-facing failure with a clean message."""


def _hex_seed(text: str) -> bytes:
    try:
        value = bytes.fromhex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a hex string: {text!r}") from exc
    if not value:
        raise argparse.ArgumentTypeError("seed must be non-empty")
    return value


def fixture_scenario(name: str) -> ScenarioConfig:
    """Load one of the packaged scenario fixtures by bare name."""
    ref = resources.files("bootauth").joinpath(f"fixtures/{name}.json")
    with resources.as_file(ref) as path:
        if not path.exists():
            raise CliError(f"no such fixture: {name!r} (known: {', '.join(ALL_FIXTURES)})")
        return load_scenario(path)


def _resolve_scenario(spec: str) -> ScenarioConfig:
    path = Path(spec)
    if path.exists():
        return load_scenario(path)
    if spec in ALL_FIXTURES:
        return fixture_scenario(spec)
    raise CliError(f"scenario {spec!r} is neither a file nor a known fixture name")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bootauth",
        description="Simulate and verify the processor-authentication boot machine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_prov = sub.add_parser("provision", help="write certificate/key fixtures to a directory")
    p_prov.add_argument("--out", required=True, type=Path, help="output directory")
    p_prov.add_argument("--backend", choices=(CONCRETE, SYMBOLIC), default=CONCRETE)
    p_prov.add_argument("--oem-seed", type=_hex_seed, default=DEFAULT_OEM_SEED)
    p_prov.add_argument("--bsp-seed", type=_hex_seed, default=DEFAULT_BSP_SEED)
    p_prov.add_argument("--ap-seed", type=_hex_seed, default=DEFAULT_AP_SEED)

    p_run = sub.add_parser("run", help="execute one scenario and emit its trace")
    p_run.add_argument("scenario", help="scenario JSON path or fixture name (benign, apr, cpm, ...)")
    p_run.add_argument("--backend", choices=(CONCRETE, SYMBOLIC), default=CONCRETE)
    p_run.add_argument("--seed", type=_hex_seed, default=None, help="override the run seed (hex)")
    p_run.add_argument("--trace", type=Path, default=None, help="write the JSONL trace here")

    p_verify = sub.add_parser("verify", help="explore a scenario lattice and check every property")
    p_verify.add_argument("--lattice", choices=("full", "table4", "benign"), default="full")
    p_verify.add_argument("--backend", choices=(CONCRETE, SYMBOLIC), default=SYMBOLIC)
    p_verify.add_argument("--seed", type=_hex_seed, default=None, help="override the run seed (hex)")
    p_verify.add_argument("--report", type=Path, default=None, help="write the report JSON here")
    p_verify.add_argument("--max-runs", type=int, default=10_000)
    return parser


def cmd_provision(args: argparse.Namespace) -> int:
    provider = make_provider(args.backend)
    record = provision(args.oem_seed, args.bsp_seed, args.ap_seed, provider)
    try:
        written = write_record(record, args.out)
    except OSError as exc:
        raise CliError(f"cannot write to {args.out}: {exc}") from exc
    for path in written:
        print(path)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_scenario(args.scenario)
    provider = make_provider(args.backend)
    record = provision(config.oem_seed, config.bsp_seed, config.ap_seed, provider)
    s0 = apply_supply_chain(record, config.scenario, provider)
    run_seed = args.seed if args.seed is not None else config.run_seed
    run = single_run(s0, config.scenario, provider, run_seed=run_seed)
    records = trace_of_run(run, provider, run_seed)
    if args.trace is not None:
        write_trace(records, args.trace)
    print(f"backend={args.backend} steps={len(records)} final={run.final.status}")
    return 0 if run.final.status == END else 2


def _lattice_scenarios(name: str) -> list[AttackScenario]:
    if name == "full":
        return full_lattice()
    if name == "table4":
        return [fixture_scenario(f).scenario for f in TABLE4_FIXTURES]
    return [AttackScenario()]


def cmd_verify(args: argparse.Namespace) -> int:
    provider = make_provider(args.backend)
    record = provision(DEFAULT_OEM_SEED, DEFAULT_BSP_SEED, DEFAULT_AP_SEED, provider)
    scenarios = _lattice_scenarios(args.lattice)
    kwargs = {"max_runs": args.max_runs}
    if args.seed is not None:
        kwargs["run_seed"] = args.seed
    report = verify_all(record, scenarios, provider, **kwargs)
    if args.report is not None:
        write_report(report, args.report)
    for name, passed in report.checks.items():
        print(f"{name}: {'pass' if passed else 'FAIL'}")
    print(
        f"scenarios={report.scenario_count} runs={report.run_count} "
        f"violations={len(report.violations)} backend={args.backend}"
    )
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "provision":
            return cmd_provision(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except (CliError, ScenarioError, ProvisionError, CryptoError, ExplorationLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
