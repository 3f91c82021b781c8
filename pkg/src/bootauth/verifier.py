"""Exhaustive run exploration and the executable property checks.

The machine is deterministic everywhere except where an attack is possible,
so enumerating both branches at every targeted attack opportunity yields
exactly the set of runs a scenario admits. Each run is then checked against
the correctness and security properties: configuration anchors never change,
a benign unattacked run ends in mutual authentication, a tampered
configuration aborts through the right error states, an attacked run aborts
after flagging the attack, and the abstracted run satisfies the same
biconditionals.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .adversary import DEFAULT_RUN_SEED, AttackScenario, apply_supply_chain, scenario_to_json_dict, ScenarioConfig
from .crypto import CryptoProvider, Drbg
from .domain import (
    ABORT,
    END,
    Phase,
    ProtocolState,
    Run,
    StatusKind,
    benignity,
    err,
    free_of_attack,
    security_context,
    validate_run,
)
from .events import EventKind
from .protocol import FaultInjection, attack_opportunity, enabled_events, step
from .provisioning import ProvisionRecord
from .trace import TraceRecord, trace_of_run, write_trace

_MAX_RUN_LENGTH = 64  # the machine is acyclic; anything longer is a bug


class ExplorationLimitError(Exception):
    """The run space exceeded the configured cap; results would be incomplete."""


class HighLevelStatus(Enum):
    RUNNING = "RUNNING"
    IDEAL = "IDEAL"
    ABORTED = "ABORTED"


@dataclass(frozen=True)
class HighLevelState:
    """Abstracted view of a low-level state: coarse status plus the benignity flag."""

    status: HighLevelStatus
    benign: bool


def explore(
    s0: ProtocolState,
    scenario: AttackScenario,
    provider: CryptoProvider,
    run_seed: bytes = DEFAULT_RUN_SEED,
    max_runs: int = 10_000,
    faults: FaultInjection | None = None,
) -> list[Run]:
    """Enumerate every maximal run of the machine under a scenario.

    Branches exactly at states where an attack is enabled and the scenario
    targets the in-flight packet; the skip branch is explored first. Raises
    rather than truncating when the cap is hit.
    """
    runs: list[Run] = []

    def walk(state: ProtocolState, rng: Drbg, steps: list) -> None:
        if len(steps) > _MAX_RUN_LENGTH:
            raise ExplorationLimitError("run exceeds the acyclic length bound")
        events = enabled_events(state)
        if not events:
            if len(runs) >= max_runs:
                raise ExplorationLimitError(f"more than {max_runs} runs")
            runs.append(Run(steps=tuple(steps), final=state))
            return
        opportunity = attack_opportunity(state)
        if opportunity is not None and opportunity in scenario.mitm_targets:
            for event in events:  # protocol step first, then the attack branch
                branch_rng = rng.copy()
                result = step(state, event, provider, branch_rng, faults)
                walk(result.state, branch_rng, steps + [(state, event)])
        else:
            event = events[0]
            result = step(state, event, provider, rng, faults)
            walk(result.state, rng, steps + [(state, event)])

    walk(s0, Drbg(run_seed), [])
    return runs


def single_run(
    s0: ProtocolState,
    scenario: AttackScenario,
    provider: CryptoProvider,
    run_seed: bytes = DEFAULT_RUN_SEED,
    faults: FaultInjection | None = None,
) -> Run:
    """One deterministic run where the attacker takes every targeted opportunity."""
    rng = Drbg(run_seed)
    steps = []
    state = s0
    while True:
        events = enabled_events(state)
        if not events:
            return Run(steps=tuple(steps), final=state)
        if len(steps) > _MAX_RUN_LENGTH:
            raise ExplorationLimitError("run exceeds the acyclic length bound")
        opportunity = attack_opportunity(state)
        event = events[0]
        if opportunity is not None and opportunity in scenario.mitm_targets:
            event = events[-1]  # the attack
        result = step(state, event, provider, rng, faults)
        steps.append((state, event))
        state = result.state


# ---------------------------------------------------------------------------
# Per-run checks
# ---------------------------------------------------------------------------


def check_functional_correctness(run: Run) -> bool:
    """Private keys, burned-in hashes, and NVM contents never change along a run."""
    first = run.initial
    return all(
        s.bsp.private_key == first.bsp.private_key
        and s.ap.private_key == first.ap.private_key
        and s.bsp.root_cert_hash == first.bsp.root_cert_hash
        and s.ap.root_cert_hash == first.ap.root_cert_hash
        and s.env.nvm == first.env.nvm
        for s in run.states()
    )


def check_security_normal(run: Run, record: ProvisionRecord) -> bool:
    """Benign configuration and no attack imply normal termination."""
    if benignity(security_context(run.initial), record) and free_of_attack(run):
        return run.final.status == END
    return True


_TAMPER_ERRORS = {err(Phase.A_CERTS), err(Phase.B_CERTS), err(Phase.RESP)}


def check_security_tampered(run: Run, record: ProvisionRecord) -> bool:
    """A non-benign configuration always aborts; attack-free runs flag it phase-correctly.

    When an in-flight attack is also present its packet error can fire
    first, so the specific-error obligation applies to attack-free runs.
    """
    if benignity(security_context(run.initial), record):
        return True
    if run.final.status != ABORT:
        return False
    if free_of_attack(run):
        return any(s.status in _TAMPER_ERRORS for s in run.states())
    return True


_PACKET_ERRORS = {err(Phase.CHAL), err(Phase.CHALRESP), err(Phase.RESP)}


def check_security_mitm(run: Run) -> bool:
    """An attacked run aborts, with an attack marker strictly before a packet error."""
    if free_of_attack(run):
        return True
    if run.final.status != ABORT:
        return False
    statuses = [s.status for s in run.states()]
    attack_positions = [i for i, st in enumerate(statuses) if st.kind is StatusKind.ATTK]
    error_positions = [j for j, st in enumerate(statuses) if st in _PACKET_ERRORS]
    return any(i < j for i in attack_positions for j in error_positions)


def abstract_run(run: Run, record: ProvisionRecord) -> list[HighLevelState]:
    """Pointwise abstraction: coarse status plus the benignity of each state's context."""

    def lift(state: ProtocolState) -> HighLevelState:
        if state.status == END:
            status = HighLevelStatus.IDEAL
        elif state.status == ABORT:
            status = HighLevelStatus.ABORTED
        else:
            status = HighLevelStatus.RUNNING
        return HighLevelState(status, benignity(security_context(state), record))

    return [lift(s) for s in run.states()]


def check_high_level(abstract: list[HighLevelState], run: Run, record: ProvisionRecord) -> bool:
    """The abstracted run keeps its benignity flag constant and ends ideal iff it should."""
    if not abstract:
        return False
    benign0 = abstract[0].benign
    if any(h.benign != benign0 for h in abstract):
        return False
    ends_ideal = abstract[-1].status is HighLevelStatus.IDEAL
    return ends_ideal == (benign0 and free_of_attack(run))


# ---------------------------------------------------------------------------
# The sweep
# ---------------------------------------------------------------------------

CHECK_ANCHORS = "anchors_immutable"
CHECK_NORMAL = "benign_unattacked_completes"
CHECK_TAMPERED = "tampered_context_aborts"
CHECK_MITM = "mitm_detected_and_aborts"
CHECK_ABSTRACTION = "abstraction_consistent"
CHECK_NAMES = (CHECK_ANCHORS, CHECK_NORMAL, CHECK_TAMPERED, CHECK_MITM, CHECK_ABSTRACTION)


@dataclass
class Violation:
    check: str
    scenario: dict
    run_index: int
    statuses: list[str]
    trace: list[TraceRecord]
    counterexample: str | None = None


@dataclass
class LemmaReport:
    """Aggregated verdicts over a scenario sweep; failures carry replayable counterexamples."""

    checks: dict[str, bool]
    run_count: int
    scenario_count: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "run_count": self.run_count,
            "scenario_count": self.scenario_count,
            "checks": dict(self.checks),
            "violations": [
                {
                    "check": v.check,
                    "scenario": v.scenario,
                    "run_index": v.run_index,
                    "statuses": v.statuses,
                    "counterexample": v.counterexample,
                }
                for v in self.violations
            ],
        }


def full_lattice(mutation_seed: bytes | None = None) -> list[AttackScenario]:
    """All 64 scenario combinations: three supply-chain bits times every mitm subset."""
    targets = [Phase.CHAL, Phase.CHALRESP, Phase.RESP]
    subsets = [
        frozenset(combo)
        for size in range(len(targets) + 1)
        for combo in itertools.combinations(targets, size)
    ]
    scenarios = []
    for ap_replaced in (False, True):
        for root_tampered in (False, True):
            for ap_cert_tampered in (False, True):
                for subset in subsets:
                    kwargs = {}
                    if mutation_seed is not None:
                        kwargs["mutation_seed"] = mutation_seed
                    scenarios.append(
                        AttackScenario(
                            ap_replaced=ap_replaced,
                            root_cert_tampered=root_tampered,
                            ap_cert_tampered=ap_cert_tampered,
                            mitm_targets=subset,
                            **kwargs,
                        )
                    )
    return scenarios


def verify_all(
    record: ProvisionRecord,
    scenarios: list[AttackScenario],
    provider: CryptoProvider,
    run_seed: bytes = DEFAULT_RUN_SEED,
    max_runs: int = 10_000,
    faults: FaultInjection | None = None,
) -> LemmaReport:
    """Explore every scenario and evaluate all five checks on every run."""
    checks = {name: True for name in CHECK_NAMES}
    violations: list[Violation] = []
    total_runs = 0

    for scenario in scenarios:
        s0 = apply_supply_chain(record, scenario, provider)
        runs = explore(s0, scenario, provider, run_seed=run_seed, max_runs=max_runs, faults=faults)
        total_runs += len(runs)
        for index, run in enumerate(runs):
            validate_run(run)
            abstract = abstract_run(run, record)
            verdicts = {
                CHECK_ANCHORS: check_functional_correctness(run),
                CHECK_NORMAL: check_security_normal(run, record),
                CHECK_TAMPERED: check_security_tampered(run, record),
                CHECK_MITM: check_security_mitm(run),
                CHECK_ABSTRACTION: check_high_level(abstract, run, record),
            }
            for name, passed in verdicts.items():
                if not passed:
                    checks[name] = False
                    violations.append(
                        Violation(
                            check=name,
                            scenario=scenario_to_json_dict(ScenarioConfig(scenario=scenario, run_seed=run_seed)),
                            run_index=index,
                            statuses=run.statuses(),
                            trace=trace_of_run(run, provider, run_seed, faults),
                        )
                    )

    return LemmaReport(
        checks=checks,
        run_count=total_runs,
        scenario_count=len(scenarios),
        violations=violations,
    )


def write_report(report: LemmaReport, report_path: Path) -> None:
    """Write the report JSON plus one JSONL counterexample trace per violation."""
    report_path.parent.mkdir(parents=True, exist_ok=True)
    for index, violation in enumerate(report.violations):
        name = f"counterexample_{index:03d}_{violation.check}.jsonl"
        write_trace(violation.trace, report_path.parent / name)
        violation.counterexample = name
    report_path.write_text(json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8")
