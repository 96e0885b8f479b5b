"""Scenario definitions: network layout, firewall rules, exploits, defenses.

A scenario is an immutable value object.  It is built either by one of the
generators in this module or by loading a JSON file, and is validated before
an environment will accept it.

Public surface:
    ScenarioConfig, SubnetDef, HostConfig, ExploitDef, FirewallEdge
    ActionDurations, RewardConstants, PenaltyTable
    ValidationReport, Finding
    ScenarioError, ScenarioParseError, ScenarioValidationError
    load_scenario, save_scenario, scenario_from_dict, scenario_to_dict
    validate_scenario, scenario_hash
    generate_paper_scale, generate_desk_scale, random_scenario
    add_honeyfiles
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

Address = tuple[int, int]

ACTION_KINDS = ("subnet_scan", "exploit", "file_scan", "encrypt")
RISK_CLASSES = ("low", "medium", "high")
ACCESS_LEVELS = ("user", "root")
EXPLOIT_TARGET_KINDS = ("service", "os", "process")

_RISK_ORDER = {name: i for i, name in enumerate(RISK_CLASSES)}

DEFAULT_SERVICE_RISK: dict[str, str] = {
    "sql_monitor": "high",
    "ms_sql_m": "high",
    "directory_service": "high",
    "snmp": "high",
    "https": "medium",
    "openssh": "medium",
    "ftp": "medium",
    "netbios_ssn": "medium",
    "netbios_dgm": "medium",
    "dhcp": "medium",
    "terminal_server": "medium",
    "http": "low",
    "smtp": "low",
    "syslog": "low",
    "subroutine_caller": "low",
    "ipp": "low",
}

DEFAULT_PENALTY_TABLE: dict[str, dict[str, float]] = {
    "subnet_scan": {"low": 1.0, "medium": 1.0, "high": 1.0},
    "exploit": {"low": 2.0, "medium": 3.0, "high": 4.0},
    "file_scan": {"low": 2.0, "medium": 2.0, "high": 2.0},
    "encrypt": {"low": 3.0, "medium": 5.0, "high": 6.0},
}


class ScenarioError(ValueError):
    """Base class for scenario construction and IO failures."""


class ScenarioParseError(ScenarioError):
    """Raised when a scenario document is malformed or has bad field types."""


class ScenarioValidationError(ScenarioError):
    """Raised when a structurally parseable scenario fails validation."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        lines = "; ".join(f"{f.field}: {f.message}" for f in report.errors)
        super().__init__(f"invalid scenario: {lines}")


@dataclass(frozen=True)
class SubnetDef:
    """A network segment.  `public` marks internet-facing segments."""

    id: int
    public: bool = False


@dataclass(frozen=True)
class HostConfig:
    """Static facts about one machine.

    `value` is the payout revealed by a file scan and collected by
    encryption.  `has_honeyfiles` is defender-side knowledge: the attacker
    never observes it directly, only its consequences.
    """

    address: Address
    os: str
    services: tuple[str, ...]
    processes: tuple[str, ...] = ()
    value: float = 0.0
    has_honeyfiles: bool = False
    sensitive: bool = False


@dataclass(frozen=True)
class ExploitDef:
    """One attack capability.

    `target_kind` is "service", "os" or "process"; the exploit applies to a
    host only if the named target is present there.  Cross-subnet use
    additionally requires the firewall edge to allow the targeted service.
    """

    id: int
    target_kind: str
    target: str
    success_prob: float = 0.9
    access: str = "user"


@dataclass(frozen=True)
class FirewallEdge:
    """Undirected link between two subnets with a service allowlist."""

    subnets: tuple[int, int]
    services: tuple[str, ...]


@dataclass(frozen=True)
class ActionDurations:
    """Simulated wall-clock cost of each action, in seconds."""

    subnet_scan: float = 30.0
    exploit: float = 10.0
    file_scan: float = 60.0
    encrypt: float = 300.0

    def of(self, kind: str) -> float:
        return float(getattr(self, kind))


@dataclass(frozen=True)
class RewardConstants:
    """Positive reward terms: per discovered host, per exploit, encrypt base."""

    discover: float = 10.0
    exploit: float = 10.0
    encrypt: float = 50.0


@dataclass(frozen=True)
class PenaltyTable:
    """Detection-risk penalties by action kind and host risk class.

    A host's risk class is the highest class among its services; a host
    with no classified services counts as low.
    """

    service_risk: Mapping[str, str] = field(
        default_factory=lambda: dict(DEFAULT_SERVICE_RISK)
    )
    table: Mapping[str, Mapping[str, float]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PENALTY_TABLE.items()}
    )

    def host_risk(self, services: Iterable[str]) -> str:
        best = 0
        for svc in services:
            cls = self.service_risk.get(svc)
            if cls is not None:
                best = max(best, _RISK_ORDER[cls])
        return RISK_CLASSES[best]

    def penalty(self, kind: str, risk_class: str) -> float:
        return float(self.table[kind][risk_class])


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one attack scenario."""

    subnets: tuple[SubnetDef, ...]
    hosts: tuple[HostConfig, ...]
    firewall: tuple[FirewallEdge, ...]
    exploits: tuple[ExploitDef, ...]
    start_host: Address
    detect_prob: float = 0.8
    action_durations: ActionDurations = field(default_factory=ActionDurations)
    rewards: RewardConstants = field(default_factory=RewardConstants)
    penalties: PenaltyTable = field(default_factory=PenaltyTable)
    isolation_delay_s: float = 3600.0
    patch_timeout_s: float = 1800.0
    flag_threshold: int = 3
    max_steps: int = 2000
    rho: float = 1.0

    @property
    def n_hosts(self) -> int:
        return len(self.hosts)

    def host_index(self, address: Address) -> int:
        try:
            return self.address_map()[tuple(address)]
        except KeyError:
            raise ScenarioError(f"unknown host address {tuple(address)}") from None

    def address_map(self) -> dict[Address, int]:
        return {tuple(h.address): i for i, h in enumerate(self.hosts)}

    def service_catalog(self) -> tuple[str, ...]:
        return tuple(sorted({s for h in self.hosts for s in h.services}))

    def os_catalog(self) -> tuple[str, ...]:
        return tuple(sorted({h.os for h in self.hosts}))

    def process_catalog(self) -> tuple[str, ...]:
        return tuple(sorted({p for h in self.hosts for p in h.processes}))


@dataclass(frozen=True)
class Finding:
    """One validator message, tied to the schema field it concerns."""

    field: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        parts = [f"{k}={v}" for k, v in self.counts.items()]
        status = "OK" if self.ok else f"{len(self.errors)} error(s)"
        return f"{status} ({', '.join(parts)})"


# ---------------------------------------------------------------------------
# serialization

_TOP_LEVEL_KEYS = (
    "subnets", "hosts", "firewall", "exploits", "start_host",
    "detect_prob", "action_durations", "rewards", "penalties",
    "isolation_delay_s", "patch_timeout_s", "flag_threshold",
    "max_steps", "rho",
)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "subnets": [{"id": s.id, "public": s.public} for s in cfg.subnets],
        "hosts": [
            {
                "address": list(h.address),
                "os": h.os,
                "services": list(h.services),
                "processes": list(h.processes),
                "value": h.value,
                "has_honeyfiles": h.has_honeyfiles,
                "sensitive": h.sensitive,
            }
            for h in cfg.hosts
        ],
        "firewall": [
            {"subnets": list(e.subnets), "services": list(e.services)}
            for e in cfg.firewall
        ],
        "exploits": [
            {
                "id": e.id,
                "target_kind": e.target_kind,
                "target": e.target,
                "success_prob": e.success_prob,
                "access": e.access,
            }
            for e in cfg.exploits
        ],
        "start_host": list(cfg.start_host),
        "detect_prob": cfg.detect_prob,
        "action_durations": dataclasses.asdict(cfg.action_durations),
        "rewards": dataclasses.asdict(cfg.rewards),
        "penalties": {
            "service_risk": dict(cfg.penalties.service_risk),
            "table": {k: dict(v) for k, v in cfg.penalties.table.items()},
        },
        "isolation_delay_s": cfg.isolation_delay_s,
        "patch_timeout_s": cfg.patch_timeout_s,
        "flag_threshold": cfg.flag_threshold,
        "max_steps": cfg.max_steps,
        "rho": cfg.rho,
    }


def _addr(value, where: str) -> Address:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ScenarioParseError(f"{where}: address must be a [subnet, local] pair of ints")
    return (value[0], value[1])


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a JSON object")
    for key in ("subnets", "hosts", "start_host"):
        if key not in doc:
            raise ScenarioParseError(f"missing required key: {key}")
    try:
        subnets = tuple(
            SubnetDef(id=int(s["id"]), public=bool(s.get("public", False)))
            for s in doc["subnets"]
        )
        hosts = tuple(
            HostConfig(
                address=_addr(h["address"], "hosts[].address"),
                os=str(h["os"]),
                services=tuple(str(s) for s in h.get("services", [])),
                processes=tuple(str(p) for p in h.get("processes", [])),
                value=float(h.get("value", 0.0)),
                has_honeyfiles=bool(h.get("has_honeyfiles", False)),
                sensitive=bool(h.get("sensitive", False)),
            )
            for h in doc["hosts"]
        )
        firewall = tuple(
            FirewallEdge(
                subnets=(int(e["subnets"][0]), int(e["subnets"][1])),
                services=tuple(str(s) for s in e.get("services", [])),
            )
            for e in doc.get("firewall", [])
        )
        exploits = tuple(
            ExploitDef(
                id=int(e["id"]),
                target_kind=str(e["target_kind"]),
                target=str(e["target"]),
                success_prob=float(e.get("success_prob", 0.9)),
                access=str(e.get("access", "user")),
            )
            for e in doc.get("exploits", [])
        )
        durations = ActionDurations(**{
            k: float(v) for k, v in doc.get("action_durations", {}).items()
        })
        rewards = RewardConstants(**{
            k: float(v) for k, v in doc.get("rewards", {}).items()
        })
        pen_doc = doc.get("penalties", {})
        penalties = PenaltyTable(
            service_risk=dict(pen_doc.get("service_risk", DEFAULT_SERVICE_RISK)),
            table={
                k: {c: float(x) for c, x in v.items()}
                for k, v in pen_doc.get("table", DEFAULT_PENALTY_TABLE).items()
            },
        )
        cfg = ScenarioConfig(
            subnets=subnets,
            hosts=hosts,
            firewall=firewall,
            exploits=exploits,
            start_host=_addr(doc["start_host"], "start_host"),
            detect_prob=float(doc.get("detect_prob", 0.8)),
            action_durations=durations,
            rewards=rewards,
            penalties=penalties,
            isolation_delay_s=float(doc.get("isolation_delay_s", 3600.0)),
            patch_timeout_s=float(doc.get("patch_timeout_s", 1800.0)),
            flag_threshold=int(doc.get("flag_threshold", 3)),
            max_steps=int(doc.get("max_steps", 2000)),
            rho=float(doc.get("rho", 1.0)),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioParseError(f"bad scenario field: {exc}") from exc
    return cfg


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(cfg), fh, indent=2)
        fh.write("\n")


def load_scenario(path, validate: bool = True) -> ScenarioConfig:
    """Read, parse and (by default) validate a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: not valid JSON: {exc}") from exc
    cfg = scenario_from_dict(doc)
    if validate:
        report = validate_scenario(cfg)
        if not report.ok:
            raise ScenarioValidationError(report)
    return cfg


def scenario_hash(cfg: ScenarioConfig) -> str:
    """Content hash of the scenario, stable across load/save round trips."""
    blob = json.dumps(scenario_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# validation

def validate_scenario(cfg: ScenarioConfig) -> ValidationReport:
    """Structural checks.  Errors make the scenario unusable; warnings do not."""
    report = ValidationReport()
    err = lambda f, m: report.errors.append(Finding(f, m))

    subnet_ids = [s.id for s in cfg.subnets]
    if len(set(subnet_ids)) != len(subnet_ids):
        err("subnets", "duplicate subnet ids")
    id_set = set(subnet_ids)
    if any(i < 0 for i in subnet_ids):
        err("subnets", "subnet ids must be non-negative")

    seen: set[Address] = set()
    catalog = set(cfg.service_catalog())
    for h in cfg.hosts:
        s, local = h.address
        where = f"hosts[{s},{local}]"
        if h.address in seen:
            err("hosts", f"{where}: duplicate address")
        seen.add(h.address)
        if s not in id_set:
            err("hosts", f"{where}: subnet {s} not defined")
        if local < 0:
            err("hosts", f"{where}: local id must be non-negative")
        if h.value < 0:
            err("hosts", f"{where}: value must be non-negative")
        for svc in h.services:
            if svc not in cfg.penalties.service_risk:
                err("penalties", f"{where}: service {svc!r} has no risk class")

    if not cfg.hosts:
        err("hosts", "at least one host is required")

    for e in cfg.firewall:
        a, b = e.subnets
        where = f"firewall[{a}-{b}]"
        if a not in id_set or b not in id_set:
            err("firewall", f"{where}: references undefined subnet")
        if a == b:
            err("firewall", f"{where}: self edge is implicit, not allowed")
        if not e.services:
            err("firewall", f"{where}: empty service allowlist")
        for svc in e.services:
            if svc not in catalog:
                err("firewall", f"{where}: service {svc!r} runs on no host")

    edge_pairs = [tuple(sorted(e.subnets)) for e in cfg.firewall]
    if len(set(edge_pairs)) != len(edge_pairs):
        err("firewall", "duplicate edge between same subnet pair")

    exploit_ids = [e.id for e in cfg.exploits]
    if len(set(exploit_ids)) != len(exploit_ids):
        err("exploits", "duplicate exploit ids")
    os_set = set(cfg.os_catalog())
    proc_set = set(cfg.process_catalog())
    for e in cfg.exploits:
        where = f"exploits[{e.id}]"
        if e.target_kind not in EXPLOIT_TARGET_KINDS:
            err("exploits", f"{where}: bad target_kind {e.target_kind!r}")
            continue
        if not 0.0 <= e.success_prob <= 1.0:
            err("exploits", f"{where}: success_prob outside [0, 1]")
        if e.access not in ACCESS_LEVELS:
            err("exploits", f"{where}: bad access level {e.access!r}")
        universe = {"service": catalog, "os": os_set, "process": proc_set}[e.target_kind]
        if e.target not in universe:
            err("exploits", f"{where}: target {e.target!r} present on no host")

    if cfg.hosts and tuple(cfg.start_host) not in seen:
        err("start_host", f"start host {tuple(cfg.start_host)} does not exist")

    if not 0.0 <= cfg.detect_prob <= 1.0:
        err("detect_prob", "must be within [0, 1]")
    for kind in ACTION_KINDS:
        if cfg.action_durations.of(kind) <= 0:
            err("action_durations", f"{kind} duration must be positive")
        row = cfg.penalties.table.get(kind)
        if row is None:
            err("penalties", f"missing penalty row for {kind}")
            continue
        for cls in RISK_CLASSES:
            if cls not in row:
                err("penalties", f"penalty table {kind} missing class {cls}")
            elif row[cls] < 0:
                err("penalties", f"penalty table {kind}/{cls} must be non-negative")
    for svc, cls in cfg.penalties.service_risk.items():
        if cls not in RISK_CLASSES:
            err("penalties", f"service {svc!r} has unknown risk class {cls!r}")
    if cfg.isolation_delay_s < 0:
        err("isolation_delay_s", "must be non-negative")
    if cfg.patch_timeout_s <= 0:
        err("patch_timeout_s", "must be positive")
    if cfg.flag_threshold < 1:
        err("flag_threshold", "must be at least 1")
    if cfg.max_steps < 1:
        err("max_steps", "must be at least 1")
    if cfg.rho < 0:
        err("rho", "must be non-negative")

    report.counts = {
        "subnets": len(cfg.subnets),
        "hosts": len(cfg.hosts),
        "edges": len(cfg.firewall),
        "exploits": len(cfg.exploits),
        "sensitive": sum(h.sensitive for h in cfg.hosts),
        "honeyfiles": sum(h.has_honeyfiles for h in cfg.hosts),
    }
    return report


# ---------------------------------------------------------------------------
# editing

def add_honeyfiles(cfg: ScenarioConfig, addresses: Iterable[Address]) -> ScenarioConfig:
    """Return a copy of the scenario with honeyfiles planted on `addresses`.

    Idempotent per host.  Unknown addresses raise ScenarioError.
    """
    index = cfg.address_map()
    chosen: set[int] = set()
    for addr in addresses:
        key = tuple(addr)
        if key not in index:
            raise ScenarioError(f"unknown host address {key}")
        chosen.add(index[key])
    hosts = tuple(
        dataclasses.replace(h, has_honeyfiles=True) if i in chosen else h
        for i, h in enumerate(cfg.hosts)
    )
    return dataclasses.replace(cfg, hosts=hosts)


# ---------------------------------------------------------------------------
# generators

_DESK_CATALOG = (
    "dhcp", "directory_service", "ftp", "http", "https", "netbios_ssn",
    "openssh", "smtp", "snmp", "sql_monitor", "syslog",
)

_PAPER_CATALOG = _DESK_CATALOG + (
    "ipp", "ms_sql_m", "netbios_dgm", "subroutine_caller", "terminal_server",
)

_OSES = ("linux", "windows", "solaris")
_PROCESSES = ("backup_agent", "inventory_agent", "remote_admin", "update_daemon")


def _house_exploits(include_extra: bool) -> tuple[ExploitDef, ...]:
    defs = [
        ExploitDef(0, "service", "openssh", 0.9, "root"),
        ExploitDef(1, "service", "ftp", 0.9, "user"),
        ExploitDef(2, "service", "https", 0.9, "user"),
        ExploitDef(3, "service", "sql_monitor", 0.9, "root"),
        ExploitDef(4, "service", "snmp", 0.9, "user"),
        ExploitDef(5, "service", "dhcp", 0.9, "root"),
    ]
    if include_extra:
        defs += [
            ExploitDef(6, "service", "http", 0.9, "user"),
            ExploitDef(7, "service", "netbios_ssn", 0.9, "user"),
            ExploitDef(8, "os", "windows", 0.9, "user"),
            ExploitDef(9, "process", "remote_admin", 0.9, "root"),
        ]
    return tuple(defs)


def generate_desk_scale(seed: int = 0) -> ScenarioConfig:
    """Small fixed-topology network: 24 hosts over 6 subnets.

    Subnet 0 is internet facing and holds the initial foothold.  Three
    value-bearing hosts sit behind a tree of firewalled subnets.  Every
    other host except the entry point carries honeyfiles, so careless
    encryption gets flagged quickly while scan-first play stays safe.
    Designed to be learnable in minutes on one core.
    """
    del seed  # layout is fully pinned; accepted for interface symmetry
    spec = {
        (0, 0): ("linux", ("http", "smtp", "ftp"), 0.0, False, False),
        (0, 1): ("linux", ("http", "smtp"), 0.0, True, False),
        (0, 2): ("windows", ("ftp", "syslog"), 0.0, True, False),
        (0, 3): ("linux", ("smtp", "syslog"), 0.0, True, False),
        (1, 0): ("windows", ("https", "http"), 0.0, True, False),
        (1, 1): ("linux", ("openssh", "https"), 0.0, True, False),
        (1, 2): ("linux", ("https", "syslog"), 0.0, True, False),
        (1, 3): ("windows", ("http", "netbios_ssn"), 0.0, True, False),
        (2, 0): ("linux", ("ftp", "netbios_ssn"), 0.0, True, False),
        (2, 1): ("windows", ("netbios_ssn", "syslog"), 0.0, True, False),
        (2, 2): ("linux", ("ftp", "http"), 0.0, True, False),
        (2, 3): ("windows", ("ftp", "syslog"), 0.0, True, False),
        (3, 0): ("linux", ("https", "http"), 0.0, True, False),
        (3, 1): ("windows", ("sql_monitor", "syslog"), 1000.0, False, True),
        (3, 2): ("linux", ("http", "smtp"), 0.0, True, False),
        (3, 3): ("windows", ("https", "smtp"), 0.0, True, False),
        (4, 0): ("linux", ("snmp", "syslog"), 0.0, True, False),
        (4, 1): ("windows", ("ftp", "http"), 0.0, True, False),
        (4, 2): ("linux", ("snmp", "ftp"), 1000.0, False, True),
        (4, 3): ("windows", ("ftp", "smtp"), 0.0, True, False),
        (5, 0): ("linux", ("dhcp", "directory_service"), 1000.0, False, True),
        (5, 1): ("linux", ("openssh", "http"), 0.0, True, False),
        (5, 2): ("windows", ("dhcp", "syslog"), 0.0, True, False),
        (5, 3): ("linux", ("http", "syslog"), 0.0, True, False),
    }
    hosts = tuple(
        HostConfig(addr, os, services, value=value,
                   has_honeyfiles=honey, sensitive=sens)
        for addr, (os, services, value, honey, sens) in spec.items()
    )
    firewall = (
        FirewallEdge((0, 1), ("openssh", "https")),
        FirewallEdge((0, 2), ("ftp", "netbios_ssn")),
        FirewallEdge((1, 3), ("sql_monitor", "https")),
        FirewallEdge((2, 4), ("snmp", "ftp")),
        FirewallEdge((3, 5), ("dhcp", "openssh")),
    )
    return ScenarioConfig(
        subnets=tuple(SubnetDef(i, public=(i == 0)) for i in range(6)),
        hosts=hosts,
        firewall=firewall,
        exploits=_house_exploits(include_extra=False),
        start_host=(0, 0),
        detect_prob=1.0,
        isolation_delay_s=1800.0,
        flag_threshold=2,
        max_steps=300,
    )


_PAPER_SUBNET_SIZES = {
    0: 5, 1: 5, 2: 5, 3: 5, 4: 5,
    5: 8, 6: 8, 7: 7, 8: 6, 9: 6, 10: 7, 11: 7, 12: 7, 13: 7, 14: 7,
    15: 16, 16: 8, 17: 7, 18: 7, 19: 7, 20: 7, 21: 5,
}

_PAPER_EDGES = (
    ((15, 5), ("http", "smtp")),
    ((15, 6), ("http", "ftp")),
    ((15, 12), ("ftp", "netbios_ssn")),
    ((15, 18), ("openssh", "https")),
    ((15, 19), ("https", "smtp")),
    ((15, 20), ("http", "snmp")),
    ((18, 7), ("http", "openssh")),
    ((18, 8), ("https", "openssh")),
    ((18, 9), ("ftp", "netbios_dgm")),
    ((18, 10), ("sql_monitor", "syslog")),
    ((18, 16), ("openssh", "http")),
    ((18, 21), ("dhcp", "ipp")),
    ((12, 11), ("snmp", "ftp")),
    ((12, 13), ("netbios_ssn", "http")),
    ((19, 14), ("smtp", "http")),
    ((20, 17), ("snmp", "http")),
    ((16, 17), ("http", "openssh")),
    ((10, 11), ("syslog", "snmp")),
    ((0, 1), ("http",)),
    ((1, 2), ("http",)),
    ((2, 3), ("http",)),
    ((3, 4), ("http",)),
)

# Fixed service loadouts for hosts that matter to the storyline: the entry
# point, the staging pivot and the five unprotected high-value targets.
_PAPER_PINNED_SERVICES = {
    (15, 12): ("http", "smtp", "ftp"),
    (15, 14): ("https", "smtp"),
    (18, 4): ("openssh", "http", "https", "ms_sql_m"),
    (16, 7): ("openssh", "syslog"),
    (8, 0): ("https", "terminal_server", "openssh"),
    (9, 0): ("netbios_dgm", "ftp"),
    (10, 5): ("sql_monitor", "syslog", "subroutine_caller"),
    (12, 0): ("netbios_ssn", "snmp", "ftp"),
    (21, 3): ("dhcp", "directory_service", "ipp"),
}

_PAPER_OPEN_SENSITIVE = ((8, 0), (9, 0), (10, 5), (12, 0), (21, 3))


def generate_paper_scale(seed: int = 0) -> ScenarioConfig:
    """Enterprise-sized network: 152 hosts over 22 subnets.

    The layout around the entry point (15, 12) and the high-value targets
    is fixed; filler hosts, the remaining sensitive machines and honeyfile
    placement are drawn deterministically from `seed`.  Five sensitive
    hosts are reachable and honeyfile-free; of the other nine, six are
    reachable but honeyfiled and three sit in subnets no firewall path
    reaches.
    """
    rng = np.random.RandomState(seed)
    addresses = [
        (sid, local)
        for sid in sorted(_PAPER_SUBNET_SIZES)
        for local in range(_PAPER_SUBNET_SIZES[sid])
    ]

    protected_pool = [(1, 1), (2, 2), (3, 3)]  # sensitive but unreachable
    reach_candidates = [
        (5, 2), (6, 3), (7, 1), (13, 2), (14, 4), (17, 2), (19, 3), (20, 1), (16, 2),
    ]
    extra_sensitive = protected_pool + [
        reach_candidates[i] for i in rng.choice(len(reach_candidates), 6, replace=False)
    ]
    sensitive = set(_PAPER_OPEN_SENSITIVE) | set(extra_sensitive)

    reachable_honeyfiled = [a for a in extra_sensitive if a not in protected_pool]
    blocked = sensitive | set(_PAPER_PINNED_SERVICES)
    filler_pool = [a for a in addresses if a not in blocked]
    picks = rng.choice(len(filler_pool), 23 - len(reachable_honeyfiled) - len(protected_pool), replace=False)
    honeyfiled = set(reachable_honeyfiled) | set(protected_pool) | {
        filler_pool[i] for i in picks
    }

    hosts = []
    for addr in addresses:
        if addr in _PAPER_PINNED_SERVICES:
            services = _PAPER_PINNED_SERVICES[addr]
        else:
            k = int(rng.randint(2, 5))
            idx = rng.choice(len(_PAPER_CATALOG), k, replace=False)
            services = tuple(sorted(_PAPER_CATALOG[i] for i in sorted(idx)))
        os = _OSES[int(rng.randint(0, len(_OSES)))]
        n_proc = int(rng.randint(0, 3))
        if n_proc:
            pidx = rng.choice(len(_PROCESSES), n_proc, replace=False)
            processes = tuple(sorted(_PROCESSES[i] for i in sorted(pidx)))
        else:
            processes = ()
        hosts.append(
            HostConfig(
                address=addr,
                os=os,
                services=services,
                processes=processes,
                value=1000.0 if addr in sensitive else 0.0,
                has_honeyfiles=addr in honeyfiled,
                sensitive=addr in sensitive,
            )
        )

    firewall = tuple(FirewallEdge(pair, svcs) for pair, svcs in _PAPER_EDGES)
    cfg = ScenarioConfig(
        subnets=tuple(
            SubnetDef(i, public=(i == 15)) for i in sorted(_PAPER_SUBNET_SIZES)
        ),
        hosts=tuple(hosts),
        firewall=firewall,
        exploits=_house_exploits(include_extra=True),
        start_host=(15, 12),
    )
    # every exploit target must exist somewhere; the random fillers make
    # windows/remote_admin overwhelmingly likely, but do not leave it to luck
    if "windows" not in cfg.os_catalog() or "remote_admin" not in cfg.process_catalog():
        patched = list(cfg.hosts)
        i = cfg.host_index((5, 0))
        patched[i] = dataclasses.replace(
            patched[i], os="windows",
            processes=tuple(sorted(set(patched[i].processes) | {"remote_admin"})),
        )
        cfg = dataclasses.replace(cfg, hosts=tuple(patched))
    return cfg


def random_scenario(
    seed: int,
    n_subnets: int = 3,
    hosts_per_subnet: tuple[int, int] = (2, 4),
    honeyfile_rate: float = 0.25,
    detect_prob: float = 0.8,
    max_steps: int = 80,
    isolation_delay_s: float = 3600.0,
    patch_timeout_s: float = 1800.0,
    flag_threshold: int = 3,
    rho: float = 1.0,
) -> ScenarioConfig:
    """Small randomized scenario for property tests.

    Chain topology over `n_subnets`, random services from the small
    catalog, exploits for six core services, honeyfiles sprinkled at
    `honeyfile_rate` (never on the start host).
    """
    rng = np.random.RandomState(seed)
    lo, hi = hosts_per_subnet
    sizes = [int(rng.randint(lo, hi + 1)) for _ in range(n_subnets)]
    hosts = []
    for sid, size in enumerate(sizes):
        for local in range(size):
            k = int(rng.randint(1, 4))
            idx = rng.choice(len(_DESK_CATALOG), k, replace=False)
            services = tuple(sorted(_DESK_CATALOG[i] for i in sorted(idx)))
            honey = bool(rng.random_sample() < honeyfile_rate) and (sid, local) != (0, 0)
            value = float(rng.choice([0.0, 0.0, 250.0, 1000.0]))
            hosts.append(
                HostConfig(
                    address=(sid, local),
                    os=_OSES[int(rng.randint(0, 2))],
                    services=services,
                    value=value,
                    has_honeyfiles=honey,
                    sensitive=value >= 1000.0,
                )
            )
    edges = []
    for sid in range(n_subnets - 1):
        idx = rng.choice(len(_DESK_CATALOG), 3, replace=False)
        edges.append(
            FirewallEdge((sid, sid + 1), tuple(sorted(_DESK_CATALOG[i] for i in idx)))
        )
    catalog_present = sorted({s for h in hosts for s in h.services})
    edges = [
        FirewallEdge(e.subnets, tuple(s for s in e.services if s in catalog_present)
                     or (catalog_present[0],))
        for e in edges
    ]
    exploits = tuple(
        e for e in _house_exploits(include_extra=False) if e.target in catalog_present
    )
    if not exploits:
        exploits = (ExploitDef(0, "service", catalog_present[0], 0.9, "user"),)
    return ScenarioConfig(
        subnets=tuple(SubnetDef(i, public=(i == 0)) for i in range(n_subnets)),
        hosts=tuple(hosts),
        firewall=tuple(edges),
        exploits=exploits,
        start_host=(0, 0),
        detect_prob=detect_prob,
        isolation_delay_s=isolation_delay_s,
        patch_timeout_s=patch_timeout_s,
        flag_threshold=flag_threshold,
        max_steps=max_steps,
        rho=rho,
    )
