"""Define a scenario by hand, validate it, and round-trip it through JSON.

Run:  python3 demos/01_build_a_scenario.py
"""

import tempfile

from ransomsim.scenario import (
    ExploitDef,
    FirewallEdge,
    HostConfig,
    ScenarioConfig,
    SubnetDef,
    load_scenario,
    save_scenario,
    scenario_hash,
    validate_scenario,
)

office = ScenarioConfig(
    subnets=(SubnetDef(0, public=True), SubnetDef(1)),
    hosts=(
        HostConfig((0, 0), "linux", ("http", "smtp")),
        HostConfig((0, 1), "windows", ("ftp",), has_honeyfiles=True),
        HostConfig((1, 0), "linux", ("openssh", "syslog")),
        HostConfig((1, 1), "windows", ("sql_monitor",), value=1000.0,
                   sensitive=True),
    ),
    firewall=(FirewallEdge((0, 1), ("openssh", "sql_monitor")),),
    exploits=(
        ExploitDef(0, "service", "ftp", 0.9, "user"),
        ExploitDef(1, "service", "openssh", 0.9, "root"),
        ExploitDef(2, "service", "sql_monitor", 0.9, "root"),
    ),
    start_host=(0, 0),
)

report = validate_scenario(office)
print(report.summary())
print("hash:", scenario_hash(office))

# a broken variant: the entry point does not exist
broken = ScenarioConfig(
    subnets=office.subnets,
    hosts=office.hosts,
    firewall=office.firewall,
    exploits=office.exploits,
    start_host=(9, 9),
)
bad = validate_scenario(broken)
print("\nbroken variant:", bad.summary())
for f in bad.errors:
    print(f"  error [{f.field}] {f.message}")

with tempfile.NamedTemporaryFile(suffix=".json") as fh:
    save_scenario(office, fh.name)
    again = load_scenario(fh.name)
print("\nround trip preserved hash:", scenario_hash(again) == scenario_hash(office))
