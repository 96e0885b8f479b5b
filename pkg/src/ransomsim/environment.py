"""The attack MDP: lateral movement, encryption, and reactive defenses.

One environment wraps one immutable ScenarioConfig plus mutable per-episode
state.  The attacker picks a flat action index; the environment advances a
simulated wall clock, lets the defender react (patching idle footholds,
isolating encrypted machines, flagging honeyfile access), resolves the
action, and returns an observation restricted to attacker knowledge.

Action layout: every host owns a block of `3 + n_exploits` consecutive
indices: [subnet_scan, exploit_0 .. exploit_{E-1}, file_scan, encrypt].

Episode end: more than `flag_threshold` hosts isolated, `max_steps` steps
taken, or no valid action remains (every foothold lost).

Observation per host, all entries in [0, 1], zeroed until discovery:
subnet one-hot | local-id one-hot | discovered | OS one-hot | service
multi-hot | process multi-hot | found_honeyfiles | exploited | access/2 |
scanned | encrypted | isolated | revealed value/1000 | infection age |
encryption age (ages in hours, saturating at 1).  Whether a host carries
honeyfiles is never encoded; only their discovery is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scenario import (
    ACTION_KINDS,
    Address,
    ScenarioConfig,
    ScenarioValidationError,
    validate_scenario,
)

KIND_SUBNET_SCAN, KIND_EXPLOIT, KIND_FILE_SCAN, KIND_ENCRYPT = ACTION_KINDS

TERMINATION_REASONS = ("flag_threshold", "max_steps", "no_valid_actions")


def compute_reward(positive: float, penalty: float, rho: float) -> float:
    """Net reward of one action: gains minus risk-weighted detection penalty."""
    return float(positive) - float(rho) * float(penalty)


@dataclass(frozen=True)
class Action:
    """Symbolic form of one flat action index."""

    kind: str
    target: Address
    exploit_id: Optional[int] = None


@dataclass
class Observation:
    features: np.ndarray  # (obs_dim,) float64
    mask: np.ndarray      # (n_actions,) bool


@dataclass
class StepOutcome:
    observation: Observation
    reward: float
    done: bool
    info: dict


@dataclass
class EnvState:
    """Mutable per-episode arrays, indexed by host."""

    discovered: np.ndarray
    exploited: np.ndarray
    ever_exploited: np.ndarray
    scanned: np.ndarray
    value_revealed: np.ndarray
    encrypted: np.ndarray
    isolated: np.ndarray
    flagged: np.ndarray
    found_honeyfiles: np.ndarray
    access: np.ndarray           # 0 none, 1 user, 2 root
    infection_clock: np.ndarray  # clock value when foothold was gained
    encryption_clock: np.ndarray
    last_touch: np.ndarray
    rng: np.random.RandomState
    clock: float = 0.0
    step_count: int = 0
    terminated: bool = False
    termination_reason: str = ""

    def copy(self) -> "EnvState":
        rng = np.random.RandomState()
        rng.set_state(self.rng.get_state())
        return EnvState(
            discovered=self.discovered.copy(),
            exploited=self.exploited.copy(),
            ever_exploited=self.ever_exploited.copy(),
            scanned=self.scanned.copy(),
            value_revealed=self.value_revealed.copy(),
            encrypted=self.encrypted.copy(),
            isolated=self.isolated.copy(),
            flagged=self.flagged.copy(),
            found_honeyfiles=self.found_honeyfiles.copy(),
            access=self.access.copy(),
            infection_clock=self.infection_clock.copy(),
            encryption_clock=self.encryption_clock.copy(),
            last_touch=self.last_touch.copy(),
            rng=rng,
            clock=self.clock,
            step_count=self.step_count,
            terminated=self.terminated,
            termination_reason=self.termination_reason,
        )


class RansomwareEnv:
    """Simulates one ransomware campaign against a fixed scenario."""

    def __init__(self, cfg: ScenarioConfig, seed: int = 0):
        report = validate_scenario(cfg)
        if not report.ok:
            raise ScenarioValidationError(report)
        self.cfg = cfg
        self._build_tables()
        self.state: EnvState = None  # type: ignore[assignment]
        self.reset(seed)

    # -- static tables ------------------------------------------------------

    def _build_tables(self) -> None:
        cfg = self.cfg
        H = len(cfg.hosts)
        self.addresses: list[Address] = [tuple(h.address) for h in cfg.hosts]
        self._addr_to_idx = {a: i for i, a in enumerate(self.addresses)}
        self.start_index = self._addr_to_idx[tuple(cfg.start_host)]

        subnet_ids = sorted(s.id for s in cfg.subnets)
        self._subnet_slot = {sid: k for k, sid in enumerate(subnet_ids)}
        S = len(subnet_ids)
        self.subnet_of = np.array(
            [self._subnet_slot[h.address[0]] for h in cfg.hosts], dtype=np.int64
        )
        self.values = np.array([h.value for h in cfg.hosts], dtype=np.float64)
        self.has_honeyfiles = np.array(
            [h.has_honeyfiles for h in cfg.hosts], dtype=bool
        )

        self.exploit_slots = tuple(cfg.exploits)
        E = len(self.exploit_slots)
        self._exploit_slot_by_id = {e.id: j for j, e in enumerate(self.exploit_slots)}
        self.block = 3 + E
        self.n_actions = H * self.block
        # offset -> action kind index (order of ACTION_KINDS)
        self._offset_kind = np.empty(self.block, dtype=np.int64)
        self._offset_kind[0] = 0
        self._offset_kind[1:1 + E] = 1
        self._offset_kind[1 + E] = 2
        self._offset_kind[2 + E] = 3
        self._durations = np.array(
            [cfg.action_durations.of(k) for k in ACTION_KINDS], dtype=np.float64
        )[self._offset_kind]
        self.exploit_access = np.array(
            [2.0 if e.access == "root" else 1.0 for e in self.exploit_slots]
        )
        self.exploit_prob = np.array([e.success_prob for e in self.exploit_slots])

        risk = [cfg.penalties.host_risk(h.services) for h in cfg.hosts]
        self.penalty = np.array(
            [[cfg.penalties.penalty(k, r) for r in risk] for k in ACTION_KINDS]
        )  # (4, H)

        # exploit applicability: target service/os/process present on host
        self.match = np.zeros((H, E), dtype=bool)
        for j, e in enumerate(self.exploit_slots):
            for i, h in enumerate(cfg.hosts):
                if e.target_kind == "service":
                    self.match[i, j] = e.target in h.services
                elif e.target_kind == "os":
                    self.match[i, j] = e.target == h.os
                else:
                    self.match[i, j] = e.target in h.processes

        # adjacency and what a scan from subnet s reveals
        adj = np.eye(S, dtype=bool)
        edge_services: dict[tuple[int, int], set[str]] = {}
        for e in cfg.firewall:
            a, b = self._subnet_slot[e.subnets[0]], self._subnet_slot[e.subnets[1]]
            adj[a, b] = adj[b, a] = True
            edge_services[(a, b)] = edge_services[(b, a)] = set(e.services)
        self.scan_reveal = adj[:, self.subnet_of]  # (S, H)

        # cross_allowed[src, dst, e]: exploit e deliverable from a foothold in
        # src against a host in dst.  Same subnet: always (match still needed).
        # Across subnets: service exploits only, and the firewall edge must
        # allow the targeted service.
        self.cross_allowed = np.zeros((S, S, E), dtype=bool)
        for s in range(S):
            self.cross_allowed[s, s, :] = True
        for (a, b), services in edge_services.items():
            for j, e in enumerate(self.exploit_slots):
                if e.target_kind == "service" and e.target in services:
                    self.cross_allowed[a, b, j] = True

        # static observation block per host
        os_cat = cfg.os_catalog()
        svc_cat = cfg.service_catalog()
        proc_cat = cfg.process_catalog()
        max_local = max(h.address[1] for h in cfg.hosts)
        L = max_local + 1
        widths = [S, L, 1, len(os_cat), len(svc_cat), len(proc_cat)]
        self._static_width = sum(widths)
        self._runtime_cols = 9
        self.host_feature_width = self._static_width + self._runtime_cols
        self.obs_dim = H * self.host_feature_width
        self.static_rows = np.zeros((H, self._static_width), dtype=np.float64)
        os_idx = {n: i for i, n in enumerate(os_cat)}
        svc_idx = {n: i for i, n in enumerate(svc_cat)}
        proc_idx = {n: i for i, n in enumerate(proc_cat)}
        for i, h in enumerate(cfg.hosts):
            row = self.static_rows[i]
            off = 0
            row[self.subnet_of[i]] = 1.0
            off += S
            row[off + h.address[1]] = 1.0
            off += L
            row[off] = 1.0  # discovered bit, gated at encode time
            off += 1
            row[off + os_idx[h.os]] = 1.0
            off += len(os_cat)
            for s_ in h.services:
                row[off + svc_idx[s_]] = 1.0
            off += len(svc_cat)
            for p in h.processes:
                row[off + proc_idx[p]] = 1.0

    # -- lifecycle ----------------------------------------------------------

    @property
    def n_hosts(self) -> int:
        return len(self.addresses)

    @property
    def n_exploits(self) -> int:
        return len(self.exploit_slots)

    @property
    def terminated(self) -> bool:
        return self.state.terminated

    @property
    def termination_reason(self) -> str:
        return self.state.termination_reason

    @property
    def clock(self) -> float:
        return self.state.clock

    @property
    def step_count(self) -> int:
        return self.state.step_count

    @property
    def encrypted_count(self) -> int:
        return int(self.state.encrypted.sum())

    @property
    def compromised_count(self) -> int:
        return int(self.state.ever_exploited.sum())

    @property
    def isolated_count(self) -> int:
        return int(self.state.isolated.sum())

    @property
    def flagged_count(self) -> int:
        return int(self.state.flagged.sum())

    def reset(self, seed: Optional[int] = None) -> Observation:
        """Start a new episode.  Without a seed the RNG stream continues."""
        H = self.n_hosts
        if seed is not None:
            rng = np.random.RandomState(seed)
        elif self.state is not None:
            rng = self.state.rng
        else:
            rng = np.random.RandomState(0)
        st = EnvState(
            discovered=np.zeros(H, dtype=bool),
            exploited=np.zeros(H, dtype=bool),
            ever_exploited=np.zeros(H, dtype=bool),
            scanned=np.zeros(H, dtype=bool),
            value_revealed=np.zeros(H, dtype=bool),
            encrypted=np.zeros(H, dtype=bool),
            isolated=np.zeros(H, dtype=bool),
            flagged=np.zeros(H, dtype=bool),
            found_honeyfiles=np.zeros(H, dtype=bool),
            access=np.zeros(H, dtype=np.float64),
            infection_clock=np.zeros(H, dtype=np.float64),
            encryption_clock=np.zeros(H, dtype=np.float64),
            last_touch=np.zeros(H, dtype=np.float64),
            rng=rng,
        )
        i = self.start_index
        st.discovered[i] = True
        st.exploited[i] = True
        st.ever_exploited[i] = True
        st.access[i] = 1.0
        self.state = st
        self._mask_cache = self._mask_matrix()
        return self._observe()

    def snapshot(self) -> EnvState:
        return self.state.copy()

    def restore(self, snap: EnvState) -> None:
        self.state = snap.copy()
        self._mask_cache = self._mask_matrix()

    # -- actions ------------------------------------------------------------

    def index_to_action(self, index: int) -> Action:
        host, offset = divmod(int(index), self.block)
        if not 0 <= host < self.n_hosts:
            raise IndexError(f"action index {index} out of range")
        addr = self.addresses[host]
        E = self.n_exploits
        if offset == 0:
            return Action(KIND_SUBNET_SCAN, addr)
        if 1 <= offset <= E:
            return Action(KIND_EXPLOIT, addr, self.exploit_slots[offset - 1].id)
        if offset == E + 1:
            return Action(KIND_FILE_SCAN, addr)
        return Action(KIND_ENCRYPT, addr)

    def action_to_index(self, action: Action) -> int:
        host = self._addr_to_idx[tuple(action.target)]
        E = self.n_exploits
        if action.kind == KIND_SUBNET_SCAN:
            offset = 0
        elif action.kind == KIND_EXPLOIT:
            offset = 1 + self._exploit_slot_by_id[action.exploit_id]
        elif action.kind == KIND_FILE_SCAN:
            offset = E + 1
        elif action.kind == KIND_ENCRYPT:
            offset = E + 2
        else:
            raise ValueError(f"unknown action kind {action.kind!r}")
        return host * self.block + offset

    def _mask_matrix(self) -> np.ndarray:
        """Preconditions for every (host, offset) pair, as a bool matrix."""
        st = self.state
        E = self.n_exploits
        m = np.zeros((self.n_hosts, self.block), dtype=bool)
        if st.terminated:
            return m
        live = st.exploited & ~st.isolated
        m[:, 0] = live
        m[:, E + 1] = live
        m[:, E + 2] = live & ~st.encrypted
        if E:
            src = np.zeros(self.cross_allowed.shape[0], dtype=bool)
            src[np.unique(self.subnet_of[live])] = True
            # deliverable[dst_subnet, e] = any live foothold subnet allows e
            deliverable = np.einsum(
                "s,sde->de", src.astype(np.float64), self.cross_allowed
            ) > 0
            candidate = st.discovered & ~st.exploited & ~st.isolated
            m[:, 1:1 + E] = (
                candidate[:, None] & self.match & deliverable[self.subnet_of]
            )
        return m

    def action_mask(self) -> np.ndarray:
        """Flat validity mask aligned with action indices, freshly computed."""
        self._mask_cache = self._mask_matrix()
        return self._mask_cache.ravel().copy()

    # -- defenses -----------------------------------------------------------

    def apply_defenses(self) -> bool:
        """Run defender reactions at the current clock; returns True if the
        host state changed.  Also resolves termination."""
        changed = self._sweep_defenses()
        self._resolve_termination(include_dead_end=True)
        if self.state.terminated:
            self._mask_cache = np.zeros_like(self._mask_cache)
        return changed

    def _sweep_defenses(self) -> bool:
        st = self.state
        changed = False
        stale = (
            st.exploited
            & ~st.isolated
            & ((st.clock - st.last_touch) > self.cfg.patch_timeout_s)
        )
        if stale.any():
            st.exploited[stale] = False
            st.access[stale] = 0.0
            changed = True
        due = (
            st.encrypted
            & ~st.isolated
            & ((st.clock - st.encryption_clock) >= self.cfg.isolation_delay_s)
        )
        if due.any():
            st.isolated[due] = True
            changed = True
        return changed

    def _resolve_termination(self, include_dead_end: bool) -> None:
        st = self.state
        if st.terminated:
            return
        if int(st.isolated.sum()) > self.cfg.flag_threshold:
            st.terminated = True
            st.termination_reason = "flag_threshold"
        elif st.step_count >= self.cfg.max_steps:
            st.terminated = True
            st.termination_reason = "max_steps"
        elif include_dead_end:
            self._mask_cache = self._mask_matrix()
            if not self._mask_cache.any():
                st.terminated = True
                st.termination_reason = "no_valid_actions"

    # -- the step -----------------------------------------------------------

    def step(self, action_index: int) -> StepOutcome:
        st = self.state
        if st.terminated:
            raise ValueError("episode is over; call reset()")
        if not 0 <= int(action_index) < self.n_actions:
            raise IndexError(f"action index {action_index} out of range")
        action_index = int(action_index)
        host, offset = divmod(action_index, self.block)
        pre_valid = bool(self._mask_cache[host, offset])

        st.clock += self._durations[offset]
        st.step_count += 1
        defenses_changed = self._sweep_defenses()
        defense_stop = int(st.isolated.sum()) > self.cfg.flag_threshold
        if defenses_changed:
            self._mask_cache = self._mask_matrix()

        positive = 0.0
        success = False
        newly = 0
        if pre_valid and not defense_stop and self._mask_cache[host, offset]:
            positive, success, newly = self._execute(host, offset)
            if success:
                # defenses see the outcome at the same clock (matters only
                # for isolation delays shorter than the action's duration)
                self._sweep_defenses()
                self._mask_cache = self._mask_matrix()

        self._resolve_termination(include_dead_end=True)
        if st.terminated:
            self._mask_cache = np.zeros_like(self._mask_cache)

        kind = ACTION_KINDS[int(self._offset_kind[offset])]
        reward = compute_reward(positive, self.penalty[self._offset_kind[offset], host], self.cfg.rho)
        info = {
            "success": success,
            "kind": kind,
            "target": self.addresses[host],
            "clock": float(st.clock),
            "newly_discovered": newly,
        }
        return StepOutcome(self._observe(), reward, st.terminated, info)

    def _execute(self, host: int, offset: int) -> tuple[float, bool, int]:
        st = self.state
        cfg = self.cfg
        E = self.n_exploits
        if offset == 0:  # subnet_scan
            reveal = self.scan_reveal[self.subnet_of[host]]
            new = reveal & ~st.discovered
            n = int(new.sum())
            st.discovered |= reveal
            st.last_touch[host] = st.clock
            return cfg.rewards.discover * n, True, n
        if 1 <= offset <= E:  # exploit
            j = offset - 1
            if st.rng.random_sample() < self.exploit_prob[j]:
                st.exploited[host] = True
                st.ever_exploited[host] = True
                st.access[host] = self.exploit_access[j]
                st.infection_clock[host] = st.clock
                st.last_touch[host] = st.clock
                return cfg.rewards.exploit, True, 0
            return 0.0, False, 0
        if offset == E + 1:  # file_scan
            st.scanned[host] = True
            st.value_revealed[host] = True
            if self.has_honeyfiles[host] and not st.found_honeyfiles[host]:
                if st.rng.random_sample() < cfg.detect_prob:
                    st.found_honeyfiles[host] = True
            st.last_touch[host] = st.clock
            return 0.0, True, 0
        # encrypt
        if self.has_honeyfiles[host] and not st.found_honeyfiles[host]:
            st.flagged[host] = True
            st.isolated[host] = True
            return 0.0, False, 0
        st.encrypted[host] = True
        st.encryption_clock[host] = st.clock
        st.last_touch[host] = st.clock
        return cfg.rewards.encrypt + self.values[host], True, 0

    # -- observation --------------------------------------------------------

    def encode_observation(self) -> np.ndarray:
        """Flattened per-host feature matrix; attacker-visible state only."""
        st = self.state
        H = self.n_hosts
        feat = np.zeros((H, self.host_feature_width), dtype=np.float64)
        disc = st.discovered
        feat[disc, : self._static_width] = self.static_rows[disc]
        c = self._static_width
        feat[:, c + 0] = st.found_honeyfiles
        feat[:, c + 1] = st.exploited
        feat[:, c + 2] = st.access / 2.0
        feat[:, c + 3] = st.scanned
        feat[:, c + 4] = st.encrypted
        feat[:, c + 5] = st.isolated
        feat[:, c + 6] = np.where(
            st.value_revealed, np.minimum(self.values / 1000.0, 1.0), 0.0
        )
        feat[:, c + 7] = np.where(
            st.exploited,
            np.minimum((st.clock - st.infection_clock) / 3600.0, 1.0),
            0.0,
        )
        feat[:, c + 8] = np.where(
            st.encrypted,
            np.minimum((st.clock - st.encryption_clock) / 3600.0, 1.0),
            0.0,
        )
        return feat.ravel()

    def _observe(self) -> Observation:
        return Observation(self.encode_observation(), self._mask_cache.ravel().copy())
