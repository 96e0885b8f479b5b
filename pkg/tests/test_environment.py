import numpy as np
import pytest

from ransomsim import scenario as sc
from ransomsim.environment import (
    Action,
    RansomwareEnv,
    compute_reward,
)


def mini_cfg(**over):
    """One public subnet feeding a private one; fully pinned services."""
    hosts = (
        sc.HostConfig((0, 0), "linux", ("http",)),
        sc.HostConfig((0, 1), "linux", ("ftp", "http")),
        sc.HostConfig((0, 2), "windows", ("http", "syslog"), value=250.0),
        sc.HostConfig((1, 0), "linux", ("openssh",), value=1000.0, sensitive=True),
        sc.HostConfig((1, 1), "windows", ("sql_monitor",), has_honeyfiles=True),
    )
    base = dict(
        subnets=(sc.SubnetDef(0, public=True), sc.SubnetDef(1)),
        hosts=hosts,
        firewall=(sc.FirewallEdge((0, 1), ("openssh", "sql_monitor")),),
        exploits=(
            sc.ExploitDef(0, "service", "ftp", 1.0, "user"),
            sc.ExploitDef(1, "service", "openssh", 1.0, "root"),
            sc.ExploitDef(2, "service", "sql_monitor", 1.0, "root"),
            sc.ExploitDef(3, "os", "windows", 1.0, "user"),
        ),
        start_host=(0, 0),
        detect_prob=1.0,
        max_steps=50,
    )
    base.update(over)
    return sc.ScenarioConfig(**base)


def act(env, kind, target, exploit_id=None):
    return env.step(env.action_to_index(Action(kind, target, exploit_id)))


def run_from_start(env):
    """Scan, then exploit (0,1) so later steps have a second foothold."""
    act(env, "subnet_scan", (0, 0))
    act(env, "exploit", (0, 1), 0)


def test_reset_state_and_valid_actions():
    env = RansomwareEnv(mini_cfg(), seed=3)
    obs = env.reset(seed=3)
    assert env.compromised_count == 1
    assert env.encrypted_count == 0
    valid = [env.index_to_action(i) for i in np.flatnonzero(obs.mask)]
    kinds = {(a.kind, a.target) for a in valid}
    assert kinds == {
        ("subnet_scan", (0, 0)),
        ("file_scan", (0, 0)),
        ("encrypt", (0, 0)),
    }
    assert obs.features.shape == (env.obs_dim,)
    assert obs.features.min() >= 0.0 and obs.features.max() <= 1.0


def test_reset_same_seed_identical():
    env = RansomwareEnv(mini_cfg(), seed=0)
    a = env.reset(seed=42)
    b = env.reset(seed=42)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.mask, b.mask)


def test_reward_arithmetic_function():
    assert compute_reward(1050.0, 3.0, 1.0) == 1047.0
    assert compute_reward(40.0, 1.0, 20.0) == 20.0
    assert compute_reward(0.0, 4.0, 5.0) == -20.0


def test_encrypt_reward_example():
    # low-risk host worth 1000, rho=1: 50 + 1000 - 3 = 1047
    cfg = mini_cfg(
        hosts=(
            sc.HostConfig((0, 0), "linux", ("http",), value=1000.0),
            sc.HostConfig((0, 1), "linux", ("ftp",)),
            sc.HostConfig((1, 0), "linux", ("openssh",)),
            sc.HostConfig((1, 1), "windows", ("sql_monitor",)),
        ),
    )
    env = RansomwareEnv(cfg, seed=0)
    out = act(env, "encrypt", (0, 0))
    assert out.reward == 1047.0
    assert out.info["success"] is True


def test_subnet_scan_reward_example():
    # 4 fresh hosts at rho=20 with penalty 1: 4*10 - 20*1 = 20
    hosts = tuple(
        sc.HostConfig((0, i), "linux", ("http",)) for i in range(5)
    )
    cfg = mini_cfg(
        hosts=hosts,
        subnets=(sc.SubnetDef(0, public=True),),
        firewall=(),
        exploits=(sc.ExploitDef(0, "service", "http", 1.0, "user"),),
        rho=20.0,
    )
    env = RansomwareEnv(cfg, seed=0)
    out = act(env, "subnet_scan", (0, 0))
    assert out.info["newly_discovered"] == 4
    assert out.reward == 20.0
    # rescanning discovers nothing and nets a pure penalty
    out2 = act(env, "subnet_scan", (0, 0))
    assert out2.info["newly_discovered"] == 0
    assert out2.reward == -20.0


def test_clock_accumulates_pinned_durations():
    env = RansomwareEnv(mini_cfg(), seed=1)
    act(env, "subnet_scan", (0, 0))          # 30
    act(env, "exploit", (0, 1), 0)           # 10
    act(env, "file_scan", (0, 1))            # 60
    out = act(env, "encrypt", (0, 1))        # 300
    assert env.clock == 400.0
    assert out.info["clock"] == 400.0
    assert env.step_count == 4


def test_exploit_grants_access_and_reward():
    env = RansomwareEnv(mini_cfg(), seed=5)
    act(env, "subnet_scan", (0, 0))
    out = act(env, "exploit", (0, 1), 0)
    h = env.cfg.host_index((0, 1))
    assert out.info["success"] is True
    assert out.reward == 10.0 - 3.0  # medium-risk host (ftp)
    assert env.state.exploited[h]
    assert env.state.access[h] == 1.0
    out_root = act(env, "exploit", (1, 0), 1)
    h2 = env.cfg.host_index((1, 0))
    assert env.state.access[h2] == 2.0


def test_cross_subnet_exploit_requires_edge_service():
    # edge only allows openssh and sql_monitor; ftp exploit cannot cross
    cfg = mini_cfg(
        hosts=(
            sc.HostConfig((0, 0), "linux", ("http",)),
            sc.HostConfig((1, 0), "linux", ("ftp", "openssh")),
            sc.HostConfig((1, 1), "windows", ("sql_monitor",)),
            sc.HostConfig((0, 1), "linux", ("ftp",)),
        ),
    )
    env = RansomwareEnv(cfg, seed=0)
    act(env, "subnet_scan", (0, 0))
    mask = env.action_mask()
    ftp_cross = env.action_to_index(Action("exploit", (1, 0), 0))
    ssh_cross = env.action_to_index(Action("exploit", (1, 0), 1))
    ftp_local = env.action_to_index(Action("exploit", (0, 1), 0))
    assert not mask[ftp_cross]
    assert mask[ssh_cross]
    assert mask[ftp_local]


def test_os_exploit_is_same_subnet_only():
    env = RansomwareEnv(mini_cfg(), seed=0)
    act(env, "subnet_scan", (0, 0))
    mask = env.action_mask()
    os_local = env.action_to_index(Action("exploit", (0, 2), 3))
    os_cross = env.action_to_index(Action("exploit", (1, 1), 3))
    assert mask[os_local]
    assert not mask[os_cross]


def test_honeyfile_encrypt_flags_and_isolates():
    env = RansomwareEnv(mini_cfg(), seed=0)
    run_from_start(env)
    act(env, "exploit", (1, 1), 2)
    h = env.cfg.host_index((1, 1))
    out = act(env, "encrypt", (1, 1))
    assert out.info["success"] is False
    assert out.reward == -6.0  # encrypt penalty, high-risk host, no gain
    assert env.state.flagged[h]
    assert env.state.isolated[h]
    assert not env.state.encrypted[h]


def test_honeyfile_found_first_makes_encrypt_safe():
    env = RansomwareEnv(mini_cfg(), seed=0)  # detect_prob = 1
    run_from_start(env)
    act(env, "exploit", (1, 1), 2)
    h = env.cfg.host_index((1, 1))
    out = act(env, "file_scan", (1, 1))
    assert env.state.found_honeyfiles[h]
    out = act(env, "encrypt", (1, 1))
    assert out.info["success"] is True
    assert env.state.encrypted[h]
    assert not env.state.flagged[h]


def test_detect_prob_zero_never_finds():
    env = RansomwareEnv(mini_cfg(detect_prob=0.0), seed=0)
    run_from_start(env)
    act(env, "exploit", (1, 1), 2)
    h = env.cfg.host_index((1, 1))
    for _ in range(5):
        act(env, "file_scan", (1, 1))
    assert not env.state.found_honeyfiles[h]
    assert env.state.scanned[h]


def test_file_scan_reveals_value_in_observation():
    env = RansomwareEnv(mini_cfg(), seed=0)
    run_from_start(env)
    act(env, "exploit", (1, 0), 1)
    h = env.cfg.host_index((1, 0))
    col = env._static_width + 6
    obs_before = env.encode_observation().reshape(env.n_hosts, -1)
    assert obs_before[h, col] == 0.0
    act(env, "file_scan", (1, 0))
    obs_after = env.encode_observation().reshape(env.n_hosts, -1)
    assert obs_after[h, col] == 1.0  # 1000 / 1000


def test_undiscovered_hosts_encode_to_zero():
    env = RansomwareEnv(mini_cfg(), seed=0)
    feat = env.encode_observation().reshape(env.n_hosts, -1)
    for i in range(env.n_hosts):
        if i != env.start_index:
            assert not feat[i].any()
    assert feat[env.start_index].any()


def test_honeyfile_presence_is_hidden():
    plain = mini_cfg(detect_prob=0.0)
    hosts = list(plain.hosts)
    idx = next(i for i, h in enumerate(hosts) if h.has_honeyfiles)
    import dataclasses
    stripped = dataclasses.replace(
        plain, hosts=tuple(
            dataclasses.replace(h, has_honeyfiles=False) for h in hosts
        )
    )
    env_a = RansomwareEnv(plain, seed=9)
    env_b = RansomwareEnv(stripped, seed=9)
    seq = [("subnet_scan", (0, 0), None), ("exploit", (0, 1), 0),
           ("exploit", (1, 1), 2), ("file_scan", (1, 1), None)]
    for kind, target, ex in seq:
        oa = act(env_a, kind, target, ex)
        ob = act(env_b, kind, target, ex)
        assert np.array_equal(oa.observation.features, ob.observation.features)
        assert np.array_equal(oa.observation.mask, ob.observation.mask)


def test_patch_timeout_drops_idle_foothold():
    cfg = mini_cfg(patch_timeout_s=100.0)
    env = RansomwareEnv(cfg, seed=0)
    run_from_start(env)
    h = env.cfg.host_index((0, 1))
    assert env.state.exploited[h]
    # burn clock on the start host; (0,1) goes idle past 100s
    act(env, "file_scan", (0, 0))
    act(env, "file_scan", (0, 0))
    assert not env.state.exploited[h]
    assert env.state.access[h] == 0.0
    assert env.state.ever_exploited[h]
    # the mask lets the attacker re-exploit the patched host
    mask = env.action_mask()
    assert mask[env.action_to_index(Action("exploit", (0, 1), 0))]
    # but the start host is gone too once it idles; here the start host was
    # touched by the file scans so it is still alive
    assert env.state.exploited[env.start_index]


def test_patch_timeout_spares_isolated_hosts():
    cfg = mini_cfg(patch_timeout_s=400.0, isolation_delay_s=0.0)
    env = RansomwareEnv(cfg, seed=0)
    run_from_start(env)
    h = env.cfg.host_index((0, 1))
    act(env, "encrypt", (0, 1))  # lands at clock 340, isolated immediately
    assert env.state.isolated[h]
    assert env.state.exploited[h]
    # idle (0,1) far past the patch timeout; isolation freezes its state
    for _ in range(8):
        act(env, "file_scan", (0, 0))
    assert env.clock - env.state.last_touch[h] > 400.0
    assert env.state.exploited[h]
    assert env.state.isolated[h]


def test_patch_loss_mid_action_fizzles_encrypt():
    # the 300s encrypt outlives the 50s patch timeout, so the foothold is
    # patched away mid-action and the encrypt comes back empty
    cfg = mini_cfg(patch_timeout_s=50.0)
    env = RansomwareEnv(cfg, seed=0)
    run_from_start(env)
    h = env.cfg.host_index((0, 1))
    out = act(env, "encrypt", (0, 1))
    assert out.info["success"] is False
    assert out.reward == -5.0  # medium-risk encrypt penalty, no gain
    assert not env.state.encrypted[h]
    assert not env.state.exploited[h]
    # every foothold was patched away, so the episode dead-ends
    assert out.done and env.termination_reason == "no_valid_actions"


def test_delayed_isolation_fires_at_threshold():
    cfg = mini_cfg(isolation_delay_s=350.0)
    env = RansomwareEnv(cfg, seed=0)
    run_from_start(env)
    h = env.cfg.host_index((0, 1))
    act(env, "encrypt", (0, 1))          # clock 340
    assert not env.state.isolated[h]
    act(env, "file_scan", (0, 0))        # clock 400; age 60 < 350
    assert not env.state.isolated[h]
    act(env, "encrypt", (0, 0))          # clock 700; age 360 >= 350
    assert env.state.isolated[h]


def test_isolated_host_state_is_frozen():
    cfg = mini_cfg(isolation_delay_s=0.0)
    env = RansomwareEnv(cfg, seed=0)
    run_from_start(env)
    h = env.cfg.host_index((0, 1))
    act(env, "encrypt", (0, 1))
    assert env.state.isolated[h]
    before = {
        k: getattr(env.state, k)[h]
        for k in ("discovered", "exploited", "scanned", "encrypted", "access")
    }
    mask = env.action_mask().reshape(env.n_hosts, env.block)
    assert not mask[h].any()
    act(env, "file_scan", (0, 0))
    act(env, "subnet_scan", (0, 0))
    after = {
        k: getattr(env.state, k)[h]
        for k in ("discovered", "exploited", "scanned", "encrypted", "access")
    }
    assert before == after


def test_flag_threshold_terminates():
    hosts = (
        sc.HostConfig((0, 0), "linux", ("http",)),
        sc.HostConfig((0, 1), "linux", ("ftp",), has_honeyfiles=True),
        sc.HostConfig((0, 2), "linux", ("ftp",), has_honeyfiles=True),
    )
    cfg = mini_cfg(
        hosts=hosts, subnets=(sc.SubnetDef(0, public=True),), firewall=(),
        exploits=(sc.ExploitDef(0, "service", "ftp", 1.0, "user"),),
        flag_threshold=1, detect_prob=0.0,
    )
    env = RansomwareEnv(cfg, seed=0)
    act(env, "subnet_scan", (0, 0))
    act(env, "exploit", (0, 1), 0)
    act(env, "exploit", (0, 2), 0)
    out = act(env, "encrypt", (0, 1))
    assert not out.done  # one isolation == threshold, not above it
    out = act(env, "encrypt", (0, 2))
    assert out.done
    assert env.termination_reason == "flag_threshold"
    assert not out.observation.mask.any()
    with pytest.raises(ValueError):
        act(env, "file_scan", (0, 0))


def test_max_steps_terminates():
    env = RansomwareEnv(mini_cfg(max_steps=3), seed=0)
    act(env, "file_scan", (0, 0))
    act(env, "file_scan", (0, 0))
    out = act(env, "file_scan", (0, 0))
    assert out.done
    assert env.termination_reason == "max_steps"


def test_dead_end_terminates():
    hosts = (
        sc.HostConfig((0, 0), "linux", ("http",), has_honeyfiles=True),
        sc.HostConfig((0, 1), "linux", ("ftp",)),
    )
    cfg = mini_cfg(
        hosts=hosts, subnets=(sc.SubnetDef(0, public=True),), firewall=(),
        exploits=(sc.ExploitDef(0, "service", "ftp", 1.0, "user"),),
        detect_prob=0.0,
    )
    env = RansomwareEnv(cfg, seed=0)
    out = act(env, "encrypt", (0, 0))  # start host flagged; no foothold left
    assert out.done
    assert env.termination_reason == "no_valid_actions"
    assert env.isolated_count == 1


def test_action_codec_bijection():
    env = RansomwareEnv(mini_cfg(), seed=0)
    for i in range(env.n_actions):
        a = env.index_to_action(i)
        assert env.action_to_index(a) == i
    with pytest.raises(IndexError):
        env.step(env.n_actions)
    with pytest.raises(IndexError):
        env.step(-1)


def test_step_determinism_same_seed():
    cfg = sc.random_scenario(11, detect_prob=0.5)
    rng = np.random.RandomState(4)
    seqs = []
    for _ in range(2):
        env = RansomwareEnv(cfg, seed=77)
        trace = []
        obs = env.reset(seed=77)
        pick = np.random.RandomState(5)
        for _ in range(40):
            valid = np.flatnonzero(obs.mask)
            if valid.size == 0:
                break
            a = int(valid[pick.randint(valid.size)])
            out = env.step(a)
            trace.append((a, out.reward, out.done, tuple(out.observation.features)))
            obs = out.observation
            if out.done:
                break
        seqs.append(trace)
    assert seqs[0] == seqs[1]


# --- independent mask oracle ------------------------------------------------

def oracle_mask(cfg, env):
    """Recompute action validity from the raw config and state flags."""
    st = env.state
    E = len(cfg.exploits)
    block = 3 + E
    mask = np.zeros(len(cfg.hosts) * block, dtype=bool)
    if st.terminated:
        return mask
    edges = {}
    for e in cfg.firewall:
        a, b = e.subnets
        edges.setdefault((a, b), set()).update(e.services)
        edges.setdefault((b, a), set()).update(e.services)
    live = [
        i for i in range(len(cfg.hosts))
        if st.exploited[i] and not st.isolated[i]
    ]
    live_subnets = {cfg.hosts[i].address[0] for i in live}
    for i, h in enumerate(cfg.hosts):
        base = i * block
        alive = bool(st.exploited[i]) and not bool(st.isolated[i])
        mask[base] = alive
        mask[base + E + 1] = alive
        mask[base + E + 2] = alive and not bool(st.encrypted[i])
        if not (st.discovered[i] and not st.exploited[i] and not st.isolated[i]):
            continue
        for j, ex in enumerate(cfg.exploits):
            if ex.target_kind == "service":
                present = ex.target in h.services
            elif ex.target_kind == "os":
                present = ex.target == h.os
            else:
                present = ex.target in h.processes
            if not present:
                continue
            ok = False
            for s in live_subnets:
                if s == h.address[0]:
                    ok = True
                    break
                if ex.target_kind == "service" and ex.target in edges.get(
                    (s, h.address[0]), set()
                ):
                    ok = True
                    break
            mask[base + 1 + j] = ok
    return mask


def test_mask_matches_oracle_over_random_rollouts():
    pick = np.random.RandomState(123)
    for seed in range(12):
        cfg = sc.random_scenario(
            seed, n_subnets=3, honeyfile_rate=0.3, max_steps=40,
            isolation_delay_s=300.0, patch_timeout_s=200.0, flag_threshold=2,
        )
        env = RansomwareEnv(cfg, seed=seed)
        obs = env.reset(seed=seed)
        for _ in range(40):
            assert np.array_equal(obs.mask, oracle_mask(cfg, env))
            valid = np.flatnonzero(obs.mask)
            if valid.size == 0:
                assert env.terminated
                break
            out = env.step(int(valid[pick.randint(valid.size)]))
            obs = out.observation
            if out.done:
                assert np.array_equal(obs.mask, oracle_mask(cfg, env))
                break


def test_latched_flags_never_revert():
    latched = ("discovered", "ever_exploited", "scanned", "value_revealed",
               "found_honeyfiles", "flagged", "isolated", "encrypted")
    pick = np.random.RandomState(9)
    for seed in range(8):
        cfg = sc.random_scenario(seed, honeyfile_rate=0.3, max_steps=60,
                                 isolation_delay_s=200.0)
        env = RansomwareEnv(cfg, seed=seed)
        obs = env.reset(seed=seed)
        prev = {k: getattr(env.state, k).copy() for k in latched}
        for _ in range(60):
            valid = np.flatnonzero(obs.mask)
            if valid.size == 0:
                break
            out = env.step(int(valid[pick.randint(valid.size)]))
            obs = out.observation
            for k in latched:
                cur = getattr(env.state, k)
                assert (cur | prev[k] == cur).all(), k
                prev[k] = cur.copy()
            if out.done:
                break


def test_observation_bounds_always_hold():
    pick = np.random.RandomState(31)
    for seed in range(6):
        cfg = sc.random_scenario(seed, max_steps=50)
        env = RansomwareEnv(cfg, seed=seed)
        obs = env.reset(seed=seed)
        for _ in range(50):
            assert obs.features.min() >= 0.0
            assert obs.features.max() <= 1.0
            valid = np.flatnonzero(obs.mask)
            if valid.size == 0:
                break
            obs = env.step(int(valid[pick.randint(valid.size)])).observation


def test_snapshot_restore_round_trip():
    env = RansomwareEnv(mini_cfg(), seed=0)
    run_from_start(env)
    snap = env.snapshot()
    before_mask = env.action_mask().copy()
    act(env, "encrypt", (0, 1))
    act(env, "file_scan", (0, 0))
    env.restore(snap)
    assert np.array_equal(env.action_mask(), before_mask)
    out = act(env, "encrypt", (0, 1))  # same action replays identically
    assert out.info["success"] is True
    assert env.clock == snap.clock + 300.0
