use resilience_core::{FaultMode, FaultSpec};
use resilience_runtime::bench::{
    run_synthetic_distributed, run_synthetic_local, Mode, SyntheticDistributedConfig, SyntheticLocalConfig,
};
use resilience_runtime::locality::NetConfig;

fn local(mode: Mode, faults: FaultSpec) -> resilience_runtime::bench::RunOutcome {
    run_synthetic_local(&SyntheticLocalConfig {
        tasks: 400,
        grain_us: 5,
        cores: 4,
        mode,
        n: 3,
        faults,
    })
    .unwrap()
}

fn distributed(mode: Mode, faults: FaultSpec) -> resilience_runtime::bench::RunOutcome {
    run_synthetic_distributed(&SyntheticDistributedConfig {
        localities: 4,
        actions: 80,
        tasks_per_action: 4,
        grain_us: 5,
        cores: 1,
        mode,
        n: 3,
        faults,
        net: NetConfig::instant(),
    })
    .unwrap()
}

#[test]
fn counter_algebra_without_faults() {
    let none = local(Mode::None, FaultSpec::disabled());
    assert_eq!(none.report.tasks_launched, 400);
    for mode in Mode::ALL {
        let r = local(mode, FaultSpec::disabled());
        assert_eq!(r.report.failures, 0, "{mode}");
        assert_eq!(r.exhausted, 0);
        if mode.is_replicate() {
            assert_eq!(r.report.tasks_launched, 3 * none.report.tasks_launched, "{mode}");
            assert_eq!(r.report.replicas, 3 * r.report.tasks);
        } else {
            assert_eq!(r.report.tasks_launched, none.report.tasks_launched, "{mode}");
            assert_eq!(r.report.replays, 0);
        }
    }
}

#[test]
fn replays_are_bounded_and_recover() {
    let faults = FaultSpec::new(0.2).unwrap().with_seed(4);
    let r = local(Mode::Replay, faults);
    assert!(r.report.replays > 0);
    assert!(r.report.replays <= 2 * r.report.tasks);
    assert_eq!(r.report.tasks_launched, r.report.tasks + r.report.replays);
    assert_eq!(r.report.failures, r.report.replays + r.exhausted);
}

#[test]
fn corrupt_results_are_caught_by_validation() {
    let faults = FaultSpec::new(0.2).unwrap().with_mode(FaultMode::Corrupt).with_seed(5);
    let plain = local(Mode::Replay, faults.clone());
    assert_eq!(plain.report.replays, 0);
    let checked = local(Mode::ReplayValidate, faults.clone());
    assert_eq!(checked.validation_failures, checked.report.failures);
    assert!(checked.validation_failures > 0);
    let light = FaultSpec::new(0.05).unwrap().with_mode(FaultMode::Corrupt).with_seed(5);
    let voted = local(Mode::ReplicateVoteValidate, light);
    assert_eq!(voted.exhausted, 0);
    assert!(voted.validation_failures > 0);
}

#[test]
fn seeds_reproduce_counters() {
    let faults = FaultSpec::new(0.1).unwrap().with_seed(77);
    let a = local(Mode::ReplicateValidate, faults.clone());
    let b = local(Mode::ReplicateValidate, faults);
    let strip = |mut r: resilience_runtime::report::RunReport| {
        r.wall_time_s = 0.0;
        r
    };
    assert_eq!(strip(a.report), strip(b.report));
}

#[test]
fn distributed_replay_recovers_on_other_ranks() {
    let faults = FaultSpec::new(0.05).unwrap().with_faulty_localities([1]).with_seed(9);
    let r = distributed(Mode::Replay, faults);
    assert_eq!(r.exhausted, 0);
    assert!(r.report.remote_fallbacks > 0);
    assert_eq!(r.report.remote_invocations, r.report.tasks + r.report.remote_fallbacks);
    assert!(r.report.bytes_moved > 0);
}

#[test]
fn distributed_replicate_counts() {
    let r = distributed(Mode::ReplicateVote, FaultSpec::disabled());
    assert_eq!(r.report.replicas, 3 * r.report.tasks);
    assert_eq!(r.report.remote_invocations, 3 * r.report.tasks);
    let none = distributed(Mode::None, FaultSpec::disabled());
    assert_eq!(none.report.remote_invocations, none.report.tasks);
    assert_eq!(none.success_by_rank.iter().sum::<u64>(), 0);
}
