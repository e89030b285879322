use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use resilience_core::{make_backup_lists, majority_vote, LocalityId, ResilienceErrorKind, TaskError};
use resilience_runtime::distributed::*;
use resilience_runtime::engine::{current_attempt, current_pool_tag, PoolConfig};
use resilience_runtime::local::async_replay;
use resilience_runtime::locality::{spawn_localities, NetConfig, Simulation};

struct Fixture {
    sim: Simulation,
    invoked: Arc<Mutex<Vec<LocalityId>>>,
    executions: Arc<AtomicU32>,
}

/// Ranks in `failing` raise on "work"; rank 1 returns a corrupted value on "value".
fn fixture(k: usize, failing: &'static [LocalityId]) -> Fixture {
    let invoked = Arc::new(Mutex::new(Vec::new()));
    let executions = Arc::new(AtomicU32::new(0));
    let mut b = spawn_localities(k, PoolConfig::new(2).unwrap(), NetConfig::instant()).unwrap();
    b.register_action("univ_ans", |_, (): ()| Ok(42i64)).unwrap();
    {
        let (invoked, executions) = (invoked.clone(), executions.clone());
        b.register_action("work", move |loc, (x,): (i64,)| {
            invoked.lock().unwrap().push(loc.rank());
            executions.fetch_add(1, Ordering::SeqCst);
            if failing.contains(&loc.rank()) {
                Err(TaskError::failed(loc.rank(), "scripted failure"))
            } else {
                Ok(x + i64::from(loc.rank()) * 1000)
            }
        })
        .unwrap();
    }
    b.register_action("value", |loc, (x,): (i64,)| Ok(if loc.rank() == 1 { x ^ 0x40 } else { x }))
        .unwrap();
    b.register_action("seven_seven_nine", |loc, (): ()| Ok([7i64, 7, 9][loc.rank() as usize % 3]))
        .unwrap();
    b.register_async_action("nested", |loc, (x,): (i64,)| {
        async_replay(
            loc.pool(),
            3,
            |x: i64| if current_attempt() < 3 { Err(TaskError::failed(1, "local")) } else { Ok(x) },
            x,
        )
    })
    .unwrap();
    Fixture {
        sim: b.start().unwrap(),
        invoked,
        executions,
    }
}

#[test]
fn replay_single_locality_list() {
    let f = fixture(4, &[]);
    let r: Result<i64, _> = distributed_replay(&f.sim.locality(0), &[0], "univ_ans", &()).get();
    assert_eq!(r, Ok(42));
}

#[test]
fn replay_moves_past_a_failing_rank() {
    let f = fixture(4, &[1]);
    let r: Result<i64, _> = distributed_replay(&f.sim.locality(0), &[1, 2, 3], "work", &(5i64,)).get();
    assert_eq!(r, Ok(2005));
    assert_eq!(*f.invoked.lock().unwrap(), vec![1, 2]);
    let st = f.sim.stats();
    assert_eq!(st.remote_invocations, 2);
    assert_eq!(st.remote_fallbacks, 1);
    assert_eq!(st.success_by_rank, vec![0, 0, 1, 0]);
}

#[test]
fn replay_exhaustion_reports_the_last_failure() {
    let f = fixture(4, &[1, 2]);
    let r: Result<i64, _> = distributed_replay(&f.sim.locality(0), &[1, 2], "work", &(5i64,)).get();
    match r {
        Err(TaskError::Resilience(e)) => {
            assert_eq!(e.attempts, 2);
            assert_eq!(e.last_exception(), Some(&TaskError::failed(2, "scripted failure")));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(f.sim.stats().remote_invocations, 2);
}

#[test]
fn replay_visits_ranks_in_list_order_including_repeats() {
    let f = fixture(4, &[0, 1, 2, 3]);
    let ids = [3, 1, 1, 0, 2];
    let r: Result<i64, _> = distributed_replay(&f.sim.locality(2), &ids, "work", &(0i64,)).get();
    assert!(r.is_err());
    assert_eq!(*f.invoked.lock().unwrap(), ids.to_vec());
}

#[test]
fn validation_runs_on_the_caller() {
    let f = fixture(4, &[]);
    let seen = Arc::new(Mutex::new(Vec::new()));
    let s = seen.clone();
    let validate = move |v: &i64| {
        s.lock().unwrap().push(current_pool_tag());
        *v % 1000 == 1 && *v >= 2000
    };
    let r: Result<i64, _> =
        distributed_replay_validate(&f.sim.locality(3), &[0, 1, 2], validate, "work", &(1i64,)).get();
    assert_eq!(r, Ok(2001));
    assert_eq!(*seen.lock().unwrap(), vec![Some(3); 3]);
    assert_eq!(f.sim.stats().validation_failures, 2);

    let seen = Arc::new(Mutex::new(Vec::new()));
    let s = seen.clone();
    let validate = move |_: &i64| {
        s.lock().unwrap().push(current_pool_tag());
        true
    };
    let _: i64 = distributed_replicate_validate(&f.sim.locality(1), &[0, 2, 3], validate, "work", &(1i64,))
        .get()
        .unwrap();
    f.sim.shutdown();
    assert!(seen.lock().unwrap().iter().all(|t| *t == Some(1)));
}

#[test]
fn replicate_pure_action_equals_single_invoke() {
    let f = fixture(3, &[]);
    let caller = f.sim.locality(0);
    let single: i64 = caller.remote_invoke(2, "univ_ans", &()).get().unwrap();
    let rep: i64 = distributed_replicate(&caller, &[0, 1, 2], "univ_ans", &()).get().unwrap();
    assert_eq!(rep, single);
}

#[test]
fn replicate_never_accepts_a_corrupted_replica() {
    let f = fixture(3, &[]);
    for _ in 0..20 {
        let r: i64 = distributed_replicate_validate(&f.sim.locality(0), &[0, 1, 2], |v: &i64| *v == 5, "value", &(5i64,))
            .get()
            .unwrap();
        assert_eq!(r, 5);
    }
}

#[test]
fn replicate_vote_takes_the_majority() {
    let f = fixture(3, &[]);
    let r: i64 = distributed_replicate_vote(&f.sim.locality(0), &[0, 1, 2], majority_vote, "seven_seven_nine", &())
        .get()
        .unwrap();
    assert_eq!(r, 7);
    let r: i64 = distributed_replicate_vote_validate(
        &f.sim.locality(0),
        &[0, 1, 2],
        majority_vote,
        |v: &i64| *v == 9,
        "seven_seven_nine",
        &(),
    )
    .get()
    .unwrap();
    assert_eq!(r, 9);
}

#[test]
fn replicate_fans_out_without_cancelling() {
    let f = fixture(4, &[]);
    let ids = [0, 1, 2, 3];
    let r: i64 = distributed_replicate(&f.sim.locality(0), &ids, "work", &(1i64,)).get().unwrap();
    assert!(r % 1000 == 1);
    f.sim.shutdown();
    assert_eq!(f.executions.load(Ordering::SeqCst), 4);
    let st = f.sim.stats();
    assert_eq!(st.remote_invocations, 4);
    assert_eq!(st.replies, 4);
}

#[test]
fn replicate_all_fail_is_no_valid_replica() {
    let f = fixture(3, &[0, 1, 2]);
    let r: Result<i64, _> = distributed_replicate(&f.sim.locality(0), &[0, 1, 2], "work", &(1i64,)).get();
    match r {
        Err(TaskError::Resilience(e)) => {
            assert_eq!(e.kind, ResilienceErrorKind::NoValidReplica);
            assert_eq!(e.attempts, 3);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn remote_action_can_use_local_replay() {
    let f = fixture(2, &[]);
    let r: i64 = distributed_replay(&f.sim.locality(0), &[1], "nested", &(11i64,)).get().unwrap();
    assert_eq!(r, 11);
    assert_eq!(f.sim.locality(1).pool().stats().replays, 2);
}

#[test]
fn self_list_matches_local_replay() {
    let f = fixture(2, &[]);
    let loc = f.sim.locality(0);
    let remote: i64 = distributed_replay(&loc, &[0], "work", &(3i64,)).get().unwrap();
    let local = async_replay(loc.pool(), 1, |x: i64| Ok(x), 3i64).get().unwrap();
    assert_eq!(remote, local);
}

#[test]
fn backup_lists_drive_fallback() {
    let f = fixture(4, &[1]);
    let ids = make_backup_lists(0, 4, 3);
    assert_eq!(ids, vec![1, 2, 3]);
    let r: i64 = distributed_replay(&f.sim.locality(0), &ids, "work", &(0i64,)).get().unwrap();
    assert_eq!(r, 2000);
}
