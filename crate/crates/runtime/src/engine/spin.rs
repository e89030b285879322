use std::time::{Duration, Instant};

/// CPU time consumed by the calling thread.
#[cfg(unix)]
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime(CLOCK_THREAD_CPUTIME_ID) failed");
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Spins until this thread has consumed `grain` of CPU time.
///
/// Measuring thread CPU time rather than wall time keeps a task's core
/// occupancy fixed when workers outnumber cores.
#[cfg(unix)]
pub fn busy_wait(grain: Duration) {
    let start = thread_cpu_time();
    while thread_cpu_time() - start < grain {
        std::hint::spin_loop();
    }
}

#[cfg(not(unix))]
pub fn busy_wait(grain: Duration) {
    let start = Instant::now();
    while start.elapsed() < grain {
        std::hint::spin_loop();
    }
}

/// Wall-clock spin, for callers that want elapsed time rather than CPU time.
pub fn busy_wait_wall(grain: Duration) {
    let start = Instant::now();
    while start.elapsed() < grain {
        std::hint::spin_loop();
    }
}
