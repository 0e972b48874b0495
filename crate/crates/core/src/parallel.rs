use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Maps `f` over `items` on at most `max_workers` scoped threads.
///
/// Results land at the index of their input, so the output order never
/// depends on completion order. Once any call fails no new work is started,
/// and the lowest-index error among the calls that ran is returned.
pub(crate) fn try_map_indexed<T, R, E, F>(items: &[T], max_workers: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync,
{
    let workers = max_workers.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }

    let next = AtomicUsize::new(0);
    let failed = std::sync::atomic::AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<R, E>>>> =
        Mutex::new((0..items.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(i, &items[i]);
                if out.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                slots.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });

    let slots = slots.into_inner().expect("result slots poisoned");
    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => return Err(e),
            // Only reachable after a failure stopped the workers early; the
            // failing slot comes later in the vector.
            None => continue,
        }
    }
    Ok(out)
}
