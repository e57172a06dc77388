//! Bounded fan-out for independent pipeline branches.
//!
//! Work items run on scoped threads with a fixed worker cap, and results
//! come back in input order so downstream assembly stays deterministic.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `work` to each item on up to `cap` worker threads and returns
/// the outputs in the order of the inputs. Panics in workers propagate.
pub fn run_indexed<T, R, F>(items: Vec<T>, cap: usize, work: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, T) -> R + Send + Sync,
{
    let total = items.len();
    if total == 0 {
        return Vec::new();
    }
    let cap = cap.max(1).min(total);
    if cap == 1 {
        return items.into_iter().enumerate().map(|(i, item)| work(i, item)).collect();
    }

    let queue: Vec<Mutex<Option<T>>> =
        items.into_iter().map(|item| Mutex::new(Some(item))).collect();
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..total).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(cap);
        for _ in 0..cap {
            handles.push(scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= total {
                    break;
                }
                let item = queue[i].lock().expect("queue slot").take().expect("item taken once");
                let result = work(i, item);
                *slots[i].lock().expect("result slot") = Some(result);
            }));
        }
        for handle in handles {
            if let Err(panic) = handle.join() {
                std::panic::resume_unwind(panic);
            }
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("result lock").expect("worker filled slot"))
        .collect()
}
