//! Bounded MPSC queue for the pipelined backend: blocking batch push with
//! backpressure, batch pop, close semantics, and a high-water mark for
//! asserting the capacity bound.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

struct State<T> {
    items: VecDeque<T>,
    closed: bool,
    high_water: usize,
}

pub(crate) struct BoundedQueue<T> {
    state: Mutex<State<T>>,
    not_full: Condvar,
    not_empty: Condvar,
    capacity: usize,
}

impl<T> BoundedQueue<T> {
    pub(crate) fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        BoundedQueue {
            state: Mutex::new(State {
                items: VecDeque::new(),
                closed: false,
                high_water: 0,
            }),
            not_full: Condvar::new(),
            not_empty: Condvar::new(),
            capacity,
        }
    }

    /// Blocks until the whole batch fits under the capacity, then enqueues
    /// it. The batch must not exceed the capacity. Returns `false` (batch
    /// dropped) if the queue closed while waiting.
    pub(crate) fn push_batch(&self, batch: Vec<T>) -> bool {
        if batch.is_empty() {
            return true;
        }
        assert!(
            batch.len() <= self.capacity,
            "batch of {} exceeds queue capacity {}",
            batch.len(),
            self.capacity
        );
        let mut st = self.state.lock().unwrap();
        while st.items.len() + batch.len() > self.capacity && !st.closed {
            st = self.not_full.wait(st).unwrap();
        }
        if st.closed {
            return false;
        }
        st.items.extend(batch);
        if st.items.len() > st.high_water {
            st.high_water = st.items.len();
        }
        self.not_empty.notify_one();
        true
    }

    /// Blocks until items arrive or the queue closes; drains up to `max`.
    /// `None` means closed and fully drained.
    pub(crate) fn pop_batch(&self, max: usize) -> Option<Vec<T>> {
        let mut st = self.state.lock().unwrap();
        loop {
            if !st.items.is_empty() {
                let take = st.items.len().min(max);
                let out: Vec<T> = st.items.drain(..take).collect();
                self.not_full.notify_all();
                return Some(out);
            }
            if st.closed {
                return None;
            }
            st = self.not_empty.wait(st).unwrap();
        }
    }

    /// Closes the queue: pending and future pushes are rejected, poppers
    /// drain what remains and then see `None`.
    pub(crate) fn close(&self) {
        let mut st = self.state.lock().unwrap();
        st.closed = true;
        self.not_full.notify_all();
        self.not_empty.notify_all();
    }

    /// Largest number of items buffered at any instant so far.
    pub(crate) fn high_water(&self) -> usize {
        self.state.lock().unwrap().high_water
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn backpressure_bounds_buffered_items() {
        let q = Arc::new(BoundedQueue::new(4));
        let producer = {
            let q = Arc::clone(&q);
            thread::spawn(move || {
                for chunk in (0..100u32).collect::<Vec<_>>().chunks(4) {
                    assert!(q.push_batch(chunk.to_vec()));
                }
                q.close();
            })
        };
        let mut got = Vec::new();
        while let Some(batch) = q.pop_batch(4) {
            got.extend(batch);
        }
        producer.join().unwrap();
        assert_eq!(got, (0..100).collect::<Vec<_>>());
        assert!(q.high_water() <= 4, "high water {} > capacity", q.high_water());
    }

    #[test]
    fn close_wakes_blocked_producer() {
        let q = Arc::new(BoundedQueue::new(2));
        assert!(q.push_batch(vec![1, 2]));
        let blocked = {
            let q = Arc::clone(&q);
            thread::spawn(move || q.push_batch(vec![3, 4]))
        };
        thread::sleep(std::time::Duration::from_millis(20));
        q.close();
        assert!(!blocked.join().unwrap(), "push into closed queue must report false");
    }

    #[test]
    fn pop_drains_remainder_after_close() {
        let q: BoundedQueue<u8> = BoundedQueue::new(8);
        assert!(q.push_batch(vec![7, 8, 9]));
        q.close();
        assert_eq!(q.pop_batch(2), Some(vec![7, 8]));
        assert_eq!(q.pop_batch(2), Some(vec![9]));
        assert_eq!(q.pop_batch(2), None);
        assert!(!q.push_batch(vec![1]));
    }
}
