//! Exchange machinery shared by the PageRank and label-propagation workers.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Mutex, MutexGuard, TryLockError};

/// `f32` cell with atomic read-modify-write, built on `AtomicU32`.
#[derive(Debug, Default)]
#[repr(transparent)]
pub struct AtomicF32(AtomicU32);

impl AtomicF32 {
    pub fn new(v: f32) -> Self {
        Self(AtomicU32::new(v.to_bits()))
    }

    pub fn load(&self, order: Ordering) -> f32 {
        f32::from_bits(self.0.load(order))
    }

    pub fn swap(&self, v: f32, order: Ordering) -> f32 {
        f32::from_bits(self.0.swap(v.to_bits(), order))
    }

    /// Adds `v` with a compare-and-swap retry loop; returns the old value.
    #[inline]
    pub fn fetch_add(&self, v: f32, order: Ordering) -> f32 {
        let mut current = self.0.load(Ordering::Relaxed);
        loop {
            let next = (f32::from_bits(current) + v).to_bits();
            match self.0.compare_exchange_weak(current, next, order, Ordering::Relaxed) {
                Ok(old) => return f32::from_bits(old),
                Err(actual) => current = actual,
            }
        }
    }
}

/// One buffer per ordered pair of chunks `(producer, consumer)`.
///
/// A producer fills its row during its exchange loop and then notifies each
/// consumer by message; the consumer reads only after that notice. Access
/// outside this protocol would contend on the slot, and is reported as a
/// panic instead of blocking.
#[derive(Debug)]
pub struct PairBuffers<T> {
    num_chunks: usize,
    slots: Vec<Mutex<Vec<T>>>,
}

impl<T> PairBuffers<T> {
    pub fn new(num_chunks: usize) -> Self {
        Self {
            num_chunks,
            slots: (0..num_chunks * num_chunks).map(|_| Mutex::new(Vec::new())).collect(),
        }
    }

    pub fn slot(&self, producer: usize, consumer: usize) -> MutexGuard<'_, Vec<T>> {
        match self.slots[producer * self.num_chunks + consumer].try_lock() {
            Ok(guard) => guard,
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
            Err(TryLockError::WouldBlock) => {
                panic!("pair buffer ({producer}, {consumer}) accessed outside its protocol")
            }
        }
    }

    /// The producer's whole row, cleared and ready to fill. Capacity from
    /// earlier iterations is kept.
    pub fn row(&self, producer: usize) -> Vec<MutexGuard<'_, Vec<T>>> {
        (0..self.num_chunks)
            .map(|q| {
                let mut g = self.slot(producer, q);
                g.clear();
                g
            })
            .collect()
    }
}

/// Releases items keyed by sender in ascending sender order, one round of
/// `num_senders` items at a time.
#[derive(Debug)]
pub struct OrderedInbox<T> {
    slots: Vec<Option<T>>,
    next: usize,
}

impl<T> OrderedInbox<T> {
    pub fn new(num_senders: usize) -> Self {
        Self {
            slots: (0..num_senders).map(|_| None).collect(),
            next: 0,
        }
    }

    pub fn push(&mut self, from: usize, item: T) {
        let slot = &mut self.slots[from];
        assert!(slot.is_none(), "second item from sender {from} in one round");
        *slot = Some(item);
    }

    /// Next item in sender order, if it has arrived.
    pub fn pop_ready(&mut self) -> Option<T> {
        let item = self.slots.get_mut(self.next)?.take()?;
        self.next += 1;
        if self.next == self.slots.len() {
            self.next = 0;
        }
        Some(item)
    }

    pub fn is_idle(&self) -> bool {
        self.next == 0 && self.slots.iter().all(Option::is_none)
    }
}

/// What a worker must do after feeding its reduction state.
#[derive(Debug, PartialEq)]
pub enum TreeStep<T> {
    /// Waiting for a partner's partial result.
    Wait,
    /// Hand the partial result to the left partner.
    SendUp { to: usize, level: u32, values: Vec<T> },
    /// This worker is the root and holds the full reduction.
    Root(Vec<T>),
}

/// Binary reduction tree over chunk ids with a fixed shape: at level `l`,
/// chunk `c` (a multiple of `2^(l+1)`) absorbs chunk `c + 2^l`. Partial
/// results are always combined as `left ⊕ right`, so the result does not
/// depend on arrival order.
#[derive(Debug)]
pub struct TreeReducer<T> {
    own: Option<Vec<T>>,
    pending: BTreeMap<u32, Vec<T>>,
    level: u32,
}

impl<T> Default for TreeReducer<T> {
    fn default() -> Self {
        Self {
            own: None,
            pending: BTreeMap::new(),
            level: 0,
        }
    }
}

impl<T> TreeReducer<T> {
    pub fn contribute(&mut self, values: Vec<T>) {
        assert!(self.own.is_none(), "contribution already pending");
        self.own = Some(values);
    }

    pub fn receive(&mut self, level: u32, values: Vec<T>) {
        let previous = self.pending.insert(level, values);
        assert!(previous.is_none(), "duplicate partial at level {level}");
    }

    pub fn advance(
        &mut self,
        me: usize,
        num_chunks: usize,
        combine: impl Fn(&mut [T], &[T]),
    ) -> TreeStep<T> {
        loop {
            let Some(own) = self.own.as_mut() else {
                return TreeStep::Wait;
            };
            let step = 1usize << self.level;
            if step >= num_chunks {
                debug_assert_eq!(me, 0);
                self.level = 0;
                return TreeStep::Root(self.own.take().unwrap());
            }
            if me & step != 0 {
                let level = self.level;
                self.level = 0;
                return TreeStep::SendUp {
                    to: me - step,
                    level,
                    values: self.own.take().unwrap(),
                };
            }
            if me + step < num_chunks {
                match self.pending.remove(&self.level) {
                    Some(right) => combine(own, &right),
                    None => return TreeStep::Wait,
                }
            }
            self.level += 1;
        }
    }
}
