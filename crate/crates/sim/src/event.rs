//! Event queue with a total, replayable order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use sdag_core::{Block, Hash256};

#[derive(Clone, Debug)]
pub enum EventKind {
    Deliver { block: Arc<Block>, id: Hash256, to: usize },
    TxArrival { index: usize },
    MineAttemptComplete { peer: usize },
}

impl EventKind {
    /// Same-time events: deliveries first, then transactions, then mining.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::Deliver { .. } => 0,
            EventKind::TxArrival { .. } => 1,
            EventKind::MineAttemptComplete { .. } => 2,
        }
    }

    pub fn peer(&self) -> usize {
        match self {
            EventKind::Deliver { to, .. } => *to,
            EventKind::TxArrival { .. } => usize::MAX,
            EventKind::MineAttemptComplete { peer } => *peer,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Deliver { .. } => "deliver",
            EventKind::TxArrival { .. } => "tx",
            EventKind::MineAttemptComplete { .. } => "mine",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    seq: u64,
}

impl Event {
    fn key(&self) -> (f64, u8, usize, u64) {
        (self.time, self.kind.rank(), self.kind.peer(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)).then(b.3.cmp(&a.3))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event { time, kind, seq: self.seq });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
