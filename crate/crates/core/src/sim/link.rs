//! Single-bottleneck FIFO link with tail drop, fluid service and random loss.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::TraceEvent;

pub const DEFAULT_QUEUE_PACKETS: usize = 50;
pub const PACKET_BYTES: u32 = 1200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketKind {
    Video,
    Audio,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub seq: u64,
    pub size: u32,
    pub send_time_ms: u64,
    pub kind: PacketKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivered {
    pub packet: Packet,
    pub arrival_ms: u64,
    /// Time spent waiting for service, ms.
    pub queuing_delay_ms: f64,
    /// Queuing delay plus propagation, ms.
    pub one_way_delay_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossCause {
    /// Queue full on arrival.
    TailDrop,
    /// Random loss at dequeue.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkCounters {
    pub accepted: u64,
    pub delivered: u64,
    pub tail_dropped: u64,
    pub randomly_lost: u64,
}

#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    /// Packets reaching the receiver during this tick.
    pub delivered: Vec<Delivered>,
    pub lost: Vec<(Packet, LossCause)>,
    /// Bytes of service consumed this tick.
    pub served_bytes: f64,
    /// Bytes the link could have served this tick.
    pub capacity_bytes: f64,
}

#[derive(Debug, Clone)]
struct Queued {
    packet: Packet,
    enqueued_ms: u64,
    remaining: f64,
}

#[derive(Debug, Clone)]
struct InFlight(Delivered);

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for InFlight {}
impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.arrival_ms, self.0.packet.seq).cmp(&(other.0.arrival_ms, other.0.packet.seq))
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    queue: VecDeque<Queued>,
    max_packets: usize,
    /// When the current head packet reached the head of the queue.
    head_since_ms: u64,
    budget_bytes: f64,
    in_flight: BinaryHeap<Reverse<InFlight>>,
    rng: ChaCha8Rng,
    counters: LinkCounters,
}

impl Link {
    pub fn new(max_packets: usize, seed: u64) -> Self {
        Self {
            queue: VecDeque::with_capacity(max_packets),
            max_packets,
            head_since_ms: 0,
            budget_bytes: 0.0,
            in_flight: BinaryHeap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counters: LinkCounters::default(),
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queue_bytes(&self) -> u64 {
        self.queue.iter().map(|q| q.packet.size as u64).sum()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn counters(&self) -> LinkCounters {
        self.counters
    }

    /// Advances the link by one 1 ms tick at time `now_ms` under `conditions`.
    pub fn step(&mut self, now_ms: u64, conditions: &TraceEvent, arrivals: &[Packet]) -> StepOutcome {
        let mut out = StepOutcome::default();
        for p in arrivals {
            if self.queue.len() >= self.max_packets {
                self.counters.tail_dropped += 1;
                out.lost.push((*p, LossCause::TailDrop));
                continue;
            }
            if self.queue.is_empty() {
                self.head_since_ms = now_ms;
            }
            self.counters.accepted += 1;
            self.queue.push_back(Queued { packet: *p, enqueued_ms: now_ms, remaining: p.size as f64 });
        }

        out.capacity_bytes = conditions.capacity_kbps / 8.0;
        self.budget_bytes += out.capacity_bytes;
        while let Some(head) = self.queue.front_mut() {
            if self.budget_bytes < head.remaining {
                head.remaining -= self.budget_bytes;
                out.served_bytes += self.budget_bytes;
                self.budget_bytes = 0.0;
                break;
            }
            self.budget_bytes -= head.remaining;
            out.served_bytes += head.remaining;
            let done = self.queue.pop_front().expect("head exists");
            let wait = self.head_since_ms.saturating_sub(done.enqueued_ms) as f64;
            self.head_since_ms = now_ms;
            if conditions.loss_rate > 0.0 && self.rng.gen::<f64>() < conditions.loss_rate {
                self.counters.randomly_lost += 1;
                out.lost.push((done.packet, LossCause::Random));
                continue;
            }
            let propagation = conditions.owd_ms.ceil() as u64;
            self.in_flight.push(Reverse(InFlight(Delivered {
                packet: done.packet,
                arrival_ms: now_ms + propagation,
                queuing_delay_ms: wait,
                one_way_delay_ms: wait + conditions.owd_ms,
            })));
        }
        if self.queue.is_empty() {
            // An idle link cannot bank service for later.
            self.budget_bytes = 0.0;
        }

        while let Some(Reverse(next)) = self.in_flight.peek() {
            if next.0.arrival_ms > now_ms {
                break;
            }
            let Reverse(InFlight(d)) = self.in_flight.pop().expect("peeked");
            self.counters.delivered += 1;
            out.delivered.push(d);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conditions(capacity_kbps: f64, owd_ms: f64) -> TraceEvent {
        TraceEvent { time_ms: 0, capacity_kbps, owd_ms, loss_rate: 0.0 }
    }

    fn packet(seq: u64, t: u64) -> Packet {
        Packet { seq, size: PACKET_BYTES, send_time_ms: t, kind: PacketKind::Video }
    }

    #[test]
    fn burst_beyond_queue_is_tail_dropped() {
        let mut link = Link::new(DEFAULT_QUEUE_PACKETS, 0);
        let burst: Vec<Packet> = (0..51).map(|i| packet(i, 0)).collect();
        let out = link.step(0, &conditions(1e-3, 10.0), &burst);
        assert_eq!(out.lost.len(), 1);
        assert_eq!(out.lost[0].0.seq, 50);
        assert_eq!(link.queue_len(), 50);
    }

    #[test]
    fn underloaded_packet_sees_pure_propagation() {
        let mut link = Link::new(DEFAULT_QUEUE_PACKETS, 0);
        let c = conditions(2000.0, 25.0);
        let mut delivered = Vec::new();
        for t in 0..100 {
            let arrivals = if t == 0 { vec![packet(0, 0)] } else { vec![] };
            delivered.extend(link.step(t, &c, &arrivals).delivered);
        }
        assert_eq!(delivered.len(), 1);
        assert_eq!(delivered[0].queuing_delay_ms, 0.0);
        assert_eq!(delivered[0].one_way_delay_ms, 25.0);
        // 1200 bytes at 250 bytes/ms finish serialization in the fifth tick.
        assert_eq!(delivered[0].arrival_ms, 4 + 25);
    }

    #[test]
    fn served_bytes_never_exceed_capacity() {
        let mut link = Link::new(DEFAULT_QUEUE_PACKETS, 0);
        let c = conditions(1000.0, 5.0);
        for t in 0..500 {
            let out = link.step(t, &c, &[packet(t, t)]);
            assert!(out.served_bytes <= out.capacity_bytes + 1e-9);
        }
    }
}
