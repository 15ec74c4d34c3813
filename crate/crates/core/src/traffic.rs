//! Transmit buffer as a FIFO ledger of per-packet ages.
//!
//! Each slot the ledger serves the oldest packets first, ages whatever is left
//! by one slot and then admits new arrivals at age zero, tail-dropping anything
//! beyond capacity. Ages are whole slots.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficParams<T> {
    /// Mean packet arrivals per slot.
    pub lambda_slot: T,
    pub q_max: usize,
    pub packet_bytes: u64,
}

impl<T: Real> Default for TrafficParams<T> {
    fn default() -> Self {
        Self {
            lambda_slot: T::lit(9.0),
            q_max: 200,
            packet_bytes: 4000,
        }
    }
}

/// Poisson-distributed arrival count for one slot.
pub fn sample_arrivals<T: Real, R: Rng + ?Sized>(lambda_slot: T, rng: &mut R) -> Result<u64> {
    let lambda = lambda_slot.as_f64();
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("arrival rate must be finite and >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(lambda).map_err(|e| Error::Domain(e.to_string()))?;
    let draw: f64 = poisson.sample(rng);
    Ok(draw as u64)
}

/// What happened to the buffer during one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrafficReport<T> {
    pub served: u64,
    /// Ages (slots) of the served packets at departure, oldest first.
    pub delivered_ages: Vec<u64>,
    pub dropped: u64,
    pub arrivals: u64,
    pub q_end: usize,
    pub aou_avg: T,
}

impl<T> SlotTrafficReport<T> {
    pub fn admitted(&self) -> u64 {
        self.arrivals - self.dropped
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketLedger {
    ages: VecDeque<u64>,
    q_max: usize,
    packet_bytes: u64,
}

impl PacketLedger {
    pub fn new(q_max: usize, packet_bytes: u64) -> Self {
        Self {
            ages: VecDeque::with_capacity(q_max),
            q_max,
            packet_bytes,
        }
    }

    /// Builds a ledger from explicit ages (oldest first). Fails if the ages
    /// exceed capacity or are not in FIFO order.
    pub fn from_ages(ages: impl IntoIterator<Item = u64>, q_max: usize, packet_bytes: u64) -> Result<Self> {
        let ages: VecDeque<u64> = ages.into_iter().collect();
        if ages.len() > q_max {
            return Err(Error::State(format!("{} packets exceed capacity {q_max}", ages.len())));
        }
        if ages.iter().zip(ages.iter().skip(1)).any(|(a, b)| a < b) {
            return Err(Error::State("ages must be non-increasing from head to tail".into()));
        }
        Ok(Self {
            ages,
            q_max,
            packet_bytes,
        })
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn q_max(&self) -> usize {
        self.q_max
    }

    pub fn packet_bytes(&self) -> u64 {
        self.packet_bytes
    }

    pub fn ages(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        self.ages.iter().copied()
    }

    pub fn clear(&mut self) {
        self.ages.clear();
    }

    /// Buffer-average age, `sum(ages) / (q + 1)`.
    pub fn average_aou<T: Real>(&self) -> T {
        let total: u64 = self.ages.iter().sum();
        T::from_count(total) / T::from_count(self.ages.len() as u64 + 1)
    }

    /// Runs one slot: serve, age, admit.
    pub fn advance_slot<T: Real>(&mut self, arrivals_offered: u64, service_capacity: u64) -> SlotTrafficReport<T> {
        let to_serve = (service_capacity as usize).min(self.ages.len());
        let delivered_ages: Vec<u64> = self.ages.drain(..to_serve).collect();

        for age in self.ages.iter_mut() {
            *age += 1;
        }

        let room = (self.q_max - self.ages.len()) as u64;
        let admitted = arrivals_offered.min(room);
        self.ages.extend(std::iter::repeat_n(0, admitted as usize));

        SlotTrafficReport {
            served: delivered_ages.len() as u64,
            delivered_ages,
            dropped: arrivals_offered - admitted,
            arrivals: arrivals_offered,
            q_end: self.ages.len(),
            aou_avg: self.average_aou(),
        }
    }
}
