//! Deterministic simulation of an `s × s` grid of message-passing processors.
//!
//! Nothing here runs in parallel. Each simulated processor owns a clock and a
//! set of counters; computation advances the owner's clock by `flops·τ_f`, and
//! a message of `w` words over `h` grid hops costs
//!
//! * store-and-forward: `h·(c0 + c1·w)`
//! * wormhole: `c0 + c1·w + h·hop_delay`
//!
//! The sender is busy for the whole transfer; the receiver's clock is pulled
//! forward to the arrival time. Collectives are built from these rules:
//! multicasts are pipelined along the grid (the origin is busy until the
//! farthest receiver has the payload), scans reduce up a binomial tree in
//! group order and then multicast the result from the group leader.
//!
//! With `virtual_factor = k > 1` the grid is a grid of *virtual* processors,
//! `k` consecutive ranks sharing one real processor. Messages between
//! co-hosted virtual processors are free, and a real processor's time is the
//! sum of its virtual processors' clocks.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Manhattan distance on a non-toroidal grid.
    pub fn hops(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Routing {
    StoreAndForward,
    Wormhole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Grid side; the grid has `s²` processors.
    pub s: usize,
    /// Message startup time.
    pub c0: f64,
    /// Transfer time per word.
    pub c1: f64,
    /// Time per floating-point operation.
    pub tau_f: f64,
    pub routing: Routing,
    /// Per-hop latency under wormhole routing.
    pub hop_delay: f64,
    /// Virtual processors simulated by each real processor.
    pub virtual_factor: usize,
}

impl GridConfig {
    pub fn new(s: usize) -> Self {
        Self {
            s,
            c0: 20.0,
            c1: 1.0,
            tau_f: 1.0,
            routing: Routing::Wormhole,
            hop_delay: 1.0,
            virtual_factor: 1,
        }
    }

    pub fn with_costs(mut self, c0: f64, c1: f64, tau_f: f64) -> Self {
        self.c0 = c0;
        self.c1 = c1;
        self.tau_f = tau_f;
        self
    }

    pub fn with_routing(mut self, routing: Routing, hop_delay: f64) -> Self {
        self.routing = routing;
        self.hop_delay = hop_delay;
        self
    }

    pub fn with_virtual_factor(mut self, k: usize) -> Self {
        self.virtual_factor = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::InvalidArgument("grid side must be positive".into()));
        }
        if self.virtual_factor == 0 {
            return Err(Error::InvalidArgument("virtual factor must be positive".into()));
        }
        let nonneg = [
            ("c0", self.c0),
            ("c1", self.c1),
            ("hop_delay", self.hop_delay),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !self.tau_f.is_finite() || self.tau_f <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tau_f must be finite and positive, got {}",
                self.tau_f
            )));
        }
        Ok(())
    }

    pub fn nprocs(&self) -> usize {
        self.s * self.s
    }

    /// Number of real processors hosting the `s²` virtual ones.
    pub fn real_procs(&self) -> usize {
        self.nprocs().div_ceil(self.virtual_factor)
    }

    /// Time for one message of `words` words travelling `hops` hops.
    pub fn message_delay(&self, hops: usize, words: usize) -> f64 {
        let w = words as f64;
        match self.routing {
            Routing::StoreAndForward => hops as f64 * (self.c0 + self.c1 * w),
            Routing::Wormhole => self.c0 + self.c1 * w + hops as f64 * self.hop_delay,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcCounters {
    pub flop_count: u64,
    pub words_sent: u64,
    pub words_received: u64,
    pub messages_sent: u64,
    pub clock: f64,
}

/// Per-processor counters plus the grid-level makespan.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub procs: Vec<ProcCounters>,
    pub makespan: f64,
}

impl CostLedger {
    pub fn total_flops(&self) -> u64 {
        self.procs.iter().map(|p| p.flop_count).sum()
    }

    pub fn total_words_sent(&self) -> u64 {
        self.procs.iter().map(|p| p.words_sent).sum()
    }

    pub fn total_words_received(&self) -> u64 {
        self.procs.iter().map(|p| p.words_received).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.procs.iter().map(|p| p.messages_sent).sum()
    }

    pub fn max_clock(&self) -> f64 {
        self.procs.iter().map(|p| p.clock).fold(0.0, f64::max)
    }

    pub fn flops_per_proc(&self) -> Vec<u64> {
        self.procs.iter().map(|p| p.flop_count).collect()
    }
}

/// `(value, global index)` pair reduced by [`pivot_theta`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotCandidate {
    pub value: f64,
    pub index: usize,
}

impl PivotCandidate {
    pub const fn new(value: f64, index: usize) -> Self {
        Self { value, index }
    }

    /// Placeholder contributed by a processor with no eligible rows; loses to
    /// every real candidate under [`pivot_select`].
    pub const NONE: Self = Self {
        value: 0.0,
        index: usize::MAX,
    };
}

/// `a` if `|a| ≥ |b|`, else `b`.
pub fn pivot_theta(a: PivotCandidate, b: PivotCandidate) -> PivotCandidate {
    if a.value.abs() >= b.value.abs() {
        a
    } else {
        b
    }
}

/// [`pivot_theta`] with its operands presented in global index order, so equal
/// magnitudes resolve to the smaller row index whatever the fold tree.
pub fn pivot_select(a: PivotCandidate, b: PivotCandidate) -> PivotCandidate {
    if a.index <= b.index {
        pivot_theta(a, b)
    } else {
        pivot_theta(b, a)
    }
}

#[derive(Clone, Debug)]
pub struct Fabric {
    config: GridConfig,
    procs: Vec<ProcCounters>,
}

impl Fabric {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let procs = vec![ProcCounters::default(); config.nprocs()];
        Ok(Self { config, procs })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn side(&self) -> usize {
        self.config.s
    }

    pub fn nprocs(&self) -> usize {
        self.procs.len()
    }

    pub fn coord_of(&self, rank: usize) -> Coord {
        Coord::new(rank / self.config.s, rank % self.config.s)
    }

    pub fn rank_of(&self, c: Coord) -> usize {
        c.row * self.config.s + c.col
    }

    pub fn check(&self, c: Coord) -> Result<()> {
        if c.row >= self.config.s || c.col >= self.config.s {
            return Err(Error::OffGrid {
                row: c.row,
                col: c.col,
                side: self.config.s,
            });
        }
        Ok(())
    }

    pub fn counters(&self, c: Coord) -> &ProcCounters {
        &self.procs[self.rank_of(c)]
    }

    pub fn clock(&self, c: Coord) -> f64 {
        self.counters(c).clock
    }

    fn host(&self, rank: usize) -> usize {
        rank / self.config.virtual_factor
    }

    fn co_hosted(&self, a: Coord, b: Coord) -> bool {
        self.host(self.rank_of(a)) == self.host(self.rank_of(b))
    }

    /// Words sent plus received so far, per rank.
    pub fn traffic(&self) -> Vec<u64> {
        self.procs
            .iter()
            .map(|p| p.words_sent + p.words_received)
            .collect()
    }

    pub fn compute(&mut self, at: Coord, flops: u64) {
        let tau = self.config.tau_f;
        let r = self.rank_of(at);
        let p = &mut self.procs[r];
        p.flop_count += flops;
        p.clock += flops as f64 * tau;
    }

    /// Charge the sender for a transfer and return the arrival time.
    fn transmit(&mut self, from: Coord, to: Coord, words: usize) -> f64 {
        let rf = self.rank_of(from);
        let t0 = self.procs[rf].clock;
        if from == to || self.co_hosted(from, to) {
            return t0;
        }
        let delay = self.config.message_delay(from.hops(to), words);
        let p = &mut self.procs[rf];
        p.clock += delay;
        p.words_sent += words as u64;
        p.messages_sent += 1;
        t0 + delay
    }

    fn deliver(&mut self, from: Coord, to: Coord, words: usize, arrival: f64) {
        let counted = from != to && !self.co_hosted(from, to);
        let r = self.rank_of(to);
        let p = &mut self.procs[r];
        p.clock = p.clock.max(arrival);
        if counted {
            p.words_received += words as u64;
        }
    }

    /// Point-to-point transfer of `words` words. Returns the time charged to
    /// the sender (zero for a local or co-hosted destination).
    pub fn send(&mut self, from: Coord, to: Coord, words: usize) -> Result<f64> {
        self.check(from)?;
        self.check(to)?;
        if words == 0 {
            return Err(Error::InvalidArgument("message must carry at least one word".into()));
        }
        let t0 = self.clock(from);
        let arrival = self.transmit(from, to, words);
        self.deliver(from, to, words, arrival);
        Ok(arrival - t0)
    }

    /// Pipelined one-to-many transfer. A receiver `h` hops from the origin gets
    /// the payload at `t0 + delay(h, w)`; each delivery is counted against the
    /// nearest group member that is closer to the origin (the forwarder).
    pub fn multicast(&mut self, origin: Coord, recipients: &[Coord], words: usize) -> Result<()> {
        self.check(origin)?;
        for &r in recipients {
            self.check(r)?;
        }
        let recipients: Vec<Coord> = recipients.iter().copied().filter(|&r| r != origin).collect();
        if recipients.is_empty() {
            return Ok(());
        }
        if words == 0 {
            return Err(Error::InvalidArgument("message must carry at least one word".into()));
        }
        let t0 = self.clock(origin);
        let mut busy_until = t0;
        for &r in &recipients {
            if self.co_hosted(origin, r) {
                continue;
            }
            let d = origin.hops(r);
            let forwarder = std::iter::once(origin)
                .chain(recipients.iter().copied())
                .filter(|&q| origin.hops(q) < d)
                .min_by_key(|&q| (q.hops(r), self.rank_of(q)))
                .unwrap_or(origin);
            let arrival = t0 + self.config.message_delay(d, words);
            busy_until = busy_until.max(arrival);
            let rf = self.rank_of(forwarder);
            self.procs[rf].words_sent += words as u64;
            self.procs[rf].messages_sent += 1;
            let rr = self.rank_of(r);
            let p = &mut self.procs[rr];
            p.clock = p.clock.max(arrival);
            p.words_received += words as u64;
        }
        let ro = self.rank_of(origin);
        self.procs[ro].clock = busy_until;
        Ok(())
    }

    pub fn row_group(&self, row: usize) -> Vec<Coord> {
        (0..self.config.s).map(|c| Coord::new(row, c)).collect()
    }

    pub fn column_group(&self, col: usize) -> Vec<Coord> {
        (0..self.config.s).map(|r| Coord::new(r, col)).collect()
    }

    pub fn row_broadcast(&mut self, origin: Coord, words: usize) -> Result<()> {
        self.check(origin)?;
        let group = self.row_group(origin.row);
        self.multicast(origin, &group, words)
    }

    pub fn column_broadcast(&mut self, origin: Coord, words: usize) -> Result<()> {
        self.check(origin)?;
        let group = self.column_group(origin.col);
        self.multicast(origin, &group, words)
    }

    /// All-reduce of one input per group member. The fold is a binomial tree
    /// over group order, with the lower position always the left operand of
    /// `op`, so the result is reproducible bit for bit. Every member ends up
    /// holding the result.
    pub fn scan<T, F>(&mut self, group: &[Coord], inputs: Vec<T>, words: usize, op: F) -> Result<T>
    where
        F: Fn(&T, &T) -> T,
    {
        if group.is_empty() || group.len() != inputs.len() {
            return Err(Error::InvalidArgument(format!(
                "scan over {} processors with {} inputs",
                group.len(),
                inputs.len()
            )));
        }
        for &g in group {
            self.check(g)?;
        }
        let mut values: Vec<Option<T>> = inputs.into_iter().map(Some).collect();
        let len = group.len();
        let mut stride = 1;
        while stride < len {
            let mut i = 0;
            while i + stride < len {
                let partner = i + stride;
                let arrival = self.transmit(group[partner], group[i], words);
                self.deliver(group[partner], group[i], words, arrival);
                let rhs = values[partner].take().expect("binomial partner already consumed");
                let lhs = values[i].take().expect("binomial root already consumed");
                values[i] = Some(op(&lhs, &rhs));
                i += 2 * stride;
            }
            stride *= 2;
        }
        self.multicast(group[0], &group[1..], words)?;
        Ok(values[0].take().expect("scan root holds the result"))
    }

    pub fn column_scan<T, F>(&mut self, col: usize, inputs: Vec<T>, words: usize, op: F) -> Result<T>
    where
        F: Fn(&T, &T) -> T,
    {
        if col >= self.config.s {
            return Err(Error::OffGrid {
                row: 0,
                col,
                side: self.config.s,
            });
        }
        let group = self.column_group(col);
        self.scan(&group, inputs, words, op)
    }

    pub fn row_scan<T, F>(&mut self, row: usize, inputs: Vec<T>, words: usize, op: F) -> Result<T>
    where
        F: Fn(&T, &T) -> T,
    {
        if row >= self.config.s {
            return Err(Error::OffGrid {
                row,
                col: 0,
                side: self.config.s,
            });
        }
        let group = self.row_group(row);
        self.scan(&group, inputs, words, op)
    }

    /// Snapshot of the counters. The makespan is the largest real-processor
    /// time, which for `virtual_factor = 1` is the largest clock.
    pub fn ledger(&self) -> CostLedger {
        let k = self.config.virtual_factor;
        let makespan = if k == 1 {
            self.procs.iter().map(|p| p.clock).fold(0.0, f64::max)
        } else {
            self.procs
                .chunks(k)
                .map(|hosted| hosted.iter().map(|p| p.clock).sum::<f64>())
                .fold(0.0, f64::max)
        };
        CostLedger {
            procs: self.procs.clone(),
            makespan,
        }
    }
}

/// What a processor's step function reports back to [`run_spmd`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Made progress; call again.
    Continue,
    /// Waiting on a message that has not arrived. The step must not have
    /// changed its state.
    Blocked,
    Done,
}

type MailKey = (usize, usize, u32);

/// A processor's view of the fabric during one step of [`run_spmd`].
pub struct ProcCtx<'a> {
    rank: usize,
    fabric: &'a mut Fabric,
    mail: &'a mut HashMap<MailKey, VecDeque<(f64, Vec<f64>)>>,
    progressed: bool,
}

impl ProcCtx<'_> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coord(&self) -> Coord {
        self.fabric.coord_of(self.rank)
    }

    pub fn side(&self) -> usize {
        self.fabric.side()
    }

    pub fn nprocs(&self) -> usize {
        self.fabric.nprocs()
    }

    pub fn clock(&self) -> f64 {
        self.fabric.procs[self.rank].clock
    }

    pub fn compute(&mut self, flops: u64) {
        let at = self.coord();
        self.fabric.compute(at, flops);
        self.progressed = true;
    }

    pub fn send(&mut self, to: Coord, tag: u32, payload: Vec<f64>) -> Result<()> {
        self.fabric.check(to)?;
        if payload.is_empty() {
            return Err(Error::InvalidArgument("message must carry at least one word".into()));
        }
        let from = self.coord();
        let arrival = self.fabric.transmit(from, to, payload.len());
        let key = (self.fabric.rank_of(to), self.rank, tag);
        self.mail.entry(key).or_default().push_back((arrival, payload));
        self.progressed = true;
        Ok(())
    }

    /// Non-blocking receive; `None` means "return [`Status::Blocked`]".
    pub fn recv(&mut self, from: Coord, tag: u32) -> Option<Vec<f64>> {
        let key = (self.rank, self.fabric.rank_of(from), tag);
        let (arrival, payload) = self.mail.get_mut(&key)?.pop_front()?;
        let to = self.coord();
        self.fabric.deliver(from, to, payload.len(), arrival);
        self.progressed = true;
        Some(payload)
    }
}

/// Run one deterministic step function per processor until all report
/// [`Status::Done`]. Processors are stepped in rank order; a full pass in
/// which nobody makes progress while someone is still waiting is a deadlock.
pub fn run_spmd<S, F>(config: &GridConfig, states: Vec<S>, mut program: F) -> Result<(Vec<S>, CostLedger)>
where
    F: FnMut(&mut ProcCtx<'_>, &mut S) -> Status,
{
    let mut fabric = Fabric::new(config.clone())?;
    let n = fabric.nprocs();
    if states.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} initial states for {n} processors",
            states.len()
        )));
    }
    let mut states = states;
    let mut mail = HashMap::new();
    let mut done = vec![false; n];
    loop {
        let mut progress = false;
        for rank in 0..n {
            if done[rank] {
                continue;
            }
            let mut ctx = ProcCtx {
                rank,
                fabric: &mut fabric,
                mail: &mut mail,
                progressed: false,
            };
            let status = program(&mut ctx, &mut states[rank]);
            progress |= ctx.progressed || status != Status::Blocked;
            if status == Status::Done {
                done[rank] = true;
            }
        }
        let waiting = done.iter().filter(|d| !**d).count();
        if waiting == 0 {
            break;
        }
        if !progress {
            return Err(Error::DeadlockDetected { blocked: waiting });
        }
    }
    let ledger = fabric.ledger();
    Ok((states, ledger))
}
