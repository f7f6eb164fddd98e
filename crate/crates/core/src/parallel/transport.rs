//! Size-accounted message passing between the master and the workers.
//!
//! Payloads are handed over in process; the transport only records what a
//! real network would have carried. Worker 0 hosts the master, so messages
//! between the two are local and are not recorded.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{GpError, Result};

/// Bytes per transmitted scalar.
pub const SCALAR_BYTES: usize = 8;

/// The worker hosting the master.
pub const MASTER: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// Re-partitioning by clustering.
    Partition,
    /// Distributed incomplete Cholesky factorization.
    Factorize,
    LocalSummary,
    /// The `F_m Σ_{D_m U}` blocks of the incomplete-Cholesky algorithm.
    SigmaDot,
    GlobalSummary,
    /// Predictive components sent to the master.
    Predict,
    /// Exchanges needed for off-diagonal blocks of the joint covariance.
    CrossCovariance,
    /// Per-worker predictions returned to the master for output. Not part
    /// of any algorithm's communication cost.
    Collect,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::Partition,
        Phase::Factorize,
        Phase::LocalSummary,
        Phase::SigmaDot,
        Phase::GlobalSummary,
        Phase::Predict,
        Phase::CrossCovariance,
        Phase::Collect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Partition => "partition",
            Phase::Factorize => "factorize",
            Phase::LocalSummary => "local_summary",
            Phase::SigmaDot => "sigma_dot",
            Phase::GlobalSummary => "global_summary",
            Phase::Predict => "predict",
            Phase::CrossCovariance => "cross_covariance",
            Phase::Collect => "collect",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Phase> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| GpError::UnknownPhase(s.to_string()))
    }
}

/// One point-to-point message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageRecord {
    pub phase: Phase,
    pub sender: usize,
    pub receiver: usize,
    pub tag: &'static str,
    pub scalar_count: usize,
    pub bytes: usize,
    /// Round of the broadcast tree this edge belongs to; 0 otherwise.
    pub hop: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Totals {
    pub messages: usize,
    pub scalars: usize,
    pub bytes: usize,
    /// Sequential message rounds, counting each broadcast tree level once.
    pub rounds: usize,
}

impl Totals {
    fn add(&mut self, r: &MessageRecord) {
        self.messages += 1;
        self.scalars += r.scalar_count;
        self.bytes += r.bytes;
    }
}

/// Append-only record of inter-worker traffic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MessageLog {
    records: Vec<MessageRecord>,
    rounds: Vec<(Phase, usize)>,
}

impl MessageLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[MessageRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn totals(&self, phase: Phase) -> Totals {
        let mut t = Totals::default();
        for r in self.records.iter().filter(|r| r.phase == phase) {
            t.add(r);
        }
        t.rounds = self
            .rounds
            .iter()
            .filter(|(p, _)| *p == phase)
            .map(|(_, n)| n)
            .sum();
        t
    }

    /// Totals over every phase except [`Phase::Collect`].
    pub fn algorithm_totals(&self) -> Totals {
        let mut t = Totals::default();
        for p in Phase::ALL.into_iter().filter(|&p| p != Phase::Collect) {
            let pt = self.totals(p);
            t.messages += pt.messages;
            t.scalars += pt.scalars;
            t.bytes += pt.bytes;
            t.rounds += pt.rounds;
        }
        t
    }

    /// Totals of the records in `phase` carrying `tag`.
    pub fn tag_totals(&self, phase: Phase, tag: &str) -> Totals {
        let mut t = Totals::default();
        for r in self.records.iter().filter(|r| r.phase == phase && r.tag == tag) {
            t.add(r);
        }
        t
    }

    fn push(&mut self, phase: Phase, sender: usize, receiver: usize, tag: &'static str, scalars: usize, hop: usize) {
        if sender == receiver {
            return;
        }
        self.records.push(MessageRecord {
            phase,
            sender,
            receiver,
            tag,
            scalar_count: scalars,
            bytes: scalars * SCALAR_BYTES,
            hop,
        });
    }

    fn round(&mut self, phase: Phase, n: usize) {
        if n > 0 {
            self.rounds.push((phase, n));
        }
    }

    /// Appends all records of `other`.
    pub fn extend(&mut self, other: &MessageLog) {
        self.records.extend(other.records.iter().cloned());
        self.rounds.extend(other.rounds.iter().copied());
    }

    /// CSV with columns `phase,sender,receiver,scalar_count,bytes,tag,hop`.
    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phase", "sender", "receiver", "scalar_count", "bytes", "tag", "hop"])?;
        for r in &self.records {
            out.write_record([
                r.phase.as_str().to_string(),
                r.sender.to_string(),
                r.receiver.to_string(),
                r.scalar_count.to_string(),
                r.bytes.to_string(),
                r.tag.to_string(),
                r.hop.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(f))
    }
}

/// Per-phase totals looked up by phase name.
pub fn message_totals(log: &MessageLog, phase: &str) -> Result<Totals> {
    Ok(log.totals(phase.parse()?))
}

/// Number of levels of a binomial broadcast tree over `m` nodes.
pub fn tree_depth(m: usize) -> usize {
    let mut depth = 0;
    while (1usize << depth) < m {
        depth += 1;
    }
    depth
}

/// Records traffic for the communication patterns the algorithms use.
#[derive(Debug)]
pub struct Transport {
    workers: usize,
    log: MessageLog,
}

impl Transport {
    pub fn new(workers: usize) -> Self {
        Transport {
            workers,
            log: MessageLog::new(),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn log(&self) -> &MessageLog {
        &self.log
    }

    pub fn take_log(&mut self) -> MessageLog {
        std::mem::take(&mut self.log)
    }

    pub fn send(&mut self, phase: Phase, from: usize, to: usize, tag: &'static str, scalars: usize) {
        self.log.push(phase, from, to, tag, scalars, 0);
        self.log.round(phase, usize::from(from != to));
    }

    /// Every worker sends `scalars(m)` to `root` directly, in ascending
    /// worker order.
    pub fn gather(&mut self, phase: Phase, root: usize, tag: &'static str, scalars: impl Fn(usize) -> usize) {
        for m in 0..self.workers {
            self.log.push(phase, m, root, tag, scalars(m), 0);
        }
        self.log.round(phase, usize::from(self.workers > 1));
    }

    /// One logical broadcast from `root`, accounted as a binomial tree:
    /// `M - 1` edges over `ceil(log2 M)` rounds.
    pub fn broadcast(&mut self, phase: Phase, root: usize, tag: &'static str, scalars: usize) {
        let m = self.workers;
        let depth = tree_depth(m);
        for hop in 0..depth {
            let span = 1usize << hop;
            for rel in 0..span {
                let dst = rel + span;
                if dst < m {
                    self.log.push(phase, (rel + root) % m, (dst + root) % m, tag, scalars, hop + 1);
                }
            }
        }
        self.log.round(phase, depth);
    }

    /// Every worker broadcasts its own `scalars(m)`; the broadcasts run
    /// concurrently, so they share rounds.
    pub fn allgather(&mut self, phase: Phase, tag: &'static str, scalars: impl Fn(usize) -> usize) {
        let before = self.log.rounds.len();
        for root in 0..self.workers {
            self.broadcast(phase, root, tag, scalars(root));
        }
        self.log.rounds.truncate(before);
        self.log.round(phase, tree_depth(self.workers));
    }
}
