//! The off-chain watchtower: verifies and records each channel's latest
//! blinded commitment, watches closure and dispute events, decides one
//! freshness bit per pending closure, and answers whole batches with a
//! single periodic update transaction.
//!
//! The default stance is rejective: anything the watchtower does not
//! recognize as the exact latest commitment gets bit 0, which on-chain
//! means the fail-safe timeout rather than a payout.

use crate::chain::{ExecStatus, SimChain, Tx};
use crate::contracts::{Call, ConfirmationSet, Contract};
use crate::crypto::{verify, Digest, KeyPair, PublicKey};
use crate::types::{hash_commit, ChannelState, Cid, Nonce};
use crate::wire::{payment_sign_payload, receipt_sign_payload, WatchtowerReceipt, WatchtowerSubmission};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::PathBuf;
use thiserror::Error;

/// Latest commitment the watchtower holds for one channel. Storage is
/// O(1) per channel: each new submission replaces the previous record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommitmentRecord {
    pub idx: u128,
    pub h_s: Digest,
    pub sig_a: crate::crypto::Signature,
    pub sig_b: crate::crypto::Signature,
}

/// Party keys the watchtower verifies submissions against.
#[derive(Clone, Copy, Debug)]
pub struct ChannelRegistration {
    pub pk_a: PublicKey,
    pub pk_b: PublicKey,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("channel not registered with this watchtower")]
    UnknownChannel,
    #[error("channel closing; no further states accepted")]
    ChannelClosing,
    #[error("stale index; current is {current}")]
    StaleIdx { current: u128 },
    #[error("signature verification failed")]
    BadSignature,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegisterError {
    #[error("no protection deposit found for this channel")]
    NoDeposit,
    #[error("tower contract missing")]
    NoTowerContract,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfsError {
    #[error("pending entry references a channel with no observed closure event")]
    MissingEvent(Cid),
    #[error("pending entry state disagrees with the observed event")]
    StateMismatch(Cid),
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"TWSNAP01";
const SNAPSHOT_RECORD_LEN: usize = 199; // cid 20 + idx 16 + h 32 + sigs 130 + flags 1
const FLAG_FROZEN: u8 = 0x01;

/// The watchtower daemon state.
pub struct WatchtowerService {
    kp: KeyPair,
    tower: Cid,
    /// Blocks between update submissions. Must stay below the channels'
    /// tolerance timeout or the tower forfeits fees.
    pub period: u64,
    next_due: u64,
    offline: Vec<(u64, u64)>,
    registrations: BTreeMap<Cid, ChannelRegistration>,
    records: BTreeMap<Cid, CommitmentRecord>,
    frozen: BTreeSet<Cid>,
    /// Latest closure/dispute payload seen per channel; disputes
    /// supersede the original close.
    latest_event: BTreeMap<Cid, (ChannelState, Nonce)>,
    scanned_to: u64,
    snapshot_path: Option<PathBuf>,
    awaiting: Option<Digest>,
    tx_seq: u64,
    pub updates_submitted: u64,
}

impl WatchtowerService {
    pub fn new(kp: KeyPair, tower: Cid, period: u64) -> WatchtowerService {
        WatchtowerService {
            kp,
            tower,
            period,
            next_due: 0,
            offline: vec![],
            registrations: BTreeMap::new(),
            records: BTreeMap::new(),
            frozen: BTreeSet::new(),
            latest_event: BTreeMap::new(),
            scanned_to: 0,
            snapshot_path: None,
            awaiting: None,
            tx_seq: 0,
            updates_submitted: 0,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.kp.public()
    }

    pub fn tower_address(&self) -> Cid {
        self.tower
    }

    /// Fault injection: the service neither reads the chain nor submits
    /// while `now` falls in any of these inclusive windows.
    pub fn set_offline_windows(&mut self, windows: Vec<(u64, u64)>) {
        self.offline = windows;
    }

    pub fn is_offline(&self, now: u64) -> bool {
        self.offline.iter().any(|&(from, until)| now >= from && now <= until)
    }

    /// Persist commitments to `path`, replaying any records already
    /// there (restart recovery).
    pub fn set_snapshot_path(&mut self, path: PathBuf) -> std::io::Result<()> {
        if path.exists() {
            let bytes = std::fs::read(&path)?;
            self.load_snapshot(&bytes)?;
        }
        self.snapshot_path = Some(path);
        Ok(())
    }

    /// Accept a channel under protection after confirming its customer
    /// actually deposited at the tower contract.
    pub fn register_channel(
        &mut self,
        chain: &SimChain,
        cid: Cid,
        pk_a: PublicKey,
        pk_b: PublicKey,
    ) -> Result<(), RegisterError> {
        let Some(Contract::Tower(tower)) = chain.contract(&self.tower) else {
            return Err(RegisterError::NoTowerContract);
        };
        let deposited = tower.balances.get(&cid).map_or(0, |e| e.deposit);
        if deposited == 0 {
            return Err(RegisterError::NoDeposit);
        }
        self.registrations.insert(cid, ChannelRegistration { pk_a, pk_b });
        Ok(())
    }

    pub fn record(&self, cid: &Cid) -> Option<&CommitmentRecord> {
        self.records.get(cid)
    }

    /// Verify and record a submitted commitment, returning the signed
    /// receipt for both parties. Only the blinded hash is stored; the
    /// watchtower never sees balances or nonces.
    pub fn ingest(&mut self, submission: &WatchtowerSubmission) -> Result<WatchtowerReceipt, IngestError> {
        let reg = self
            .registrations
            .get(&submission.cid)
            .copied()
            .ok_or(IngestError::UnknownChannel)?;
        if self.frozen.contains(&submission.cid) {
            return Err(IngestError::ChannelClosing);
        }
        if let Some(existing) = self.records.get(&submission.cid) {
            if submission.idx <= existing.idx {
                return Err(IngestError::StaleIdx { current: existing.idx });
            }
        }
        let payload = payment_sign_payload(&submission.cid, submission.idx, &submission.h_s);
        if !verify(&reg.pk_a, &payload, &submission.sig_a)
            || !verify(&reg.pk_b, &payload, &submission.sig_b)
        {
            return Err(IngestError::BadSignature);
        }
        let record = CommitmentRecord {
            idx: submission.idx,
            h_s: submission.h_s,
            sig_a: submission.sig_a,
            sig_b: submission.sig_b,
        };
        self.records.insert(submission.cid, record);
        self.append_snapshot(&submission.cid, &record, false);
        let receipt = WatchtowerReceipt {
            cid: submission.cid,
            idx: submission.idx,
            h_s: submission.h_s,
            sig_wt: self
                .kp
                .sign(&receipt_sign_payload(&submission.cid, submission.idx, &submission.h_s)),
        };
        Ok(receipt)
    }

    /// Re-send the stored receipt for a channel (pure read), for parties
    /// that missed the original delivery.
    pub fn reissue_receipt(&self, cid: &Cid) -> Option<WatchtowerReceipt> {
        let record = self.records.get(cid)?;
        Some(WatchtowerReceipt {
            cid: *cid,
            idx: record.idx,
            h_s: record.h_s,
            sig_wt: self.kp.sign(&receipt_sign_payload(cid, record.idx, &record.h_s)),
        })
    }

    /// One freshness bit for a closure attempt: 1 only when both the
    /// index and the recomputed commitment match the stored record.
    /// Unknown channels default to 0.
    pub fn decide(&self, cid: &Cid, state: &ChannelState, r: &Nonce) -> bool {
        match self.records.get(cid) {
            Some(record) => record.idx == state.idx && hash_commit(state, r) == record.h_s,
            None => false,
        }
    }

    /// Catch up on chain events: freeze channels that started closing
    /// and remember the latest (state, r) per channel for decisions.
    pub fn observe(&mut self, chain: &SimChain) {
        let now = chain.now();
        for event in chain.events() {
            if event.height < self.scanned_to {
                continue;
            }
            if self.registrations.contains_key(&event.cid) {
                self.latest_event.insert(event.cid, (event.state, event.r));
                if self.frozen.insert(event.cid) {
                    if let Some(record) = self.records.get(&event.cid).copied() {
                        self.append_snapshot(&event.cid, &record, true);
                    }
                }
            }
        }
        self.scanned_to = now + 1;
    }

    /// Decisions for the tower contract's current pending entry, in the
    /// entry's own order. Any disagreement between the entry and the
    /// observed events aborts the update (safety over liveness).
    pub fn pending_decisions(&self, chain: &SimChain) -> Result<Vec<(Cid, bool)>, ConfsError> {
        let Some(Contract::Tower(tower)) = chain.contract(&self.tower) else {
            return Ok(vec![]);
        };
        let Some(entry) = tower.pending() else {
            return Ok(vec![]);
        };
        let mut decisions = Vec::with_capacity(entry.len());
        for (cid, entry_state) in entry.cids.iter().zip(entry.states.iter()) {
            let Some((event_state, r)) = self.latest_event.get(cid) else {
                return Err(ConfsError::MissingEvent(*cid));
            };
            if event_state != entry_state {
                return Err(ConfsError::StateMismatch(*cid));
            }
            decisions.push((*cid, self.decide(cid, event_state, r)));
        }
        Ok(decisions)
    }

    pub fn build_confs(decisions: &[(Cid, bool)]) -> ConfirmationSet {
        ConfirmationSet::new(decisions.iter().map(|&(_, bit)| bit).collect())
    }

    /// Drive the service one tick. Returns an update transaction when
    /// there are pending closures to answer and the schedule allows it;
    /// a reverted submission is retried on the next tick.
    pub fn tick(&mut self, chain: &SimChain) -> Option<Tx> {
        let now = chain.now();
        if self.is_offline(now) {
            return None;
        }
        self.observe(chain);
        if let Some(awaiting) = self.awaiting {
            {
                let receipt = chain.receipts().iter().rev().find(|r| r.tx_id == awaiting)?;
                self.awaiting = None;
                if receipt.status.is_ok() {
                    self.next_due = receipt.height + self.period;
                }
                // On revert: fall through and retry right away.
            }
        }
        let decisions = match self.pending_decisions(chain) {
            Ok(d) if !d.is_empty() => d,
            _ => return None,
        };
        if now < self.next_due {
            return None;
        }
        let confs = Self::build_confs(&decisions);
        let tx = Tx::signed(&self.kp, self.tx_seq, self.tower, 0, Call::TowerUpdate { confs });
        self.tx_seq += 1;
        self.awaiting = Some(tx.id());
        self.updates_submitted += 1;
        Some(tx)
    }

    /// True once the service has confirmed its outstanding update.
    pub fn last_update_confirmed(&self, chain: &SimChain) -> bool {
        match self.awaiting {
            None => true,
            Some(id) => chain
                .receipts()
                .iter()
                .rev()
                .any(|r| r.tx_id == id && matches!(r.status, ExecStatus::Ok)),
        }
    }

    /// Serialized size of the commitment store: versioned header plus
    /// one length-prefixed record per channel.
    pub fn storage_bytes(&self) -> usize {
        SNAPSHOT_MAGIC.len() + self.records.len() * (2 + SNAPSHOT_RECORD_LEN)
    }

    pub fn channel_count(&self) -> usize {
        self.records.len()
    }

    fn encode_record(cid: &Cid, record: &CommitmentRecord, frozen: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + SNAPSHOT_RECORD_LEN);
        out.extend_from_slice(&(SNAPSHOT_RECORD_LEN as u16).to_be_bytes());
        out.extend_from_slice(&cid.0);
        out.extend_from_slice(&record.idx.to_be_bytes());
        out.extend_from_slice(&record.h_s.0);
        out.extend_from_slice(&record.sig_a.0);
        out.extend_from_slice(&record.sig_b.0);
        out.push(if frozen { FLAG_FROZEN } else { 0 });
        out
    }

    fn append_snapshot(&self, cid: &Cid, record: &CommitmentRecord, frozen: bool) {
        let Some(path) = &self.snapshot_path else {
            return;
        };
        let mut bytes = Vec::new();
        if !path.exists() {
            bytes.extend_from_slice(SNAPSHOT_MAGIC);
        }
        bytes.extend_from_slice(&Self::encode_record(cid, record, frozen));
        let result = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(&bytes));
        if let Err(err) = result {
            panic!("watchtower snapshot append failed: {err}");
        }
    }

    fn load_snapshot(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
        if bytes.len() < SNAPSHOT_MAGIC.len() || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(bad("bad snapshot header"));
        }
        let mut rest = &bytes[8..];
        while !rest.is_empty() {
            if rest.len() < 2 {
                return Err(bad("truncated record length"));
            }
            let len = usize::from(u16::from_be_bytes([rest[0], rest[1]]));
            rest = &rest[2..];
            if len != SNAPSHOT_RECORD_LEN || rest.len() < len {
                return Err(bad("truncated snapshot record"));
            }
            let (rec, tail) = rest.split_at(len);
            rest = tail;
            let cid = Cid::from_slice(&rec[0..20]).ok_or_else(|| bad("bad cid"))?;
            let record = CommitmentRecord {
                idx: u128::from_be_bytes(rec[20..36].try_into().expect("fixed split")),
                h_s: Digest::from_slice(&rec[36..68]).expect("fixed split"),
                sig_a: crate::crypto::Signature::from_slice(&rec[68..133]).expect("fixed split"),
                sig_b: crate::crypto::Signature::from_slice(&rec[133..198]).expect("fixed split"),
            };
            // Later records win: the file is an append-only log.
            self.records.insert(cid, record);
            if rec[198] & FLAG_FROZEN != 0 {
                self.frozen.insert(cid);
            }
        }
        Ok(())
    }
}
