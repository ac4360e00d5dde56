//! Deterministic single-chain simulator. Logical time is block height:
//! one block per `mine_block` call, transactions drain in FIFO order,
//! and every contract state transition happens inside block production.
//! There are no forks, no fees, and no mempool policy; two runs fed the
//! same transactions produce byte-identical blocks, events, and receipts.

use crate::contracts::{call_contract, Call, Caller, Contract, ContractStore, ExecEnv, RevertReason, SubCallRecord};
use crate::crypto::{sha256_concat, verify, Digest, KeyPair, PublicKey, Signature};
use crate::types::{ChannelState, Cid, Nonce};
use crate::wire::TAG_TX;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Closure,
    Dispute,
}

/// Contract-emitted event, readable by off-chain clients. Ordered by
/// (height, intra-block index); the log is append-only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub cid: Cid,
    pub state: ChannelState,
    pub r: Nonce,
    pub height: u64,
    pub index: u32,
}

/// A signed contract call. `seq` makes transaction ids unique per sender.
#[derive(Clone, Debug)]
pub struct Tx {
    pub sender: PublicKey,
    pub seq: u64,
    pub target: Cid,
    pub value: u128,
    pub call: Call,
    pub sig: Signature,
}

impl Tx {
    /// Bytes the sender signs: a domain tag, the sender, sequence,
    /// target, attached value, and the canonical call encoding.
    pub fn sign_payload(sender: &PublicKey, seq: u64, target: &Cid, value: u128, call: &Call) -> Vec<u8> {
        let mut out = vec![TAG_TX];
        out.extend_from_slice(&sender.0);
        out.extend_from_slice(&seq.to_be_bytes());
        out.extend_from_slice(&target.0);
        out.extend_from_slice(&value.to_be_bytes());
        out.extend_from_slice(&call.encode());
        out
    }

    pub fn signed(kp: &KeyPair, seq: u64, target: Cid, value: u128, call: Call) -> Tx {
        let payload = Tx::sign_payload(&kp.public(), seq, &target, value, &call);
        Tx {
            sender: kp.public(),
            seq,
            target,
            value,
            sig: kp.sign(&payload),
            call,
        }
    }

    pub fn id(&self) -> Digest {
        let payload = Tx::sign_payload(&self.sender, self.seq, &self.target, self.value, &self.call);
        sha256_concat(&[&payload, &self.sig.0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    Reverted(RevertReason),
}

impl ExecStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, ExecStatus::Ok)
    }
}

/// Execution record for one transaction.
#[derive(Clone, Debug, Serialize)]
pub struct TxReceipt {
    pub tx_id: Digest,
    pub height: u64,
    pub index: u32,
    pub sender: PublicKey,
    pub target: Cid,
    pub method: &'static str,
    pub status: ExecStatus,
    pub subcalls: Vec<SubCallRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub height: u64,
    pub hash: Digest,
    pub parent_hash: Digest,
    pub tx_root: Digest,
    pub tx_ids: Vec<Digest>,
}

/// Block hash rule: H(parent_hash || height as 8-byte BE || tx_root),
/// with tx_root = H(concatenated tx ids).
pub fn block_hash(parent_hash: &Digest, height: u64, tx_root: &Digest) -> Digest {
    sha256_concat(&[&parent_hash.0, &height.to_be_bytes(), &tx_root.0])
}

pub fn tx_root(tx_ids: &[Digest]) -> Digest {
    let parts: Vec<&[u8]> = tx_ids.iter().map(|d| d.0.as_slice()).collect();
    sha256_concat(&parts)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubmitError {
    #[error("unknown target contract {0}")]
    UnknownTarget(Cid),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("height range {from}..={to} exceeds chain tip {now}")]
    RangeBeyondTip { from: u64, to: u64, now: u64 },
    #[error("empty or inverted height range")]
    BadRange,
}

pub struct SimChain {
    blocks: Vec<Block>,
    block_hashes: Vec<Digest>,
    events: Vec<Event>,
    receipts: Vec<TxReceipt>,
    pub store: ContractStore,
    queue: VecDeque<Tx>,
    next_contract_seq: u64,
}

impl Default for SimChain {
    fn default() -> SimChain {
        SimChain::new()
    }
}

impl SimChain {
    pub fn new() -> SimChain {
        let root = tx_root(&[]);
        let genesis = Block {
            height: 0,
            hash: block_hash(&Digest::ZERO, 0, &root),
            parent_hash: Digest::ZERO,
            tx_root: root,
            tx_ids: vec![],
        };
        let hash = genesis.hash;
        SimChain {
            blocks: vec![genesis],
            block_hashes: vec![hash],
            events: vec![],
            receipts: vec![],
            store: ContractStore::default(),
            queue: VecDeque::new(),
            next_contract_seq: 0,
        }
    }

    /// Height of the latest mined block.
    pub fn now(&self) -> u64 {
        self.blocks.last().expect("genesis always present").height
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_hashes(&self) -> &[Digest] {
        &self.block_hashes
    }

    pub fn receipts(&self) -> &[TxReceipt] {
        &self.receipts
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Genesis allocation; the harness funds actors before a run.
    pub fn fund_account(&mut self, pk: PublicKey, amount: u128) {
        self.store.credit(pk, amount);
    }

    pub fn balance_of(&self, pk: &PublicKey) -> u128 {
        self.store.balance_of(pk)
    }

    pub fn total_tokens(&self) -> u128 {
        self.store.total_tokens()
    }

    /// Deploy a contract at a fresh deterministic address.
    pub fn deploy(&mut self, label: &str, contract: Contract) -> Cid {
        let cid = Cid::derive(label, self.next_contract_seq);
        self.next_contract_seq += 1;
        let prev = self.store.contracts.insert(cid, contract);
        assert!(prev.is_none(), "contract address collision");
        cid
    }

    pub fn contract(&self, cid: &Cid) -> Option<&Contract> {
        self.store.contracts.get(cid)
    }

    /// Queue a signed call for the next block. Unknown targets are
    /// rejected immediately rather than reverting later.
    pub fn submit_tx(&mut self, tx: Tx) -> Result<Digest, SubmitError> {
        if !self.store.contracts.contains_key(&tx.target) {
            return Err(SubmitError::UnknownTarget(tx.target));
        }
        let id = tx.id();
        self.queue.push_back(tx);
        Ok(id)
    }

    /// Hashes of the most recent `min(n, now + 1)` blocks, newest first.
    pub fn recent_block_hashes(&self, n: u64) -> Vec<Digest> {
        self.block_hashes
            .iter()
            .rev()
            .take(n as usize)
            .copied()
            .collect()
    }

    /// All events in `[from, to]`, optionally filtered by kind. Pure read.
    pub fn read_events(
        &self,
        from: u64,
        to: u64,
        kind: Option<EventKind>,
    ) -> Result<Vec<Event>, ChainError> {
        if from > to {
            return Err(ChainError::BadRange);
        }
        if to > self.now() {
            return Err(ChainError::RangeBeyondTip { from, to, now: self.now() });
        }
        Ok(self
            .events
            .iter()
            .filter(|e| e.height >= from && e.height <= to && kind.is_none_or(|k| k == e.kind))
            .copied()
            .collect())
    }

    /// Drain the queue in FIFO order, apply each call atomically, and
    /// append one block. `now` seen by contract code is the height of
    /// the block being produced.
    pub fn mine_block(&mut self) -> &Block {
        let height = self.now() + 1;
        let txs: Vec<Tx> = self.queue.drain(..).collect();
        let mut tx_ids = Vec::with_capacity(txs.len());
        let mut staged_events: Vec<Event> = Vec::new();
        let mut block_receipts: Vec<TxReceipt> = Vec::new();

        for (index, tx) in txs.into_iter().enumerate() {
            let tx_id = tx.id();
            tx_ids.push(tx_id);
            let mut subcalls = Vec::new();
            let status = Self::execute_tx(
                &mut self.store,
                &self.block_hashes,
                &mut staged_events,
                &mut subcalls,
                height,
                &tx,
            );
            block_receipts.push(TxReceipt {
                tx_id,
                height,
                index: index as u32,
                sender: tx.sender,
                target: tx.target,
                method: tx.call.method_name(),
                status,
                subcalls,
            });
        }

        for (index, event) in staged_events.iter_mut().enumerate() {
            event.height = height;
            event.index = index as u32;
        }
        self.events.extend(staged_events);
        self.receipts.extend(block_receipts);

        let root = tx_root(&tx_ids);
        let parent_hash = *self.block_hashes.last().expect("genesis always present");
        let block = Block {
            height,
            hash: block_hash(&parent_hash, height, &root),
            parent_hash,
            tx_root: root,
            tx_ids,
        };
        self.block_hashes.push(block.hash);
        self.blocks.push(block);
        self.blocks.last().expect("just pushed")
    }

    fn execute_tx(
        store: &mut ContractStore,
        block_hashes: &[Digest],
        staged_events: &mut Vec<Event>,
        subcalls: &mut Vec<SubCallRecord>,
        height: u64,
        tx: &Tx,
    ) -> ExecStatus {
        let payload = Tx::sign_payload(&tx.sender, tx.seq, &tx.target, tx.value, &tx.call);
        if !verify(&tx.sender, &payload, &tx.sig) {
            return ExecStatus::Reverted(RevertReason::BadTxSignature);
        }
        let snapshot = store.clone();
        let event_mark = staged_events.len();
        let result = store.debit(tx.sender, tx.value).and_then(|()| {
            let mut env = ExecEnv {
                now: height,
                block_hashes,
                store,
                events: staged_events,
                subcalls,
            };
            call_contract(&mut env, Caller::Account(tx.sender), tx.target, &tx.call, tx.value)
        });
        match result {
            Ok(()) => ExecStatus::Ok,
            Err(reason) => {
                *store = snapshot;
                staged_events.truncate(event_mark);
                ExecStatus::Reverted(reason)
            }
        }
    }
}
