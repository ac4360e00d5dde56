//! Run traces and metrics. A trace is one JSON object per block
//! (events, receipts, actor actions); metrics summarize the run the way
//! the protocol's cost story is measured: wire bytes per message class,
//! watchtower storage, bitmap bytes per update, and blocks to payout.

use super::actors::WireStats;
use crate::chain::{Event, TxReceipt};
use crate::crypto::Digest;
use crate::types::ChannelState;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct BlockRecord {
    pub height: u64,
    pub hash: Digest,
    pub events: Vec<Event>,
    pub receipts: Vec<TxReceipt>,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunMetrics {
    pub close_height: Option<u64>,
    pub finalize_height: Option<u64>,
    /// Blocks from the close transaction's block to the payout's block.
    pub blocks_to_payout: Option<u64>,
    pub payout_state: Option<ChannelState>,
    pub final_balance_a: u128,
    pub final_balance_b: u128,
    pub wire: WireStats,
    pub watchtower_storage_bytes: usize,
    pub watchtower_channels: usize,
    /// Bitmap payload bytes (without the length prefix) per landed update.
    pub bitmap_bytes: Vec<usize>,
    pub update_tx_count: u64,
    /// Submissions the watchtower refused (tampered, stale, post-closure).
    pub ingest_rejections: u64,
    /// Tokens returned to the customer by a successful challenge.
    pub challenge_refund: Option<u128>,
    /// Short-lived mode: index gap between the fresh-accepted closing
    /// state and the true latest, with the payment count in the
    /// freshness window that bounds it.
    pub fresh_close_idx_gap: Option<u128>,
    pub payments_in_freshness_window: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTrace {
    pub blocks: Vec<BlockRecord>,
    pub metrics: RunMetrics,
    /// In-run assertion failures; an empty list is the pass condition.
    pub violations: Vec<String>,
}

impl RunTrace {
    /// JSON-lines trace: exactly one object per block, byte-stable
    /// across runs with the same config.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            out.push_str(&serde_json::to_string(block).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn metrics_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            metrics: &'a RunMetrics,
            violations: &'a [String],
        }
        serde_json::to_string_pretty(&Report { metrics: &self.metrics, violations: &self.violations })
            .expect("metrics serialize")
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}
