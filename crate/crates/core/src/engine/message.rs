use std::sync::Arc;

use crate::graph::VertexId;

/// Name of a message's kind, used for tracing.
pub trait MessageKind {
    fn kind(&self) -> &'static str;
}

/// Messages exchanged between the driver and chunk workers.
///
/// Batches carry the sender's chunk index so receivers can apply them in a
/// fixed order; ownership of the record buffer moves with the message.
#[derive(Debug, Clone)]
pub enum Message {
    /// Start an iteration: compute outgoing contributions, reset ranks.
    Update { alpha: f32 },
    /// Run the exchange loop over local edges.
    Iterate,
    RankBatch {
        from: usize,
        records: Vec<(VertexId, f32)>,
    },
    LabelBatch {
        from: usize,
        records: Vec<(VertexId, VertexId)>,
    },
    /// The sender has finished writing its shared buffer for the receiver.
    BufferReady { from: usize },
    Control(Control),
}

#[derive(Debug, Clone)]
pub enum Control {
    /// Fold the shared accumulation buffer into local state.
    Fold,
    /// Close a label-propagation iteration: swap changed flags.
    Advance,
    /// Partial reduction result travelling up the tree.
    RankPartial { level: u32, values: Vec<f32> },
    LabelPartial { level: u32, values: Vec<VertexId> },
    /// Fully reduced buffer, shared by every worker.
    RankReduced(Arc<Vec<f32>>),
    LabelReduced(Arc<Vec<VertexId>>),
}

impl MessageKind for Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::Update { .. } => "Update",
            Message::Iterate => "Iterate",
            Message::RankBatch { .. } => "RankBatch",
            Message::LabelBatch { .. } => "LabelBatch",
            Message::BufferReady { .. } => "BufferReady",
            Message::Control(c) => match c {
                Control::Fold => "Fold",
                Control::Advance => "Advance",
                Control::RankPartial { .. } | Control::LabelPartial { .. } => "Partial",
                Control::RankReduced(_) | Control::LabelReduced(_) => "Reduced",
            },
        }
    }
}
