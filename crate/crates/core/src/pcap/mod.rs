//! Capture ingestion and bidirectional flow assembly.
//!
//! [`PcapReader`] turns a classic pcap file into [`PacketSummary`] records and
//! [`assemble_flows`] groups them into [`FlowBuffer`]s keyed by a canonical
//! 5-tuple, split by the flow timeout and by TCP FIN/RST teardown.

mod flow;
mod packet;
mod reader;

pub use flow::{assemble_flows, FlowAssembler, FlowBuffer, FlowConfig, REORDER_WINDOW_US};
pub use packet::{Direction, Endpoint, FlowKey, PacketSummary, Protocol, TcpFlags};
pub use reader::{read_pcap, PcapReader, ReadStats, LINKTYPE_ETHERNET};
