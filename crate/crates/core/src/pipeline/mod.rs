//! Orchestration of the neural stages behind a JSON wire protocol.

pub mod backend;
pub mod chunk;
pub mod mock;
pub mod protocol;
pub mod run;

pub use backend::{call, BackendEndpoints, BackendsFile, Endpoint, EndpointDescriptor, HttpEndpoint, SubprocessEndpoint};
pub use chunk::{plan_chunks, Chunk, ChunkConfig};
pub use mock::{mock_backends, serve_lines, MockEndpoint, MockMode};
pub use protocol::{Request, RequestBody, Response, ResponseBody, PROTOCOL_VERSION};
pub use run::{run_pipeline, PipelineConfig, PipelineOutput, RunMetadata, RUN_METADATA_FILE};
