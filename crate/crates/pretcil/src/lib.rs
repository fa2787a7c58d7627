pub mod api;
pub mod log;
pub mod model_text;
pub mod runner;
pub mod server;
pub mod simulate;
pub mod sweep;
