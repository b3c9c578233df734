//! HTTP service for robot controllers and the experiment UI.
//!
//! A robot controller posts the utterance to `/speak`, receives a playback
//! id, and calls `/speak/{id}/start` the moment its speech begins. The
//! `/session/...` routes drive a listening session for the browser UI.

pub mod server;

pub use server::{router, AppState, AppStateBuilder};
