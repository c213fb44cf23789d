//! CGU lifecycle state machine.
//!
//! A [`Session`] consumes labeled utterances strictly in dialog order and
//! moves each CGU between `Open`, `Grounded` and `Canceled`:
//!
//! | act                                   | on Open                         | on Grounded                    |
//! |---------------------------------------|---------------------------------|--------------------------------|
//! | Initiate (fresh id)                   | creates the CGU                 |                                |
//! | Continue, Repeat                      | append                          | append                         |
//! | Repair, Req-Repair, Req-Ack           | append                          | reopen, stash degree           |
//! | Explicit-Ack, Repeat-Back, Move, Use  | ground with rule-based degree   | append, warn                   |
//! | Cancel                                | cancel, or re-ground with the stashed degree if reopened | revoke (cancel) |
//!
//! Any act on a canceled CGU is an error.

mod replay;
mod session;
mod validate;

pub use replay::{replay, Replay, ReplayError, Timeline, TimelineRow};
pub use session::{
    assign_degree, CguRecord, CguStatus, ClosedCgu, EngineError, Member, NotAcknowledging,
    Session, TransitionReport, Warning,
};
pub use validate::{validate, validate_with, Feasibility, Finding, FindingKind, Severity, ValidateOptions};
