//! ON-OFF privacy for two information sources with Markov-correlated requests.
//!
//! A user retrieves the latest message of one of two sources (`A` or `B`) from
//! a single server, toggling a per-timestep privacy flag. Queries must hide the
//! request at every ON time and at all future times, even though requests are
//! correlated over time. This crate provides:
//!
//! - [`markov`]: exact rational 2-state chain machinery and the bridge
//!   distribution that every scheme formula consumes,
//! - [`scheme`]: the optimal download rate and the randomized query encoder,
//! - [`verifier`]: exhaustive, exact verification of decodability, privacy and
//!   cost over finite horizons,
//! - [`converse`]: the matching lower bound as a closed-form box LP plus a
//!   brute-force grid oracle,
//! - [`sim`]: seeded Monte Carlo retrieval sessions with empirical rate and
//!   leakage measurement,
//! - [`net`]: a minimal binary frame protocol and reference server/client so
//!   sessions run over a real socket.
//!
//! All probability computation is exact rational arithmetic; floats appear
//! only in sampling and in human-readable mutual-information reporting.

pub mod converse;
pub mod markov;
pub mod net;
pub mod rational;
pub mod scheme;
pub mod sim;
pub mod stats;
pub mod verifier;

pub use markov::{BridgeDistribution, Source, TransitionMatrix, UContext};
pub use rational::Rat;
pub use scheme::{EncoderDistribution, PiFloor, PrivacyFlag, PrivacyPattern, QuerySymbol};

/// Errors surfaced by the scheme, verifier and converse modules.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Row sums of the proposed transition matrix are not 1, or an entry is
    /// outside [0, 1].
    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),
    /// A multi-step transition probability needed as a denominator is zero.
    #[error("degenerate context at gap {gap}: p(next|last_on) = 0 for {context}")]
    DegenerateContext { gap: usize, context: UContext },
    /// The requested source has probability zero in the given context, so no
    /// encoder distribution exists.
    #[error("impossible context: p({x}|{context}) = 0 at gap {gap}")]
    ImpossibleContext {
        gap: usize,
        x: Source,
        context: UContext,
    },
    /// Joint-table horizon exceeds the enumeration guard.
    #[error("horizon {0} too large for exact enumeration (max {max})", max = verifier::MAX_HORIZON)]
    HorizonTooLarge(usize),
    /// (z1, z2) outside the converse feasibility box.
    #[error("infeasible converse point: z1 or z2 outside [0, pi]")]
    Infeasible,
    /// Requested source not contained in the query; the answer cannot be
    /// decoded.
    #[error("not decodable: requested {x} but query was {q}")]
    NotDecodable { x: Source, q: QuerySymbol },
    /// Malformed textual input (matrix, pattern, fraction).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
