//! Monte Carlo end-to-end retrieval sessions.
//!
//! Each trial owns its random stream, seeded as `seed + trial`, and draws in
//! a fixed order: first the full chain walk X_0..X_{T+1}, then one query draw
//! per time step. Server-side message generation uses a separate salted
//! stream, so the query sequence is a function of (seed, trial) alone and a
//! live wire session reproduces it byte for byte.
//!
//! Download accounting counts message payload bytes only; framing overhead is
//! excluded. Messages are regenerated fresh at every time step, never cached
//! across steps.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::markov::{Source, TransitionMatrix, UContext};
use crate::rational::{to_f64, Rat};
use crate::scheme::{sample_query, PrivacyPattern, QuerySymbol};
use crate::stats::plug_in_mi;
use crate::verifier::EncoderKind;
use crate::{Error, Result};

const SERVER_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// One fresh L-bit message payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message(pub Vec<u8>);

/// Configuration of a session run.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub matrix: TransitionMatrix,
    pub pattern: PrivacyPattern,
    /// Last query time T; requests run to T+1.
    pub horizon: usize,
    /// Message length L in bits; must be a positive multiple of 8.
    pub message_bits: usize,
    pub trials: usize,
    pub seed: u64,
    pub initial: [Rat; 2],
    pub encoder: EncoderKind,
}

impl SessionConfig {
    pub fn new(matrix: TransitionMatrix, pattern: PrivacyPattern) -> SessionConfig {
        SessionConfig {
            matrix,
            pattern,
            horizon: 1,
            message_bits: 1024,
            trials: 100_000,
            seed: 0,
            initial: crate::verifier::uniform_initial(),
            encoder: EncoderKind::Scheme,
        }
    }

    pub fn message_bytes(&self) -> usize {
        self.message_bits / 8
    }

    fn check(&self) -> Result<()> {
        if self.trials < 1 || self.horizon < 1 {
            return Err(Error::Parse("trials and horizon must be >= 1".into()));
        }
        if self.message_bits == 0 || self.message_bits % 8 != 0 {
            return Err(Error::Parse("message bits must be a positive multiple of 8".into()));
        }
        Ok(())
    }
}

/// Accumulated statistics over all trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionStats {
    /// Per time step: (sum of downloaded payload bytes, trial count).
    pub per_t_bytes: Vec<(u64, u64)>,
    /// Per time step counts over the three query symbols.
    pub query_histogram: Vec<[u64; 3]>,
    pub decode_failures: u64,
    /// Query sequence of every trial, in trial order.
    pub query_trace: Vec<Vec<QuerySymbol>>,
}

impl SessionStats {
    fn new(horizon: usize) -> SessionStats {
        SessionStats {
            per_t_bytes: vec![(0, 0); horizon + 1],
            query_histogram: vec![[0; 3]; horizon + 1],
            decode_failures: 0,
            query_trace: Vec::new(),
        }
    }

    /// Mean downloaded messages per trial at time t (bytes divided by L/8).
    pub fn empirical_inverse_rate(&self, t: usize, message_bytes: usize) -> f64 {
        let (bytes, trials) = self.per_t_bytes[t];
        bytes as f64 / (trials as f64 * message_bytes as f64)
    }
}

/// Server answer: payloads of exactly the requested sources, concatenated in
/// fixed A-then-B order.
pub fn answer(q: QuerySymbol, store: &(Message, Message)) -> Vec<u8> {
    let mut out = Vec::with_capacity(q.len() * store.0 .0.len());
    if q.contains(Source::A) {
        out.extend_from_slice(&store.0 .0);
    }
    if q.contains(Source::B) {
        out.extend_from_slice(&store.1 .0);
    }
    out
}

/// Extracts the requested message from an answer, using the fixed
/// concatenation order.
pub fn decode(ans: &[u8], q: QuerySymbol, x: Source) -> Result<Message> {
    if !q.contains(x) {
        return Err(Error::NotDecodable { x, q });
    }
    let block = ans.len() / q.len();
    let offset = match (q, x) {
        (QuerySymbol::AB, Source::B) => block,
        _ => 0,
    };
    Ok(Message(ans[offset..offset + block].to_vec()))
}

/// Where answers come from: the in-process server or a live connection.
pub trait AnswerSource {
    fn answer(&mut self, t: u64, q: QuerySymbol) -> Result<Vec<u8>>;
    /// Ground-truth payload for verification, when available.
    fn expected_payload(&mut self, t: u64, x: Source) -> Option<Vec<u8>>;
}

/// Reference server logic: fresh uniformly random messages per time step,
/// materialized lazily in query-time order.
pub struct InProcessServer {
    rng: ChaCha8Rng,
    store: HashMap<u64, (Message, Message)>,
    message_bytes: usize,
}

impl InProcessServer {
    pub fn new(seed: u64, message_bytes: usize) -> InProcessServer {
        InProcessServer {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store: HashMap::new(),
            message_bytes,
        }
    }

    fn store_for(&mut self, t: u64) -> &(Message, Message) {
        let bytes = self.message_bytes;
        let rng = &mut self.rng;
        self.store.entry(t).or_insert_with(|| {
            let mut fresh = || {
                let mut buf = vec![0u8; bytes];
                rng.fill_bytes(&mut buf);
                Message(buf)
            };
            (fresh(), fresh())
        })
    }
}

impl AnswerSource for InProcessServer {
    fn answer(&mut self, t: u64, q: QuerySymbol) -> Result<Vec<u8>> {
        Ok(answer(q, self.store_for(t)))
    }

    fn expected_payload(&mut self, t: u64, x: Source) -> Option<Vec<u8>> {
        let store = self.store_for(t);
        Some(match x {
            Source::A => store.0 .0.clone(),
            Source::B => store.1 .0.clone(),
        })
    }
}

fn sample_source(p_a: f64, draw: f64) -> Source {
    if draw < p_a {
        Source::A
    } else {
        Source::B
    }
}

/// Chain walk and per-step query choices of one trial. Pure function of
/// (config, trial index).
pub fn trial_requests_and_queries(
    cfg: &SessionConfig,
    trial: u64,
) -> Result<(Vec<Source>, Vec<QuerySymbol>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial));
    let len = cfg.horizon + 2;
    let mut xs = Vec::with_capacity(len);
    xs.push(sample_source(to_f64(&cfg.initial[0]), rng.gen::<f64>()));
    for _ in 1..len {
        let cur = *xs.last().unwrap();
        let p_a = to_f64(cfg.matrix.prob(cur, Source::A));
        xs.push(sample_source(p_a, rng.gen::<f64>()));
    }
    let mut qs = Vec::with_capacity(cfg.horizon + 1);
    for t in 0..=cfg.horizon {
        let gap = cfg.pattern.gap(t);
        let u = UContext::new(xs[cfg.pattern.last_on(t)], xs[t + 1]);
        let dist = cfg.encoder.distribution(&cfg.matrix, gap, xs[t], u)?;
        qs.push(sample_query(&dist, rng.gen::<f64>()));
    }
    Ok((xs, qs))
}

/// Runs all trials against a per-trial answer source. `make_source` is called
/// once per trial; one source = one session.
pub fn run_session_with<S, F>(cfg: &SessionConfig, mut make_source: F) -> Result<SessionStats>
where
    S: AnswerSource,
    F: FnMut(u64) -> Result<S>,
{
    cfg.check()?;
    let mut stats = SessionStats::new(cfg.horizon);
    for trial in 0..cfg.trials as u64 {
        let (xs, qs) = trial_requests_and_queries(cfg, trial)?;
        let mut source = make_source(trial)?;
        for (t, &q) in qs.iter().enumerate() {
            let ans = source.answer(t as u64, q)?;
            stats.per_t_bytes[t].0 += ans.len() as u64;
            stats.per_t_bytes[t].1 += 1;
            stats.query_histogram[t][q.index()] += 1;
            match decode(&ans, q, xs[t]) {
                Ok(msg) => {
                    if let Some(expect) = source.expected_payload(t as u64, xs[t]) {
                        if msg.0 != expect {
                            stats.decode_failures += 1;
                        }
                    }
                }
                Err(Error::NotDecodable { .. }) => stats.decode_failures += 1,
                Err(e) => return Err(e),
            }
        }
        stats.query_trace.push(qs);
    }
    Ok(stats)
}

/// Full in-process session: scheme user against the reference server.
/// Deterministic given the seed.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionStats> {
    let bytes = cfg.message_bytes();
    let seed = cfg.seed;
    run_session_with(cfg, |trial| {
        Ok(InProcessServer::new(
            seed.wrapping_add(trial) ^ SERVER_SALT,
            bytes,
        ))
    })
}

/// Plug-in mutual information (bits) between the encoder context
/// (X at the last ON time before t, X_{t+1}) and the query prefix Q_0..Q_t,
/// estimated from trial counts. Report-only: the exact zero-leakage assertion
/// lives in the verifier.
pub fn empirical_leakage(cfg: &SessionConfig, t: usize) -> Result<f64> {
    cfg.check()?;
    assert!(t <= cfg.horizon);
    let mut counts: HashMap<((Source, Source), Vec<QuerySymbol>), u64> = HashMap::new();
    for trial in 0..cfg.trials as u64 {
        let (xs, qs) = trial_requests_and_queries(cfg, trial)?;
        let u = (xs[cfg.pattern.last_on(t)], xs[t + 1]);
        *counts.entry((u, qs[..=t].to_vec())).or_insert(0) += 1;
    }
    Ok(plug_in_mi(&counts))
}
