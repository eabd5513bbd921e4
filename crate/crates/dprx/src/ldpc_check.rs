//! Code sanity run: noiseless round trips and a binary-input AWGN ladder.

use dprx_core::ldpc::{random_message, spa_decode_with, DecoderConfig, DecoderWorkspace, LdpcCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::sweep::derive_seed;

const DOMAIN_ROUNDTRIP: u64 = 101;
const DOMAIN_AWGN: u64 = 102;

#[derive(Debug, Clone, PartialEq)]
pub struct LadderPoint {
    pub ebn0_db: f64,
    pub blocks: u64,
    pub raw_bit_errors: u64,
    pub decoded_bit_errors: u64,
    pub block_errors: u64,
    pub converged_blocks: u64,
    /// Decodes where the converged flag disagrees with the syndrome of the
    /// returned codeword.
    pub syndrome_mismatches: u64,
    pub bits: u64,
}

impl LadderPoint {
    pub fn raw_ber(&self) -> f64 {
        self.raw_bit_errors as f64 / self.bits as f64
    }

    pub fn decoded_ber(&self) -> f64 {
        self.decoded_bit_errors as f64 / self.bits as f64
    }

    pub fn bler(&self) -> f64 {
        self.block_errors as f64 / self.blocks as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCheckReport {
    pub roundtrips: u64,
    pub roundtrip_failures: u64,
    pub max_roundtrip_iterations: usize,
    pub ladder: Vec<LadderPoint>,
}

/// Noiseless `+-llr_max` round trips over `messages` random messages.
pub fn noiseless_roundtrips(
    code: &LdpcCode,
    cfg: &DecoderConfig,
    messages: u64,
    seed: u64,
    llr_max: f64,
) -> (u64, usize) {
    (0..messages)
        .into_par_iter()
        .map_init(DecoderWorkspace::default, |ws, i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, DOMAIN_ROUNDTRIP, &[i]));
            let msg = random_message(code.k(), &mut rng);
            let word = code.encode(&msg).expect("message length matches the code");
            let llrs: Vec<f64> = word
                .iter()
                .map(|&b| if b == 1 { llr_max } else { -llr_max })
                .collect();
            let out = spa_decode_with(code, &llrs, cfg, ws).expect("llr length matches the code");
            (
                u64::from(out.message != msg || !out.converged),
                out.iterations,
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1.max(b.1)))
}

/// Rate-normalised BPSK over real AWGN, bit 1 sent as `+1`. Per block:
/// channel LLRs `2y / sigma^2`, raw hard decisions on the message positions,
/// then SPA decoding.
pub fn awgn_point(
    code: &LdpcCode,
    cfg: &DecoderConfig,
    ebn0_db: f64,
    blocks: u64,
    seed: u64,
) -> LadderPoint {
    let rate = code.k() as f64 / code.n() as f64;
    let sigma_sq = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
    let noise = Normal::new(0.0, sigma_sq.sqrt()).expect("finite noise level");
    let per_block: Vec<[u64; 5]> = (0..blocks)
        .into_par_iter()
        .map_init(DecoderWorkspace::default, |ws, b| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, DOMAIN_AWGN, &[ebn0_db.to_bits(), b]));
            let msg = random_message(code.k(), &mut rng);
            let word = code.encode(&msg).expect("message length matches the code");
            let llrs: Vec<f64> = word
                .iter()
                .map(|&bit| {
                    let y = if bit == 1 { 1.0 } else { -1.0 } + rng.sample(noise);
                    2.0 * y / sigma_sq
                })
                .collect();
            let raw: u64 = code
                .message_positions()
                .iter()
                .zip(&msg)
                .filter(|&(&p, &m)| u8::from(llrs[p] > 0.0) != m)
                .count() as u64;
            let out = spa_decode_with(code, &llrs, cfg, ws).expect("llr length matches the code");
            let errors = out.message.iter().zip(&msg).filter(|(a, b)| a != b).count() as u64;
            let syndrome_zero = code.syndrome_weight(&out.codeword) == 0;
            [
                raw,
                errors,
                u64::from(errors > 0),
                u64::from(out.converged),
                u64::from(syndrome_zero != out.converged),
            ]
        })
        .collect();
    let sum = per_block.iter().fold([0u64; 5], |mut acc, r| {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        acc
    });
    LadderPoint {
        ebn0_db,
        blocks,
        raw_bit_errors: sum[0],
        decoded_bit_errors: sum[1],
        block_errors: sum[2],
        converged_blocks: sum[3],
        syndrome_mismatches: sum[4],
        bits: blocks * code.k() as u64,
    }
}

pub fn run_ldpc_check(
    code: &LdpcCode,
    cfg: &DecoderConfig,
    roundtrips: u64,
    ladder_db: &[f64],
    blocks: u64,
    seed: u64,
) -> LdpcCheckReport {
    let (roundtrip_failures, max_roundtrip_iterations) =
        noiseless_roundtrips(code, cfg, roundtrips, seed, dprx_core::demapper::LLR_MAX);
    let ladder = ladder_db
        .iter()
        .map(|&db| awgn_point(code, cfg, db, blocks, seed))
        .collect();
    LdpcCheckReport {
        roundtrips,
        roundtrip_failures,
        max_roundtrip_iterations,
        ladder,
    }
}
