//! Multi-seed recompilation experiments.
//!
//! A program compiled under different seeds must keep one trace *structure*
//! — the ordered (pc, opcode) skeleton of a run — while the data written
//! along the way varies. This module measures both halves: it asserts the
//! skeleton is seed-invariant, collects the first value written at every
//! write site across seeds, and puts desk-scale numbers on "how much varies"
//! — distinct counts, a collision estimator, a uniformity test on pooled low
//! bytes — plus the converse check that join-reconciliation sites introduce
//! no fresh entropy at all (their constants replay exactly from earlier
//! draws).
//!
//! True per-site entropy of 32-bit values is not estimable from a hundred
//! samples; distinct-count and collision statistics are the honest stand-in,
//! and the draw log makes the zero-entropy claims exact rather than
//! statistical.

use rayon::prelude::*;
use serde::Serialize;

use crate::codegen::meta::SiteRole;
use crate::codegen::{
    self, compile, run_compiled, ArrayStrategy, CodegenError, CompileOptions, Compiled, Mode,
};
use crate::frontend::TProgram;
use crate::machine::{MemoryMode, Opcode};
use crate::oracle::Outcome;


#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("an experiment needs at least two seeds, got {got}")]
    TooFewSeeds { got: usize },
    #[error(
        "seed {seed} diverged from seed {baseline}'s trace structure at event {at} \
         (a compilation-structure bug)"
    )]
    FingerprintMismatch { baseline: u64, seed: u64, at: usize },
    #[error("seed {seed} decoded {got}, but seed {baseline} decoded {want}")]
    OutcomeMismatch { baseline: u64, want: Outcome, seed: u64, got: Outcome },
    #[error("seed {seed}: {source}")]
    Compile {
        seed: u64,
        #[source]
        source: CodegenError,
    },
    #[error("seed {seed}: {source}")]
    Run {
        seed: u64,
        #[source]
        source: codegen::ExecError,
    },
}

/// The seed-invariant skeleton of one run: every executed instruction's
/// position and opcode, in order.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct TraceFingerprint(pub Vec<(u32, Opcode)>);

/// One write site over a whole experiment: the program position, and the
/// first value the site wrote in each seed's run.
#[derive(Clone, Debug, Serialize)]
pub struct WriteSiteProfile {
    pub pc: u32,
    pub opcode: Opcode,
    /// One sample per seed: the value written at this site's first dynamic
    /// occurrence in that seed's trace.
    pub samples: Vec<i32>,
    /// A site varies iff its samples are not all equal.
    pub varying: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExperimentSummary {
    pub seeds: usize,
    /// Events in one run (the skeleton length).
    pub events: usize,
    pub sites: usize,
    pub varying: usize,
    pub fixed: usize,
}

/// The raw material of one experiment.
#[derive(Debug, Serialize)]
pub struct Experiment {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    /// Decoded outcome, identical across seeds (asserted).
    pub outcome: Outcome,
    pub fingerprint: TraceFingerprint,
    pub profiles: Vec<WriteSiteProfile>,
    pub summary: ExperimentSummary,
}

/// Compile and run `prog` once per seed, in parallel; assert the trace
/// skeletons agree; collect per-site first-write samples.
pub fn experiment(
    prog: &TProgram,
    inputs: &[i32],
    mode: Mode,
    arrays: ArrayStrategy,
    seeds: &[u64],
    fuel: u64,
) -> Result<Experiment, AnalysisError> {
    if seeds.len() < 2 {
        return Err(AnalysisError::TooFewSeeds { got: seeds.len() });
    }

    struct PerSeed {
        seed: u64,
        fingerprint: Vec<(u32, Opcode)>,
        /// (pc, first value written there), in first-occurrence order.
        firsts: Vec<(u32, Opcode, i32)>,
        outcome: Outcome,
    }

    let runs: Vec<PerSeed> = seeds
        .par_iter()
        .map(|&seed| {
            let c = compile(prog, &CompileOptions { mode, seed, arrays })
                .map_err(|source| AnalysisError::Compile { seed, source })?;
            let fin = run_compiled(&c, inputs, fuel, MemoryMode::Fault)
                .map_err(|source| AnalysisError::Run { seed, source })?;
            let mut fingerprint = Vec::with_capacity(fin.trace.len());
            let mut seen = std::collections::HashSet::new();
            let mut firsts = Vec::new();
            for ev in &fin.trace {
                fingerprint.push((ev.pc, ev.opcode));
                let value = match (ev.writes.first(), &ev.mem) {
                    (Some((_, w)), _) => Some(w.value),
                    (None, Some(m)) if m.is_write => Some(m.word.value),
                    _ => None,
                };
                if let Some(v) = value {
                    if seen.insert(ev.pc) {
                        firsts.push((ev.pc, ev.opcode, v));
                    }
                }
            }
            Ok(PerSeed { seed, fingerprint, firsts, outcome: fin.outcome })
        })
        .collect::<Result<_, _>>()?;

    let base = &runs[0];
    for r in &runs[1..] {
        if r.fingerprint != base.fingerprint {
            let at = base
                .fingerprint
                .iter()
                .zip(&r.fingerprint)
                .position(|(a, b)| a != b)
                .unwrap_or_else(|| base.fingerprint.len().min(r.fingerprint.len()));
            return Err(AnalysisError::FingerprintMismatch {
                baseline: base.seed,
                seed: r.seed,
                at,
            });
        }
        if r.outcome != base.outcome {
            return Err(AnalysisError::OutcomeMismatch {
                baseline: base.seed,
                want: base.outcome,
                seed: r.seed,
                got: r.outcome,
            });
        }
    }

    // Identical skeletons make identical site lists; zip the samples.
    let profiles: Vec<WriteSiteProfile> = base
        .firsts
        .iter()
        .enumerate()
        .map(|(i, &(pc, opcode, v0))| {
            let mut samples = Vec::with_capacity(runs.len());
            samples.push(v0);
            for r in &runs[1..] {
                debug_assert_eq!(r.firsts[i].0, pc);
                samples.push(r.firsts[i].2);
            }
            let varying = samples.iter().any(|&s| s != samples[0]);
            WriteSiteProfile { pc, opcode, samples, varying }
        })
        .collect();

    let varying = profiles.iter().filter(|p| p.varying).count();
    let summary = ExperimentSummary {
        seeds: seeds.len(),
        events: base.fingerprint.len(),
        sites: profiles.len(),
        varying,
        fixed: profiles.len() - varying,
    };
    Ok(Experiment {
        mode,
        seeds: seeds.to_vec(),
        outcome: base.outcome,
        fingerprint: TraceFingerprint(base.fingerprint.clone()),
        profiles,
        summary,
    })
}

// ===================== entropy accounting =====================

#[derive(Clone, Debug, Serialize)]
pub struct SiteEntropy {
    pub pc: u32,
    pub opcode: Opcode,
    pub distinct: usize,
    pub varying: bool,
    /// Collision (Rényi-2) estimate in bits; for collision-free samples
    /// this saturates at the resolution limit log2(K·(K−1)/2).
    pub est_bits: f64,
}

/// Samples from two independent uniform sites should not be identical as
/// ordered vectors; this spot check counts violations over sampled pairs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairwiseCheck {
    pub pairs: usize,
    pub identical: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    /// Critical value of χ²(dof) at the stated significance.
    pub threshold: f64,
    pub dof: usize,
    pub alpha: f64,
    /// Pooled sample count (one low byte per varying-site sample).
    pub samples: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub k: usize,
    pub sites: Vec<SiteEntropy>,
    pub varying: usize,
    /// Additive total over varying sites. A sum, valid as a total only
    /// under independence across sites — see [`EntropyReport::pairwise`],
    /// a heuristic spot check of exactly that assumption.
    pub total_bits: f64,
    /// Varying sites whose distinct-count fell below ceil(0.99·K).
    pub flagged: Vec<u32>,
    pub pairwise: PairwiseCheck,
    /// Pooled low-byte uniformity test; present when K ≥ 100.
    pub chi_square: Option<ChiSquare>,
}

/// Distinct-count and collision statistics over an experiment's profiles.
pub fn entropy_report(profiles: &[WriteSiteProfile], k: usize) -> EntropyReport {
    let sites: Vec<SiteEntropy> = profiles
        .iter()
        .map(|p| {
            let mut sorted = p.samples.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let distinct = sorted.len();
            SiteEntropy {
                pc: p.pc,
                opcode: p.opcode,
                distinct,
                varying: p.varying,
                est_bits: if p.varying { collision_bits(&p.samples) } else { 0.0 },
            }
        })
        .collect();

    let min_distinct = ((k as f64) * 0.99).ceil() as usize;
    let flagged: Vec<u32> = sites
        .iter()
        .filter(|s| s.varying && s.distinct < min_distinct)
        .map(|s| s.pc)
        .collect();
    let total_bits = sites.iter().filter(|s| s.varying).map(|s| s.est_bits).sum();

    let varying_profiles: Vec<&WriteSiteProfile> = profiles.iter().filter(|p| p.varying).collect();
    let pairwise = pairwise_check(&varying_profiles);
    let chi_square = (k >= 100).then(|| low_byte_chi_square(&varying_profiles));

    EntropyReport {
        k,
        varying: varying_profiles.len(),
        sites,
        total_bits,
        flagged,
        pairwise,
        chi_square,
    }
}

/// −log2 of the observed collision rate among sample pairs, floored at one
/// collision-pair's worth when none were observed (the estimator's
/// resolution limit).
fn collision_bits(samples: &[i32]) -> f64 {
    let k = samples.len();
    if k < 2 {
        return 0.0;
    }
    let total_pairs = (k * (k - 1) / 2) as f64;
    let mut counts = std::collections::HashMap::new();
    for &s in samples {
        *counts.entry(s).or_insert(0usize) += 1;
    }
    let colliding: usize = counts.values().map(|&n| n * (n - 1) / 2).sum();
    let rate = (colliding as f64).max(1.0) / total_pairs;
    -rate.log2()
}

fn pairwise_check(varying: &[&WriteSiteProfile]) -> PairwiseCheck {
    const CAP: usize = 500;
    let mut pairs = 0;
    let mut identical = 0;
    'outer: for i in 0..varying.len() {
        for j in i + 1..varying.len() {
            if pairs == CAP {
                break 'outer;
            }
            pairs += 1;
            if varying[i].samples == varying[j].samples {
                identical += 1;
            }
        }
    }
    PairwiseCheck { pairs, identical }
}

fn low_byte_chi_square(varying: &[&WriteSiteProfile]) -> ChiSquare {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let mut bins = [0u64; 256];
    let mut n = 0u64;
    for p in varying {
        for &s in &p.samples {
            bins[(s as u8) as usize] += 1;
            n += 1;
        }
    }
    let expected = n as f64 / 256.0;
    let statistic: f64 = bins
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let alpha = 0.001;
    let threshold = ChiSquared::new(255.0).expect("valid dof").inverse_cdf(1.0 - alpha);
    ChiSquare { statistic, threshold, dof: 255, alpha, samples: n as usize, pass: statistic < threshold }
}

impl EntropyReport {
    /// Did every checked property hold?
    pub fn all_pass(&self) -> bool {
        self.flagged.is_empty()
            && self.pairwise.identical == 0
            && self.chi_square.map_or(true, |c| c.pass)
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{:>6}  {:<5}  {:>8}  {:>9}  {}", "pc", "op", "distinct", "est bits", "class");
        for s in &self.sites {
            let _ = writeln!(
                out,
                "{:>6}  {:<5}  {:>8}  {:>9.2}  {}",
                s.pc,
                s.opcode.name(),
                s.distinct,
                s.est_bits,
                if s.varying { "varying" } else { "fixed" },
            );
        }
        let _ = writeln!(out, "---");
        let _ = writeln!(
            out,
            "{} sites, {} varying; additive estimate {:.1} bits over {} seeds",
            self.sites.len(),
            self.varying,
            self.total_bits,
            self.k
        );
        let _ = writeln!(
            out,
            "pairwise spot check: {}/{} sampled pairs identical",
            self.pairwise.identical, self.pairwise.pairs
        );
        match &self.chi_square {
            Some(c) => {
                let _ = writeln!(
                    out,
                    "pooled low-byte chi-square: {:.2} vs threshold {:.2} (dof {}, alpha {}): {}",
                    c.statistic,
                    c.threshold,
                    c.dof,
                    c.alpha,
                    if c.pass { "pass" } else { "FAIL" },
                );
            }
            None => {
                let _ = writeln!(out, "pooled low-byte chi-square: skipped (needs 100+ seeds)");
            }
        }
        if !self.flagged.is_empty() {
            let _ = writeln!(out, "FLAGGED low-distinct sites: {:?}", self.flagged);
        }
        out
    }
}

// ===================== zero-entropy audit =====================

/// The reconciliation sites' constants, checked against the draw log.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrailerAudit {
    /// Trailer-role constant sites in the compilation.
    pub sites: usize,
    /// How many introduced a draw not seen at any earlier site (must be 0:
    /// reconciliation replays existing codings, it never draws).
    pub fresh: usize,
    /// How many failed to replay exactly from the logged draws (must be 0).
    pub mismatched: usize,
}

impl TrailerAudit {
    pub fn pass(&self) -> bool {
        self.fresh == 0 && self.mismatched == 0
    }
}

/// Verify that every trailer constant is an affine function of draws
/// introduced earlier — zero conditional entropy given the preceding trace.
pub fn audit_trailers(c: &Compiled) -> TrailerAudit {
    let mut audit = TrailerAudit { sites: 0, fresh: 0, mismatched: 0 };
    for site in &c.meta.constant_sites {
        if site.role != SiteRole::Trailer {
            continue;
        }
        audit.sites += 1;
        if site.fresh {
            audit.fresh += 1;
        }
        let emitted = site.read(&c.program);
        if site.affine.eval(&c.meta.draws) != emitted || emitted.is_none() {
            audit.mismatched += 1;
        }
    }
    audit
}
