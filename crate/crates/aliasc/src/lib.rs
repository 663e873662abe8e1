//! A compiler and simulator for a machine whose memory is keyed on the full
//! physical register pattern — value *and* a hidden calculation tag — so that
//! only a replay of the original address calculation can reach a stored word.
//!
//! The crate contains:
//!
//! - [`machine`]: the tagged-word machine itself (ISA, execution, assembly
//!   text, traces, fault/garbage memory modes)
//! - [`frontend`]: a small C-like language (lexer, parser, type checker,
//!   frame layout)
//! - [`oracle`]: a direct interpreter for that language, used as the
//!   reference in differential tests
//! - [`codegen`]: the code generator, including the obfuscating mode that
//!   re-draws data offsets and value deltas from a seeded stream
//! - [`analysis`]: multi-seed experiments over compiled programs (write-site
//!   profiles, entropy estimates, structural fingerprints)

pub mod analysis;
pub mod cli;
pub mod codegen;
pub mod frontend;
pub mod machine;
pub mod oracle;
