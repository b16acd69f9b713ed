//! LDPC codes: alist I/O, systematic encoding, and the sum-product BP
//! decoder whose single-iteration step doubles as the unrolled BP layer of
//! the iterative equalizer.

pub mod alist;
pub mod bp;
pub mod code;
pub mod codegen;

pub use alist::AlistMatrix;
pub use bp::{bp_step, decode, decode_opts, BpState, DecodeResult};
pub use code::LdpcCode;
pub use codegen::{generate_regular, RegularSpec, DESK_SPEC};

/// Default BP iteration count used by the decoder configurations.
pub const DEFAULT_BP_ITERS: usize = 50;
