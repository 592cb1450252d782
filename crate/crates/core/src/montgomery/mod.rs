//! Randomised signatures from Montgomery forms `M(x; R, N) = xR mod N`.
//!
//! A substring's natural-number value is mapped through one `(R, N)` pair per
//! signature slot. Two layers of these maps, held by different parties, give
//! the nested signatures that key the search index. Equal substrings always
//! produce equal signatures; unequal ones collide with a probability bounded
//! by [`fp_bound`].

mod bound;
mod context;
mod number;
mod signature;

pub use bound::{fp_bound, nested_fp_bound, prime_count_below};
pub use context::{draw_moduli, draw_multiplier, MontgomeryContext, PrimeTable, TablePrimitives};
pub use number::{gcd, is_prime, modular_inverse, primes_below};
pub use signature::{
    blind_query, nested_signature, residue, residue_of_bits, server_map, signatures, Primitives, ResidueTable,
    SignatureLevel, SignatureSet,
};

/// Widest product the 64-bit arithmetic is allowed to form.
pub const MAX_PRODUCT_BITS: u32 = 62;
