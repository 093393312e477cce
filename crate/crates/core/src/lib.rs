pub mod codec;
pub mod descent;
pub mod ntheory;
pub mod residue;
pub mod ternary;
