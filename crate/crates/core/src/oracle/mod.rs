//! Independent reference implementations used to verify the fast paths.

mod gather;
pub mod gradcheck;
mod zbuffer;

pub use gather::gather_oracle;
pub use zbuffer::zbuffer_oracle;
