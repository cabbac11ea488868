pub mod pg;
pub mod prox;
pub mod prox_linear;
pub mod moving_balls;
pub use pg::*;
pub use prox::*;
pub use prox_linear::*;
pub use moving_balls::*;
