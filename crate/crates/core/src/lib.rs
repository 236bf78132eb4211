pub mod interpreter;
pub mod monitor;
pub mod progen;
pub mod runtime;
pub mod syntax;
pub mod typesys;
