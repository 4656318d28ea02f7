pub mod density;
pub mod fit;
pub mod simulate;
pub mod study;
