pub mod analysis;
pub mod annotations;
pub mod diagnostics;
pub mod domains;
pub mod driver;
pub mod frontend;
pub mod ir;
pub mod libmodels;
pub mod span;
