//! Locally finite approximations of infinite structures by directed systems
//! of finite stages.

pub mod adequacy;
pub mod corpus;
pub mod declarations;
pub mod demos;
pub mod filters;
pub mod semantics;
pub mod submodel;
pub mod structure_file;
pub mod syntax;
pub mod system;
pub mod truth;
