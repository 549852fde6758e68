#![allow(dead_code)]

pub mod fixtures;
pub mod lenient;
pub mod oracle;
