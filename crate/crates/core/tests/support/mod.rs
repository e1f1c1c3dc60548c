#![allow(dead_code)]

pub mod color;
pub mod oracle;
