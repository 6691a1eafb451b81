#![allow(dead_code)]

pub mod naive_aaf;
pub mod random_model;
pub mod oracle_check;
pub mod pipeline_check;
