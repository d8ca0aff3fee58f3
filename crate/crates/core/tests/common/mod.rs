#![allow(dead_code)]

pub mod arm_oracle;
pub mod box_oracle;
pub mod cluster_oracle;
pub mod pi1_oracle;
