//! Multi-finger grasp synthesis and stability validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contact;
pub mod controller;
pub mod ik;
pub mod kinematics;
pub mod metrics;
pub mod model;
pub mod perturbation;
pub mod scene;
pub mod validation;
