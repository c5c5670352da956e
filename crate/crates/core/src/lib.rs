//! Benchmark framework for unsupervised domain adaptation of
//! parameter-conditioned neural surrogates on unstructured-mesh
//! steady-state simulation tasks.

pub mod datagen;
pub mod tensor;
