//! Experiment harness library.
