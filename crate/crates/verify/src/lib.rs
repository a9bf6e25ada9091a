//! Holds no code. The acceptance checks are the `acceptance` test target:
//! `cargo test -p fdsim-verify --test acceptance`.
