//! Acceptance criteria for `neurogeom-core`, kept in a separate package so
//! they run after, and independently of, the core unit and property suites.
//! See `tests/acceptance.rs`.
