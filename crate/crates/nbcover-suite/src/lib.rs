//! Acceptance suite for the `nbcover` workspace. The checks live in
//! `tests/acceptance.rs` and print one PASS/FAIL line per criterion.
