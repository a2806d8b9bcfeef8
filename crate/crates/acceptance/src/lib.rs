//! Holds the workspace acceptance suite (`tests/acceptance.rs`), which runs
//! every primary criterion and prints one PASS/FAIL line per criterion.
