//! Experiment orchestration for the ICAL pipeline (placeholder).
