//! Differential-operator representations (module body pending).
