//! Gutt star product on Lie-group cotangent bundles (module body pending).
