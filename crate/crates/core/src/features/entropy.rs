use crate::features::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPair {
    /// Σ log(s² + ε)
    pub log_energy: f64,
    /// −Σ (s² + ε) log(s² + ε)
    pub shannon: f64,
}

pub fn entropy_features(signal: &[f64]) -> EntropyPair {
    let mut log_energy = 0.0;
    let mut shannon = 0.0;
    for &s in signal {
        let e = s * s + EPSILON;
        let l = e.ln();
        log_energy += l;
        shannon -= e * l;
    }
    EntropyPair { log_energy, shannon }
}
