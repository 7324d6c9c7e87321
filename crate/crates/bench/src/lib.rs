//! Shared fixtures for the benchmarks.

use sketchlord::{make_rademacher, sample, stream, Family, Mat, SketchPair, SynthSpec};

/// A synthetic exp(0.5) matrix with its forward and adjoint sketches.
pub struct Fixture {
    pub a: Mat,
    pub omega: SketchPair,
    pub upsilon: SketchPair,
    pub m: Mat,
    pub w: Mat,
}

pub fn fixture(n: usize, width: usize) -> Fixture {
    let a = sample(&SynthSpec::new(Family::Exp, 0.5, n, (n / 100).max(1), 1.0, 1))
        .expect("standard family")
        .a;
    let omega = make_rademacher(n, width, 1, stream::OMEGA).expect("positive sizes");
    let upsilon = make_rademacher(n, width, 1, stream::UPSILON).expect("positive sizes");
    let m = &a * &omega.omega;
    let w = a.transpose() * &upsilon.omega;
    Fixture { a, omega, upsilon, m, w }
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_shapes() {
        let f = super::fixture(50, 6);
        assert_eq!(f.m.shape(), (50, 6));
        assert_eq!(f.w.shape(), (50, 6));
    }
}
