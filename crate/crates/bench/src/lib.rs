//! Fixtures shared by the benchmarks.

use anonvec_core::synth::{generate, CovarianceShape, DomainSpec, MeanShift, SynthSpec};
use anonvec_core::VectorSet;

/// Two-domain corpus of `speakers x utterances` vectors per domain.
pub fn two_domains(dim: usize, speakers: usize, utterances: usize) -> (VectorSet, VectorSet) {
    let spec = SynthSpec {
        dimension: dim,
        domains: vec![
            DomainSpec::new("source", MeanShift::Magnitude(2.0), CovarianceShape::Isotropic(1.0)),
            DomainSpec::new(
                "target",
                MeanShift::Magnitude(-1.0),
                CovarianceShape::RandomSpd { seed: 3, condition_cap: 10.0 },
            ),
        ],
        speakers_per_domain: speakers,
        utterances_per_speaker: utterances,
        between_speaker_std: 1.0,
        within_speaker_std: 0.3,
        seed: 1,
    };
    let mut sets = generate(&spec).expect("valid spec").into_iter();
    let (_, a) = sets.next().unwrap();
    let (_, b) = sets.next().unwrap();
    (a, b)
}
