//! Closed-form memory classifiers and explicit classical decompositions.

use crate::channel::{
    choi_from_action, link_product, unitary_channel, ChoiOperator, MapAction, SubchannelDecomposition,
};
use crate::dynamics::{channel_three_level, dephasing_channel, ThreeLevelDecay};
use crate::error::{invalid, Result};
use crate::linalg::{CMat, C64, ONE};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryKind {
    Markovian,
    ClassicalNonMarkovian,
    QuantumMemory,
}

impl std::fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MemoryKind::Markovian => "Markovian",
            MemoryKind::ClassicalNonMarkovian => "ClassicalNonMarkovian",
            MemoryKind::QuantumMemory => "QuantumMemory",
        };
        f.write_str(s)
    }
}

/// A verdict together with the signed distance to the Markovian boundary.
/// The margin is nonnegative exactly for `Markovian`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryVerdict {
    pub kind: MemoryKind,
    pub margin: f64,
}

pub fn classify_two_level(c1: C64, c2: C64) -> MemoryVerdict {
    let margin = c1.norm() - c2.norm();
    let kind = if margin >= 0.0 { MemoryKind::Markovian } else { MemoryKind::QuantumMemory };
    MemoryVerdict { kind, margin }
}

/// Markovian iff `G2 >= G1` and `G1 + |d1|^2 >= G2 + |d2|^2`.
///
/// The second condition is necessary, the first is not: a pair with `|d2| <= |d1|` and a shrinking
/// `G` still admits [`three_level_classical_decomposition`], so `QuantumMemory` here can be a false alarm.
pub fn classify_three_level(s1: &ThreeLevelDecay, s2: &ThreeLevelDecay) -> MemoryVerdict {
    let ground_gain = s2.g - s1.g;
    let excited_or_ground_loss = (s1.g + s1.d.norm_sqr()) - (s2.g + s2.d.norm_sqr());
    let margin = ground_gain.min(excited_or_ground_loss);
    let kind = if margin >= 0.0 { MemoryKind::Markovian } else { MemoryKind::QuantumMemory };
    MemoryVerdict { kind, margin }
}

pub fn classify_dephasing(a1: C64, a2: C64) -> MemoryVerdict {
    let margin = a1.norm() - a2.norm();
    let kind = if margin >= 0.0 { MemoryKind::Markovian } else { MemoryKind::ClassicalNonMarkovian };
    MemoryVerdict { kind, margin }
}

/// An instrument on the first channel plus one transition channel per outcome.
#[derive(Clone, Debug)]
pub struct ClassicalDecomposition {
    pub instrument: SubchannelDecomposition,
    pub transitions: Vec<ChoiOperator>,
}

impl ClassicalDecomposition {
    pub fn new(instrument: SubchannelDecomposition, transitions: Vec<ChoiOperator>) -> Result<Self> {
        if instrument.parts().len() != transitions.len() {
            return invalid("one transition channel per instrument outcome is required");
        }
        Ok(Self { instrument, transitions })
    }

    /// `sum_i K_i ∘ I_i`.
    pub fn recombine(&self) -> Result<ChoiOperator> {
        let mut acc: Option<ChoiOperator> = None;
        for (part, k) in self.instrument.parts().iter().zip(&self.transitions) {
            let term = link_product(part, k)?;
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term)?,
            });
        }
        Ok(acc.expect("decomposition is nonempty"))
    }
}

/// Intersection of the circles |z| = 1/2 and |z - a| = 1/2, for |a| <= 1.
///
/// Of the two intersections the one with the larger imaginary part is returned (ties broken
/// by the larger real part); at a = 0 the circles coincide and 1/2 is returned.
pub fn half_circle_intersection(a: C64) -> C64 {
    let r = a.norm();
    if r < 1e-15 {
        return C64::new(0.5, 0.0);
    }
    let r = r.min(1.0);
    let dir = a / a.norm();
    let h = (0.25 - 0.25 * r * r).max(0.0).sqrt();
    let mid = dir * (0.5 * r);
    let p = mid + dir * C64::new(0.0, h);
    let q = mid - dir * C64::new(0.0, h);
    if p.im > q.im + 1e-15 || ((p.im - q.im).abs() <= 1e-15 && p.re >= q.re) {
        p
    } else {
        q
    }
}

fn coherence_choi(p00: f64, p11: f64, coh: C64) -> Result<ChoiOperator> {
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = C64::new(p00, 0.0);
    m[(3, 3)] = C64::new(p11, 0.0);
    m[(0, 3)] = coh;
    m[(3, 0)] = coh.conj();
    ChoiOperator::new(2, 2, m)
}

#[derive(Clone, Debug)]
pub struct DephasingInstrument {
    pub gamma: C64,
    pub delta: C64,
    pub decomposition: ClassicalDecomposition,
}

/// Two-outcome classical implementation of `D_{a2}` from `D_{a1}`.
pub fn dephasing_instrument(a1: C64, a2: C64) -> Result<DephasingInstrument> {
    if a1.norm() > 1.0 + 1e-12 || a2.norm() > 1.0 + 1e-12 {
        return invalid("dephasing parameters must lie in the unit disk");
    }
    let gamma = half_circle_intersection(a1);
    let delta = half_circle_intersection(a2);
    let i1 = coherence_choi(0.5, 0.5, gamma)?;
    let i2 = coherence_choi(0.5, 0.5, a1 - gamma)?;
    let k1 = coherence_choi(1.0, 1.0, delta / gamma)?;
    let k2 = coherence_choi(1.0, 1.0, (a2 - delta) / (a1 - gamma))?;
    let instrument = SubchannelDecomposition::new(vec![i1, i2], dephasing_channel(a1)?, 1e-10)?;
    let decomposition = ClassicalDecomposition::new(instrument, vec![k1, k2])?;
    Ok(DephasingInstrument { gamma, delta, decomposition })
}

/// The would-be transition map `C[c2/c1]`; completely positive only when |c2| <= |c1|.
pub fn markovian_transition_two_level(c1: C64, c2: C64) -> Result<ChoiOperator> {
    if c1.norm() == 0.0 {
        return invalid("c1 = 0 admits no transition map");
    }
    let ratio = c2 / c1;
    let p = ratio.norm_sqr();
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(0, 3)] = ratio.conj();
    m[(2, 2)] = C64::new(1.0 - p, 0.0);
    m[(3, 0)] = ratio;
    m[(3, 3)] = C64::new(p, 0.0);
    ChoiOperator::new(2, 2, m)
}

/// The would-be transition map `C[d2/d1, (G2-G1)/|d1|^2, phi2-phi1]`.
pub fn markovian_transition_three_level(s1: &ThreeLevelDecay, s2: &ThreeLevelDecay) -> Result<ChoiOperator> {
    if s1.d.norm() == 0.0 {
        return invalid("d1 = 0 admits no transition map");
    }
    let ratio = s2.d / s1.d;
    let g = (s2.g - s1.g) / s1.d.norm_sqr();
    let pd = ratio.norm_sqr();
    let ph = C64::from_polar(1.0, s2.phi_s - s1.phi_s);
    let mut m = CMat::zeros(9, 9);
    m[(0, 0)] = ONE;
    m[(0, 4)] = ph;
    m[(0, 8)] = ratio.conj();
    m[(4, 0)] = ph.conj();
    m[(4, 4)] = ONE;
    m[(4, 8)] = ratio.conj() * ph.conj();
    m[(6, 6)] = C64::new(g, 0.0);
    m[(7, 7)] = C64::new(1.0 - pd - g, 0.0);
    m[(8, 0)] = ratio;
    m[(8, 4)] = ratio * ph;
    m[(8, 8)] = C64::new(pd, 0.0);
    ChoiOperator::new(3, 3, m)
}

/// Explicit classical decomposition for any pair with `|d2| <= |d1|`, whether or not `G` grows.
///
/// Outcome one keeps the coherent part of the first channel and continues with a three-level
/// channel; outcome two keeps the decayed population and redistributes it between `g` and `s`.
pub fn three_level_classical_decomposition(
    s1: &ThreeLevelDecay,
    s2: &ThreeLevelDecay,
) -> Result<ClassicalDecomposition> {
    let (n1, n2) = (s1.d.norm_sqr(), s2.d.norm_sqr());
    if n2 > n1 + 1e-12 {
        return invalid(format!("|d2|^2 = {n2} exceeds |d1|^2 = {n1}"));
    }
    let e1 = s1.channel()?;
    let mut coherent = e1.matrix().clone();
    coherent[(6, 6)] = C64::new(0.0, 0.0);
    coherent[(7, 7)] = C64::new(0.0, 0.0);
    let mut decayed = CMat::zeros(9, 9);
    decayed[(6, 6)] = C64::new(s1.g, 0.0);
    decayed[(7, 7)] = C64::new(s1.s, 0.0);
    let parts = vec![ChoiOperator::new(3, 3, coherent)?, ChoiOperator::new(3, 3, decayed)?];
    let instrument = SubchannelDecomposition::new(parts, e1, 1e-9)?;

    let ratio = if n1 > 0.0 { s2.d / s1.d } else { C64::new(0.0, 0.0) };
    let room = s1.g + s1.s + n1 - n2;
    let f = if room > 1e-15 { (s2.g / room).clamp(0.0, 1.0) } else { 0.0 };
    let rest = (1.0 - ratio.norm_sqr()).max(0.0);
    let k1 = channel_three_level(ratio, f * rest, s2.phi_s - s1.phi_s)?;
    let k2 = choi_from_action(&MapAction::from_fn(3, |i, j| {
        let mut out = CMat::zeros(3, 3);
        if i == j {
            if i == 2 {
                out[(2, 2)] = ONE;
            } else {
                out[(0, 0)] = C64::new(f, 0.0);
                out[(1, 1)] = C64::new(1.0 - f, 0.0);
            }
        }
        out
    }))?;
    ClassicalDecomposition::new(instrument, vec![k1, k2])
}

/// Pre-processes the first channel by `pre`, applies the unitary `u` after the instrument and
/// undoes it before the transitions, then post-processes by `post`.
pub fn transform_decomposition(
    decomp: &ClassicalDecomposition,
    pre: &ChoiOperator,
    u: &CMat,
    post: &ChoiOperator,
) -> Result<ClassicalDecomposition> {
    let forward = unitary_channel(u)?;
    let backward = unitary_channel(&u.adjoint())?;
    let mut parts = Vec::new();
    let mut transitions = Vec::new();
    for (part, k) in decomp.instrument.parts().iter().zip(&decomp.transitions) {
        parts.push(link_product(&link_product(pre, part)?, &forward)?);
        transitions.push(link_product(&link_product(&backward, k)?, post)?);
    }
    let parent = link_product(&link_product(pre, decomp.instrument.parent())?, &forward)?;
    let instrument = SubchannelDecomposition::new(parts, parent, 1e-9)?;
    ClassicalDecomposition::new(instrument, transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::is_cptp;
    use crate::dynamics::{channel_two_level, three_level_state, GiantAtom3LParams};
    use crate::linalg::ZERO;

    #[test]
    fn two_level_examples() {
        let e = C64::new((-1.0f64).exp(), 0.0);
        let v = classify_two_level(e, e);
        assert_eq!(v.kind, MemoryKind::Markovian);
        assert_eq!(v.margin, 0.0);
        let v = classify_two_level(C64::new(0.2, 0.0), C64::new(0.9, 0.0));
        assert_eq!(v.kind, MemoryKind::QuantumMemory);
        assert!((v.margin + 0.7).abs() < 1e-15);
    }

    #[test]
    fn three_level_examples() {
        let mk = |g: f64, pd: f64| ThreeLevelDecay {
            d: C64::new(pd.sqrt(), 0.0),
            g,
            s: 1.0 - g - pd,
            phi_s: 0.0,
            time: 0.0,
        };
        let v = classify_three_level(&mk(0.2, 0.5), &mk(0.1, 0.5));
        assert_eq!(v.kind, MemoryKind::QuantumMemory);
        assert!((v.margin + 0.1).abs() < 1e-12);
        let s = mk(0.3, 0.2);
        assert_eq!(classify_three_level(&s, &s).kind, MemoryKind::Markovian);
    }

    #[test]
    fn decreasing_g_still_decomposes_when_d_shrinks() {
        let st = |d: C64, g: f64, s: f64, phi_s: f64| ThreeLevelDecay { d, g, s, phi_s, time: 0.0 };
        let cases = [
            (st(C64::new(0.5, 0.3), 0.4, 0.26, 0.7), st(C64::new(0.1, -0.2), 0.1, 0.85, 2.1)),
            (st(C64::new(0.0, 0.9), 0.1, 0.09, 0.0), st(C64::new(0.3, 0.0), 0.0, 0.91, -1.0)),
            (st(ZERO, 0.6, 0.4, 0.0), st(ZERO, 0.2, 0.8, 0.0)),
            (st(C64::new(0.6, 0.0), 0.3, 0.34, 0.2), st(C64::new(0.0, 0.6), 0.3, 0.34, 0.2)),
        ];
        for (s1, s2) in cases {
            let dec = three_level_classical_decomposition(&s1, &s2).unwrap();
            for k in &dec.transitions {
                assert!(is_cptp(k, 1e-10).cptp);
            }
            let e2 = s2.channel().unwrap();
            assert!(dec.recombine().unwrap().max_abs_diff(&e2) < 1e-10);
        }
        let grow = st(C64::new(0.1, 0.0), 0.2, 0.79, 0.0);
        let shrink = st(C64::new(0.5, 0.0), 0.2, 0.55, 0.0);
        assert!(three_level_classical_decomposition(&grow, &shrink).is_err());
    }

    #[test]
    fn three_level_revival_is_quantum() {
        let p = GiantAtom3LParams::new(40.0 * std::f64::consts::PI, 20.0 * std::f64::consts::PI, 4.0, 8.0);
        let s1 = three_level_state(1.0, &p).unwrap();
        let s2 = three_level_state(1.16, &p).unwrap();
        assert_eq!(classify_three_level(&s1, &s2).kind, MemoryKind::QuantumMemory);
    }

    #[test]
    fn dephasing_examples() {
        let f = |a: f64, b: f64| classify_dephasing(C64::new(a, 0.0), C64::new(b, 0.0)).kind;
        assert_eq!(f(0.9, 0.3), MemoryKind::Markovian);
        assert_eq!(f(0.3, 0.9), MemoryKind::ClassicalNonMarkovian);
        assert_eq!(f(0.0, 1.0), MemoryKind::ClassicalNonMarkovian);
    }

    #[test]
    fn circle_intersections() {
        assert_eq!(half_circle_intersection(ZERO), C64::new(0.5, 0.0));
        let g = half_circle_intersection(ONE);
        assert!((g - C64::new(0.5, 0.0)).norm() < 1e-12);
        for &a in &[C64::new(0.2, 0.0), C64::new(-0.3, 0.6), C64::from_polar(1.0, 2.0), C64::new(0.0, -0.9)] {
            let g = half_circle_intersection(a);
            assert!((g.norm() - 0.5).abs() < 1e-12);
            assert!(((a - g).norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn dephasing_instrument_recombines() {
        let inst = dephasing_instrument(C64::new(0.2, 0.0), C64::new(0.95, 0.0)).unwrap();
        let target = dephasing_channel(C64::new(0.95, 0.0)).unwrap();
        assert!(inst.decomposition.recombine().unwrap().max_abs_diff(&target) < 1e-10);
        for k in &inst.decomposition.transitions {
            assert!(is_cptp(k, 1e-10).cptp);
        }
        let zero = dephasing_instrument(ZERO, ZERO).unwrap();
        assert_eq!(zero.gamma, C64::new(0.5, 0.0));
        assert!(zero.decomposition.recombine().unwrap().max_abs_diff(&dephasing_channel(ZERO).unwrap()) < 1e-12);
        let one = dephasing_instrument(ONE, ONE).unwrap();
        assert!(one.decomposition.recombine().unwrap().max_abs_diff(&dephasing_channel(ONE).unwrap()) < 1e-12);
    }

    #[test]
    fn two_level_transition_examples() {
        let c = C64::new(0.6, 0.2);
        assert!(markovian_transition_two_level(c, c).unwrap().max_abs_diff(&ChoiOperator::identity(2)) < 1e-15);
        let (c1, c2) = (C64::new(0.8, 0.0), C64::new(0.4, 0.0));
        let k = markovian_transition_two_level(c1, c2).unwrap();
        assert!(is_cptp(&k, 1e-12).cptp);
        let l = link_product(&channel_two_level(c1).unwrap(), &k).unwrap();
        assert!(l.max_abs_diff(&channel_two_level(c2).unwrap()) < 1e-14);
        let bad = markovian_transition_two_level(c2, c1).unwrap();
        assert!(is_cptp(&bad, 1e-9).min_eigenvalue < 0.0);
        assert!(markovian_transition_two_level(ZERO, c1).is_err());
    }

    #[test]
    fn three_level_transition_links() {
        let p = GiantAtom3LParams::new(40.0 * std::f64::consts::PI, 20.0 * std::f64::consts::PI, 4.0, 8.0);
        let s1 = three_level_state(0.3, &p).unwrap();
        let s2 = three_level_state(0.6, &p).unwrap();
        let k = markovian_transition_three_level(&s1, &s2).unwrap();
        assert!(is_cptp(&k, 1e-9).cptp);
        let l = link_product(&s1.channel().unwrap(), &k).unwrap();
        assert!(l.max_abs_diff(&s2.channel().unwrap()) < 1e-12);
    }

    #[test]
    fn identity_transform_is_noop() {
        let inst = dephasing_instrument(C64::new(0.1, 0.3), C64::new(-0.5, 0.6)).unwrap();
        let id = ChoiOperator::identity(2);
        let t = transform_decomposition(&inst.decomposition, &id, &crate::linalg::identity(2), &id).unwrap();
        for (a, b) in t.instrument.parts().iter().zip(inst.decomposition.instrument.parts()) {
            assert!(a.max_abs_diff(b) < 1e-14);
        }
        assert!(transform_decomposition(&inst.decomposition, &id, &CMat::from_element(2, 2, ONE), &id).is_err());
    }
}
